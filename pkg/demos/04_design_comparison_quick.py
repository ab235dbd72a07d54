"""Design-family comparison on a reduced sweep.

The full experiment grid trains thousands of models; this script runs a
drastically reduced version (smaller graphs, two homophily levels, one
run per model) and prints the heterophilous-minus-homophilous metric
differences per local-homophily bin, the table the fig3_diff.csv
aggregate holds for the real sweep. Negative dSP/dEO differences mean
the ego/neighbor-decoupled family is fairer in that bin.

Takes a few seconds. Run from the repository root:

    python demos/04_design_comparison_quick.py
"""

import csv
import tempfile
from pathlib import Path

from homofair import SweepSpec, sweep


def main():
    out = Path(tempfile.mkdtemp(prefix="design_quick_")) / "sweep"
    spec = SweepSpec(out_dir=str(out), h_c_list=(0.5,), h_s_list=(0.1, 0.9),
                     e_list=(1.0,), graphs_per_cell=2, runs_per_model=1,
                     n_nodes=300, edges_per_node=5, master_seed=0)
    n_models = len(spec.models())
    print(f"running {2 * spec.graphs_per_cell * n_models} training runs "
          f"on {spec.n_nodes}-node graphs...")
    outcome = sweep(spec, verbose=False)
    print(f"done: {outcome.n_runs} runs, {len(outcome.failures)} failures\n")

    with open(out / "aggregate" / "fig3_diff.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))

    print("het - hom differences per (class hom, sens hom) bin:")
    print("  class bin   sens bin    dF1      dSP      dEO    n(het/hom)")
    for row in rows:
        if not row["delta_sp_diff"]:
            continue
        cbin = f"[{float(row['class_bin_lo']):.1f},{float(row['class_bin_hi']):.1f})"
        sbin = f"[{float(row['sens_bin_lo']):.1f},{float(row['sens_bin_hi']):.1f})"
        vals = []
        for m in ("f1", "delta_sp", "delta_eo"):
            v = row[f"{m}_diff"]
            vals.append(f"{float(v):+.3f}" if v else "   --  ")
        counts = f"{row['delta_sp_het_n']}/{row['delta_sp_hom_n']}"
        print(f"  {cbin:>10s} {sbin:>10s}  {vals[0]:>7s}  {vals[1]:>7s}  "
              f"{vals[2]:>7s}  {counts:>9s}")

    print(f"\nfull artifacts under {out}")


if __name__ == "__main__":
    main()
