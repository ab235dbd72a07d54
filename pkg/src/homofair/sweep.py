"""Deterministic, resumable experiment sweeps over the homophily grid.

A sweep is a grid over (h_c, h_s, e) cells; each cell gets several
generated graphs, and every model trains several times per graph. The
schedulable unit is one generated graph (all its training runs); units
are independent, so they can run in any order on any number of workers
and still produce byte-identical result CSVs:

  - every seed derives from (master_seed, h_c, h_s, e, joint, graph
    index[, model, run index]) and never from execution order;
  - each unit writes only its own cell directory;
  - cross-unit files (runs.csv, aggregate/*) are assembled at the end
    by re-reading cell artifacts in canonical unit order;
  - wall-clock durations and timestamps live only in manifest.json.

A manifest of completed units makes interrupted sweeps resumable, and
failures are recorded per run rather than aborting the sweep.
"""

from __future__ import annotations

import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .generate import GeneratorConfig, JointDistribution, generate
from .graph import homophily_profile
from .io import (fmt_float, fmt_optional, parse_optional_float,
                 read_stratified_csv, write_comparison_csv, write_config,
                 write_graph_bundle, write_predictions_csv,
                 write_stratified_csv)
from .metrics import (N_BINS, HomophilyBin, StratifiedReport,
                      design_comparison, fairness_report, stratified_report)
from .models import (FAMILY_MODELS, MODEL_NAMES, ModelConfig, family_of, fit,
                     make_splits)
from .seeding import derive_seed

__all__ = ["DEFAULT_GRID", "SweepSpec", "RunRecord", "SweepOutcome",
           "bias_sweep_spec", "unit_id", "sweep"]

DEFAULT_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)

RUNS_HEADER = ["h_c", "h_s", "e", "joint", "graph_index", "graph_seed",
               "model", "run_index", "run_seed", "status", "f1", "accuracy",
               "delta_sp", "delta_eo", "test_nodes", "undefined_test", "error"]

_AGG_METRICS = ("f1", "delta_sp", "delta_eo")


@dataclass(frozen=True)
class SweepSpec:
    """Full description of one sweep; everything else derives from it."""

    out_dir: str
    h_c_list: tuple[float, ...] = DEFAULT_GRID
    h_s_list: tuple[float, ...] = DEFAULT_GRID
    joint_mode: str = "uniform"
    e_list: tuple[float, ...] = (1.0,)
    graphs_per_cell: int = 10
    runs_per_model: int = 3
    families: tuple[str, ...] = ("homophilous", "heterophilous")
    master_seed: int = 0
    n_nodes: int = 1000
    edges_per_node: int = 10
    feature_dim: int = 2
    feature_std: float = 1.0
    k: int = 1
    workers: int = 1

    def __post_init__(self):
        for name in ("h_c_list", "h_s_list", "e_list"):
            vals = getattr(self, name)
            object.__setattr__(self, name, tuple(float(v) for v in vals))
            vals = getattr(self, name)
            if not vals:
                raise ValueError(f"{name} must be nonempty")
            if any(not 0.0 <= v <= 1.0 for v in vals):
                raise ValueError(f"{name} values must lie in [0, 1], got {vals}")
        if self.joint_mode not in ("uniform", "skew3x"):
            raise ValueError(f"joint_mode must be 'uniform' or 'skew3x', "
                             f"got {self.joint_mode!r}")
        fams = tuple(self.families)
        object.__setattr__(self, "families", fams)
        if not fams or any(f not in FAMILY_MODELS for f in fams):
            raise ValueError(f"families must be a nonempty subset of "
                             f"{sorted(FAMILY_MODELS)}, got {fams}")
        for name in ("graphs_per_cell", "runs_per_model", "workers", "k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.k not in (1, 2):
            raise ValueError(f"k must be 1 or 2, got {self.k}")
        if self.n_nodes <= self.edges_per_node + 1:
            raise ValueError("n_nodes must exceed edges_per_node + 1")

    def models(self) -> tuple[str, ...]:
        return tuple(m for m in MODEL_NAMES if family_of(m) in self.families)

    def quick(self) -> "SweepSpec":
        """CI-scale preset: 3 graphs per cell, 1 run per model."""
        return replace(self, graphs_per_cell=3, runs_per_model=1)

    def to_dict(self) -> dict:
        return {
            "out_dir": str(self.out_dir),
            "h_c_list": list(self.h_c_list),
            "h_s_list": list(self.h_s_list),
            "joint_mode": self.joint_mode,
            "e_list": list(self.e_list),
            "graphs_per_cell": self.graphs_per_cell,
            "runs_per_model": self.runs_per_model,
            "families": list(self.families),
            "master_seed": self.master_seed,
            "n_nodes": self.n_nodes,
            "edges_per_node": self.edges_per_node,
            "feature_dim": self.feature_dim,
            "feature_std": self.feature_std,
            "k": self.k,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        d = dict(d)
        for key in ("h_c_list", "h_s_list", "e_list"):
            d[key] = tuple(float(v) for v in d[key])
        d["families"] = tuple(d["families"])
        return cls(**d)


def bias_sweep_spec(out_dir, e_list=(0.0, 0.25, 0.5, 0.75, 1.0),
                    h_s: float = 0.9, **overrides) -> SweepSpec:
    """Feature-bias sweep: fixed high h_s, uniform joint, e varied.

    h_c still covers the full default grid so per-e aggregates average
    over class-homophily conditions, matching the main sweep's cells at
    e = 1.0 seed for seed.
    """
    return SweepSpec(out_dir=str(out_dir), e_list=tuple(e_list),
                     h_s_list=(h_s,), joint_mode="uniform", **overrides)


@dataclass(frozen=True)
class RunRecord:
    """One training run's identity and test-set metrics."""

    h_c: float
    h_s: float
    e: float
    joint: str
    graph_index: int
    graph_seed: int
    model: str
    run_index: int
    run_seed: int
    status: str
    f1: float | None
    accuracy: float | None
    delta_sp: float | None
    delta_eo: float | None
    test_nodes: int
    undefined_test: int
    error: str
    duration_s: float = 0.0

    def to_row(self) -> list[str]:
        return [fmt_float(self.h_c), fmt_float(self.h_s), fmt_float(self.e),
                self.joint, str(self.graph_index), str(self.graph_seed),
                self.model, str(self.run_index), str(self.run_seed),
                self.status, fmt_optional(self.f1), fmt_optional(self.accuracy),
                fmt_optional(self.delta_sp), fmt_optional(self.delta_eo),
                str(self.test_nodes), str(self.undefined_test), self.error]

    @classmethod
    def from_row(cls, row: list[str]) -> "RunRecord":
        return cls(h_c=float(row[0]), h_s=float(row[1]), e=float(row[2]),
                   joint=row[3], graph_index=int(row[4]), graph_seed=int(row[5]),
                   model=row[6], run_index=int(row[7]), run_seed=int(row[8]),
                   status=row[9], f1=parse_optional_float(row[10]),
                   accuracy=parse_optional_float(row[11]),
                   delta_sp=parse_optional_float(row[12]),
                   delta_eo=parse_optional_float(row[13]),
                   test_nodes=int(row[14]), undefined_test=int(row[15]),
                   error=row[16])


def unit_id(h_c: float, h_s: float, e: float, joint: str, graph_index: int) -> str:
    return (f"hc{fmt_float(h_c)}_hs{fmt_float(h_s)}_e{fmt_float(e)}"
            f"_{joint}_g{graph_index}")


def _units(spec: SweepSpec) -> list[tuple[float, float, float, int]]:
    return [(h_c, h_s, e, gi)
            for e in spec.e_list
            for h_c in spec.h_c_list
            for h_s in spec.h_s_list
            for gi in range(spec.graphs_per_cell)]


def _run_dir(cell_dir: Path, model: str, run_index: int) -> Path:
    return cell_dir / "runs" / f"{model}_r{run_index}"


def _sanitize(msg: str) -> str:
    return " | ".join(str(msg).splitlines())


def _run_unit(payload: dict) -> dict:
    """Worker entry: generate one graph, run all its training runs.

    Writes only inside this unit's cell directory; returns timing info
    for the manifest (rows live in the cell's records.csv).
    """
    spec = SweepSpec.from_dict(payload["spec"])
    h_c, h_s, e, gi = payload["unit"]
    t0 = time.perf_counter()
    uid = unit_id(h_c, h_s, e, spec.joint_mode, gi)
    cell_dir = Path(spec.out_dir) / "cells" / uid
    cell_dir.mkdir(parents=True, exist_ok=True)

    graph_seed = derive_seed(spec.master_seed, h_c, h_s, e, spec.joint_mode,
                             gi, "graph")
    split_seed = derive_seed(spec.master_seed, h_c, h_s, e, spec.joint_mode,
                             gi, "splits")

    def record(model: str, ri: int, run_seed: int, **kw) -> RunRecord:
        base = dict(h_c=h_c, h_s=h_s, e=e, joint=spec.joint_mode,
                    graph_index=gi, graph_seed=graph_seed, model=model,
                    run_index=ri, run_seed=run_seed, status="ok", f1=None,
                    accuracy=None, delta_sp=None, delta_eo=None, test_nodes=0,
                    undefined_test=0, error="")
        base.update(kw)
        return RunRecord(**base)

    records: list[RunRecord] = []
    planned = [(model, ri) for model in spec.models()
               for ri in range(spec.runs_per_model)]
    try:
        gen_cfg = GeneratorConfig(
            n_nodes=spec.n_nodes, edges_per_node=spec.edges_per_node,
            h_c=h_c, h_s=h_s, joint=JointDistribution.from_mode(spec.joint_mode),
            feature_bias=e, feature_dim=spec.feature_dim,
            feature_std=spec.feature_std, seed=graph_seed)
        g, attrs = generate(gen_cfg)
        profile = homophily_profile(g, attrs.class_labels, attrs.sensitive,
                                    ks=(spec.k,))
        splits = make_splits(spec.n_nodes, split_seed)
        write_graph_bundle(cell_dir / "bundle", g, attrs,
                           generator_config=gen_cfg,
                           extra_meta={"unit": uid, "split_seed": split_seed})
    except Exception as exc:
        msg = f"graph generation failed: {_sanitize(exc)}"
        for model, ri in planned:
            run_seed = derive_seed(spec.master_seed, h_c, h_s, e,
                                   spec.joint_mode, gi, model, ri)
            records.append(record(model, ri, run_seed, status="failed", error=msg))
        _write_records(cell_dir, records)
        return {"uid": uid, "duration_s": time.perf_counter() - t0,
                "n_failed": len(records)}

    test_idx = np.flatnonzero(splits.test)
    for model, ri in planned:
        run_seed = derive_seed(spec.master_seed, h_c, h_s, e, spec.joint_mode,
                               gi, model, ri)
        try:
            result = fit(g, attrs, splits, ModelConfig(family=model, seed=run_seed))
            rep = stratified_report(result.predictions, attrs, profile, spec.k,
                                    eval_nodes=test_idx)
            glob = fairness_report(result.predictions, attrs.class_labels,
                                   attrs.sensitive, test_idx)
            rdir = _run_dir(cell_dir, model, ri)
            rdir.mkdir(parents=True, exist_ok=True)
            write_predictions_csv(rdir / "preds.csv", result.predictions,
                                  attrs, splits)
            write_stratified_csv(rdir / "report.csv", rep)
            records.append(record(
                model, ri, run_seed, f1=glob.f1, accuracy=glob.accuracy,
                delta_sp=glob.delta_sp, delta_eo=glob.delta_eo,
                test_nodes=int(test_idx.size),
                undefined_test=rep.undefined_node_count))
        except Exception as exc:
            records.append(record(model, ri, run_seed, status="failed",
                                  test_nodes=int(test_idx.size),
                                  error=_sanitize(exc)))
    _write_records(cell_dir, records)
    return {"uid": uid, "duration_s": time.perf_counter() - t0,
            "n_failed": sum(r.status != "ok" for r in records)}


def _write_records(cell_dir: Path, records: list[RunRecord]) -> None:
    with open(cell_dir / "records.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUNS_HEADER)
        for r in records:
            w.writerow(r.to_row())


def _read_records(cell_dir: Path) -> list[list[str]]:
    with open(cell_dir / "records.csv", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != RUNS_HEADER:
        raise ValueError(f"{cell_dir / 'records.csv'}: unexpected header")
    return rows[1:]


def _load_manifest(path: Path) -> dict:
    if not path.exists():
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (json.JSONDecodeError, OSError):
        return {}


def _save_manifest(path: Path, manifest: dict) -> None:
    tmp = path.with_suffix(".json.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    tmp.replace(path)


def _spec_fingerprint(d: dict) -> dict:
    return {k: v for k, v in d.items() if k not in ("workers", "out_dir")}


@dataclass(frozen=True)
class SweepOutcome:
    out_dir: Path
    n_units: int
    n_runs: int
    failures: list[RunRecord]

    @property
    def ok(self) -> bool:
        return not self.failures


def sweep(spec: SweepSpec, verbose: bool = True) -> SweepOutcome:
    """Run (or resume) a sweep; see the module docstring for layout."""
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    manifest = _load_manifest(manifest_path)
    if manifest:
        if _spec_fingerprint(manifest.get("spec", {})) != _spec_fingerprint(spec.to_dict()):
            raise ValueError(
                f"{out} already holds a sweep with a different configuration; "
                "use a fresh output directory")
    else:
        manifest = {"spec": spec.to_dict(), "completed": {}}
    manifest["spec"] = spec.to_dict()

    def flat_value(key: str, v):
        if not isinstance(v, list):
            return v
        return ",".join(v if key == "families" else [fmt_float(x) for x in v])

    write_config(out / "sweep.config",
                 {k: flat_value(k, v) for k, v in spec.to_dict().items()})

    units = _units(spec)
    completed = manifest.setdefault("completed", {})
    pending = [u for u in units
               if unit_id(u[0], u[1], u[2], spec.joint_mode, u[3]) not in completed]

    def note(uid: str, info: dict, done: int) -> None:
        completed[uid] = {"duration_s": round(info["duration_s"], 3),
                          "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
                          "n_failed": info["n_failed"]}
        _save_manifest(manifest_path, manifest)
        if verbose:
            print(f"[{done}/{len(units)}] {uid} "
                  f"({info['duration_s']:.1f}s, {info['n_failed']} failed)",
                  file=sys.stderr)

    payloads = [{"spec": spec.to_dict(), "unit": list(u)} for u in pending]
    done = len(units) - len(pending)
    if spec.workers == 1:
        for payload in payloads:
            info = _run_unit(payload)
            done += 1
            note(info["uid"], info, done)
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [pool.submit(_run_unit, p) for p in payloads]
            for fut in as_completed(futures):
                info = fut.result()
                done += 1
                note(info["uid"], info, done)

    # Assemble cross-unit outputs from cell artifacts in canonical order,
    # so the bytes cannot depend on scheduling or resume history.
    all_rows: list[list[str]] = []
    for h_c, h_s, e, gi in units:
        uid = unit_id(h_c, h_s, e, spec.joint_mode, gi)
        all_rows.extend(_read_records(out / "cells" / uid))
    with open(out / "runs.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUNS_HEADER)
        w.writerows(all_rows)

    records = [RunRecord.from_row(r) for r in all_rows]
    _aggregate(spec, out, records)

    failures = [r for r in records if r.status != "ok"]
    return SweepOutcome(out_dir=out, n_units=len(units), n_runs=len(records),
                        failures=failures)


def _mean(vals: list[float]) -> float | None:
    return sum(vals) / len(vals) if vals else None


def _aggregate(spec: SweepSpec, out: Path, records: list[RunRecord]) -> None:
    agg_dir = out / "aggregate"
    agg_dir.mkdir(exist_ok=True)

    # Reload every successful run's stratified report from disk: one code
    # path whether the run happened now or in a resumed-from session.
    family_reports: dict[str, list[StratifiedReport]] = {f: [] for f in spec.families}
    for r in records:
        if r.status != "ok":
            continue
        path = (_run_dir(out / "cells" / unit_id(r.h_c, r.h_s, r.e, r.joint,
                                                 r.graph_index),
                         r.model, r.run_index) / "report.csv")
        family_reports[family_of(r.model)].append(
            read_stratified_csv(path, spec.k, r.undefined_test))

    _write_fig2(agg_dir / "fig2_grid.csv", spec, family_reports)

    if ("heterophilous" in family_reports and "homophilous" in family_reports
            and family_reports["heterophilous"] and family_reports["homophilous"]):
        comparison = design_comparison(family_reports["heterophilous"],
                                       family_reports["homophilous"])
        write_comparison_csv(agg_dir / "fig3_diff.csv", comparison)

    _write_fig4(agg_dir / "fig4_bias.csv", spec, records)


def _write_fig2(path: Path, spec: SweepSpec,
                family_reports: dict[str, list[StratifiedReport]]) -> None:
    """Pooled per-family means over local-homophily bins (heatmap data)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["family", "class_bin_lo", "class_bin_hi", "sens_bin_lo",
                  "sens_bin_hi", "n_nodes_total"]
        for m in _AGG_METRICS:
            header += [f"{m}_mean", f"{m}_n"]
        w.writerow(header)
        for family in sorted(family_reports):
            reports = family_reports[family]
            for cb in range(N_BINS):
                for sb in range(N_BINS):
                    b = HomophilyBin(cb, sb)
                    n_nodes = sum(rep.bins[b][1] for rep in reports
                                  if b in rep.bins)
                    row = [family,
                           fmt_float(b.class_range[0]), fmt_float(b.class_range[1]),
                           fmt_float(b.sens_range[0]), fmt_float(b.sens_range[1]),
                           n_nodes]
                    for m in _AGG_METRICS:
                        vals = [v for rep in reports
                                if (v := rep.metric(b, m)) is not None]
                        row += [fmt_optional(_mean(vals)), len(vals)]
                    w.writerow(row)


def _write_fig4(path: Path, spec: SweepSpec, records: list[RunRecord]) -> None:
    """Per-(e, family) means of the global test metrics."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["e", "family"]
        for m in _AGG_METRICS:
            header += [f"{m}_mean", f"{m}_n"]
        w.writerow(header)
        for e in spec.e_list:
            for family in sorted(spec.families):
                sel = [r for r in records
                       if r.status == "ok" and r.e == e
                       and family_of(r.model) == family]
                row = [fmt_float(e), family]
                for m in _AGG_METRICS:
                    vals = [v for r in sel if (v := getattr(r, m)) is not None]
                    row += [fmt_optional(_mean(vals)), len(vals)]
                w.writerow(row)
