"""On-disk formats: graph bundles, result CSVs, and flat config files.

All writers are deterministic: floats are serialized with repr (shortest
round-tripping form), rows come out in sorted order, and line endings
are fixed to "\n", so identical inputs produce byte-identical files.
UNDEFINED metric values are empty CSV cells, never zeros.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .generate import GeneratorConfig, NodeAttributes
from .graph import Graph, Histogram
from .metrics import (N_BINS, FairnessReport, HomophilyBin, DesignComparison,
                      StratifiedReport)
from .models import Predictions, SplitMasks

__all__ = [
    "ConfigError",
    "parse_config",
    "write_config",
    "fmt_float",
    "parse_optional_float",
    "write_graph_bundle",
    "read_graph_bundle",
    "write_histogram_csv",
    "write_predictions_csv",
    "read_predictions_csv",
    "write_trace_csv",
    "write_stratified_csv",
    "read_stratified_csv",
    "write_comparison_csv",
]


class ConfigError(ValueError):
    """Malformed config or data file; message carries file and line."""


def fmt_float(x: float) -> str:
    """Shortest decimal form that round-trips the exact float64 value."""
    return repr(float(x))


def fmt_optional(x: float | None) -> str:
    return "" if x is None else fmt_float(x)


def parse_optional_float(cell: str) -> float | None:
    return None if cell == "" else float(cell)


def _writer(fh) -> csv.writer:
    return csv.writer(fh, lineterminator="\n")


# -- flat key=value configs -------------------------------------------------

def parse_config(path) -> dict[str, str]:
    """Read `key = value` lines; '#' starts a comment, blanks are skipped."""
    out: dict[str, str] = {}
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


def write_config(path, mapping: dict) -> None:
    lines = [f"{k} = {mapping[k]}" for k in mapping]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- graph bundles ------------------------------------------------------------

def write_graph_bundle(out_dir, g: Graph, attrs: NodeAttributes, *,
                       generator_config: GeneratorConfig | None = None,
                       source: str = "synthetic",
                       extra_meta: dict | None = None) -> Path:
    """Write edges.tsv + nodes.csv + meta.json into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with open(out_dir / "edges.tsv", "w", encoding="utf-8", newline="") as fh:
        for u, v in g.edge_array():
            fh.write(f"{u}\t{v}\n")

    d = attrs.features.shape[1]
    with open(out_dir / "nodes.csv", "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["id", "class", "sensitive"] + [f"f{i}" for i in range(d)])
        for i in range(g.n_nodes):
            w.writerow([i, attrs.class_labels[i], attrs.sensitive[i]]
                       + [fmt_float(x) for x in attrs.features[i]])

    meta = {
        "n_nodes": g.n_nodes,
        "n_edges": g.n_edges,
        "feature_dim": d,
        "source": source,
        "generator": generator_config.to_dict() if generator_config else None,
    }
    if extra_meta:
        meta.update(extra_meta)
    with open(out_dir / "meta.json", "w", encoding="utf-8", newline="") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_dir


def read_graph_bundle(bundle_dir) -> tuple[Graph, NodeAttributes, dict]:
    bundle_dir = Path(bundle_dir)
    with open(bundle_dir / "meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    n = int(meta["n_nodes"])

    path = bundle_dir / "nodes.csv"
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[:3] != ["id", "class", "sensitive"]:
        raise ConfigError(f"{path}:1: unexpected header {header[:3]}")
    if len(body) != n:
        raise ConfigError(f"{path}: expected {n} node rows, found {len(body)}")
    d = len(header) - 3
    class_labels = np.empty(n, dtype=np.int64)
    sensitive = np.empty(n, dtype=np.int64)
    features = np.empty((n, d), dtype=np.float64)
    for lineno, row in enumerate(body, start=2):
        i = int(row[0])
        if i != lineno - 2:
            raise ConfigError(f"{path}:{lineno}: node ids must be 0..n-1 in order")
        class_labels[i] = int(row[1])
        sensitive[i] = int(row[2])
        features[i] = [float(x) for x in row[3:]]
    attrs = NodeAttributes(class_labels=class_labels, sensitive=sensitive,
                           features=features)

    epath = bundle_dir / "edges.tsv"
    with open(epath, encoding="utf-8") as fh:
        pairs = []
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if len(parts) != 2:
                raise ConfigError(f"{epath}:{lineno}: expected 'u<TAB>v', got {raw.rstrip()!r}")
            pairs.append((int(parts[0]), int(parts[1])))
    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    return Graph.from_edges(n, edges), attrs, meta


# -- result CSVs --------------------------------------------------------------

def write_histogram_csv(path, hist: Histogram) -> None:
    """Rows bin_lo,bin_hi,count; one trailing `undefined,,count` row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts):
            w.writerow([fmt_float(lo), fmt_float(hi), int(c)])
        w.writerow(["undefined", "", hist.undefined_count])


def write_predictions_csv(path, preds: Predictions, attrs: NodeAttributes,
                          splits: SplitMasks) -> None:
    names = splits.names()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["node_id", "true_class", "sensitive", "predicted_class",
                    "prob_class1", "split"])
        for i in range(preds.n_nodes):
            w.writerow([i, attrs.class_labels[i], attrs.sensitive[i],
                        preds.predicted_class[i], fmt_float(preds.prob_class1[i]),
                        names[i]])


def read_predictions_csv(path) -> tuple[Predictions, np.ndarray, np.ndarray, SplitMasks]:
    """Inverse of write_predictions_csv: (preds, truth, sensitive, splits)."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    expected = ["node_id", "true_class", "sensitive", "predicted_class",
                "prob_class1", "split"]
    if header != expected:
        raise ConfigError(f"{path}:1: expected header {expected}, got {header}")
    n = len(body)
    truth = np.empty(n, dtype=np.int64)
    sens = np.empty(n, dtype=np.int64)
    pred = np.empty(n, dtype=np.int64)
    prob = np.empty(n, dtype=np.float64)
    split_names = np.empty(n, dtype=object)
    for lineno, row in enumerate(body, start=2):
        i = int(row[0])
        if i != lineno - 2:
            raise ConfigError(f"{path}:{lineno}: node ids must be 0..n-1 in order")
        truth[i], sens[i], pred[i] = int(row[1]), int(row[2]), int(row[3])
        prob[i] = float(row[4])
        if row[5] not in ("train", "val", "test"):
            raise ConfigError(f"{path}:{lineno}: unknown split {row[5]!r}")
        split_names[i] = row[5]
    preds = Predictions(predicted_class=pred, prob_class1=prob)
    splits = SplitMasks(train=split_names == "train", val=split_names == "val",
                        test=split_names == "test")
    return preds, truth, sens, splits


def write_trace_csv(path, trace: list[tuple[int, float, float]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["epoch", "train_loss", "val_f1"])
        for epoch, loss, val_f1 in trace:
            w.writerow([epoch, fmt_float(loss), fmt_float(val_f1)])


def _bin_bounds(b: HomophilyBin) -> list[str]:
    (clo, chi), (slo, shi) = b.class_range, b.sens_range
    return [fmt_float(clo), fmt_float(chi), fmt_float(slo), fmt_float(shi)]


def write_stratified_csv(path, report: StratifiedReport) -> None:
    """Full 5x5 grid; empty bins keep n_nodes 0 and empty metric cells."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["class_bin_lo", "class_bin_hi", "sens_bin_lo", "sens_bin_hi",
                    "n_nodes", "f1", "acc", "delta_sp", "delta_eo"])
        for cb in range(N_BINS):
            for sb in range(N_BINS):
                b = HomophilyBin(cb, sb)
                if b in report.bins:
                    rep, n = report.bins[b]
                    w.writerow(_bin_bounds(b) + [
                        n, fmt_float(rep.f1), fmt_float(rep.accuracy),
                        fmt_optional(rep.delta_sp), fmt_optional(rep.delta_eo)])
                else:
                    w.writerow(_bin_bounds(b) + [0, "", "", "", ""])


def read_stratified_csv(path, k: int = 1,
                        undefined_node_count: int = 0) -> StratifiedReport:
    """Rebuild a StratifiedReport from its CSV.

    Per-(s, c) group counts are not stored in the CSV, so the returned
    reports carry group_counts=None; bin node counts and all metric
    values round-trip exactly.
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    bins: dict[HomophilyBin, tuple[FairnessReport, int]] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        n = int(row[4])
        if n == 0:
            continue
        b = HomophilyBin(int(round(float(row[0]) / 0.2)),
                         int(round(float(row[2]) / 0.2)))
        bins[b] = (FairnessReport(
            f1=float(row[5]), accuracy=float(row[6]),
            delta_sp=parse_optional_float(row[7]),
            delta_eo=parse_optional_float(row[8]),
            group_counts=None), n)
    return StratifiedReport(bins=bins, undefined_node_count=undefined_node_count,
                            k=k)


def write_comparison_csv(path, comparison: DesignComparison) -> None:
    """Signed het-minus-hom differences with contributing counts."""
    metrics = ("f1", "delta_sp", "delta_eo")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        header = ["class_bin_lo", "class_bin_hi", "sens_bin_lo", "sens_bin_hi"]
        for m in metrics:
            header += [f"{m}_diff", f"{m}_het_n", f"{m}_hom_n"]
        w.writerow(header)
        for cb in range(N_BINS):
            for sb in range(N_BINS):
                b = HomophilyBin(cb, sb)
                row = _bin_bounds(b)
                for m in metrics:
                    if b in comparison.diff:
                        het_n, hom_n = comparison.counts[b][m]
                        row += [fmt_optional(comparison.diff[b][m]), het_n, hom_n]
                    else:
                        row += ["", 0, 0]
                w.writerow(row)
