"""Real-dataset ingestion: edge list + attribute table -> graph bundle.

Arbitrary node ids are renumbered to contiguous integers in attribute
file order; the raw-to-internal map is returned so callers can persist
it. Edges are symmetrized and deduplicated; self-loops are dropped.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .generate import NodeAttributes
from .graph import Graph

__all__ = ["IngestError", "ingest", "write_id_map"]


class IngestError(ValueError):
    """Unparseable or inconsistent input; message carries file and line."""


def _read_attributes(attr_file: Path, id_col: str | None, class_col: str,
                     sensitive_col: str, feature_cols: list[str]):
    with open(attr_file, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError(f"{attr_file}:1: empty attribute file")
        fields = list(reader.fieldnames)
        if id_col is None:
            id_col = fields[0]
        for col in [id_col, class_col, sensitive_col] + feature_cols:
            if col not in fields:
                raise IngestError(
                    f"{attr_file}:1: column {col!r} not found; available: {fields}")

        raw_ids: list[str] = []
        id_map: dict[str, int] = {}
        classes: list[int] = []
        sens: list[int] = []
        feats: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            raw = row[id_col].strip()
            if raw in id_map:
                raise IngestError(f"{attr_file}:{lineno}: duplicate node id {raw!r}")
            id_map[raw] = len(raw_ids)
            raw_ids.append(raw)
            for col, dest in ((class_col, classes), (sensitive_col, sens)):
                cell = row[col].strip()
                if cell not in ("0", "1"):
                    raise IngestError(
                        f"{attr_file}:{lineno}: column {col!r} must be binary 0/1, "
                        f"got {cell!r}")
                dest.append(int(cell))
            try:
                feats.append([float(row[c]) for c in feature_cols])
            except ValueError as e:
                raise IngestError(f"{attr_file}:{lineno}: bad feature value ({e})") from e
    return id_map, classes, sens, feats


def _read_edges(edge_file: Path, id_map: dict[str, int],
                skip_header: bool) -> np.ndarray:
    pairs: list[tuple[int, int]] = []
    with open(edge_file, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if lineno == 1 and skip_header:
                continue
            line = raw.strip()
            if not line:
                continue
            tokens = line.split(",") if "," in line else line.split()
            tokens = [t.strip() for t in tokens if t.strip()]
            if len(tokens) != 2:
                raise IngestError(
                    f"{edge_file}:{lineno}: expected two node ids, got {line!r}")
            endpoints = []
            for t in tokens:
                if t not in id_map:
                    raise IngestError(
                        f"{edge_file}:{lineno}: edge endpoint {t!r} not present "
                        f"in the attribute file")
                endpoints.append(id_map[t])
            u, v = endpoints
            if u == v:
                continue
            pairs.append((min(u, v), max(u, v)))
    return np.array(sorted(set(pairs)), dtype=np.int64).reshape(-1, 2)


def ingest(edge_file, attr_file, class_col: str, sensitive_col: str,
           feature_cols: list[str], id_col: str | None = None,
           skip_edge_header: bool = False
           ) -> tuple[Graph, NodeAttributes, dict[str, int]]:
    """Load a real dataset into (Graph, NodeAttributes, raw-id map)."""
    edge_file, attr_file = Path(edge_file), Path(attr_file)
    id_map, classes, sens, feats = _read_attributes(
        attr_file, id_col, class_col, sensitive_col, list(feature_cols))
    n = len(id_map)
    if n == 0:
        raise IngestError(f"{attr_file}: no node rows")
    edges = _read_edges(edge_file, id_map, skip_edge_header)
    g = Graph.from_edges(n, edges)
    attrs = NodeAttributes(
        class_labels=np.array(classes, dtype=np.int64),
        sensitive=np.array(sens, dtype=np.int64),
        features=np.array(feats, dtype=np.float64).reshape(n, len(feature_cols)))
    return g, attrs, id_map


def write_id_map(path, id_map: dict[str, int]) -> None:
    """Persist the raw-id -> internal-id map (internal-id order)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["raw_id", "node_id"])
        for raw, i in sorted(id_map.items(), key=lambda kv: kv[1]):
            w.writerow([raw, i])
