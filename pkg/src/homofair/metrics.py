"""Group fairness and performance metrics, plus homophily stratification.

Conventions shared by every metric here:
  - the favorable outcome and the positive class are label 1;
  - rates are ratios of plain integer counts, so results match a
    direct-counting reimplementation bit for bit;
  - a metric whose conditioning group is empty is UNDEFINED and
    returned as None, never coerced to 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import LocalHomophilyProfile, bin_indices

__all__ = [
    "BIN_WIDTH",
    "N_BINS",
    "FairnessReport",
    "HomophilyBin",
    "StratifiedReport",
    "DesignComparison",
    "f1_from_arrays",
    "accuracy_from_arrays",
    "statistical_parity",
    "equal_opportunity",
    "f1_binary",
    "accuracy",
    "fairness_report",
    "stratify",
    "stratified_report",
    "design_comparison",
    "high_hs_slice",
]

BIN_WIDTH = 0.2
N_BINS = 5

COMPARISON_METRICS = ("f1", "delta_sp", "delta_eo")


def _as_index(subset, n: int) -> np.ndarray:
    """Normalize a node subset (bool mask or id array) to an id array."""
    subset = np.asarray(subset)
    if subset.dtype == bool:
        if subset.shape != (n,):
            raise ValueError(f"boolean subset mask must have shape ({n},), "
                             f"got {subset.shape}")
        return np.flatnonzero(subset)
    idx = subset.astype(np.int64, copy=False)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError(f"subset ids out of range [0, {n})")
    return idx


def f1_from_arrays(pred: np.ndarray, truth: np.ndarray) -> float:
    """F1 with positive class 1; 0 when precision + recall = 0."""
    tp = int(np.count_nonzero((pred == 1) & (truth == 1)))
    fp = int(np.count_nonzero((pred == 1) & (truth == 0)))
    fn = int(np.count_nonzero((pred == 0) & (truth == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def accuracy_from_arrays(pred: np.ndarray, truth: np.ndarray) -> float:
    if pred.size == 0:
        raise ValueError("accuracy over an empty subset")
    return int(np.count_nonzero(pred == truth)) / int(pred.size)


def _rate_gap(pred: np.ndarray, group: np.ndarray) -> float | None:
    """|positive rate in group 1 - positive rate in group 0|, or None
    when either group is empty."""
    in1 = group == 1
    in0 = group == 0
    n1 = int(np.count_nonzero(in1))
    n0 = int(np.count_nonzero(in0))
    if n1 == 0 or n0 == 0:
        return None
    k1 = int(np.count_nonzero((pred == 1) & in1))
    k0 = int(np.count_nonzero((pred == 1) & in0))
    return abs(k1 / n1 - k0 / n0)


def statistical_parity(preds, sens: np.ndarray, subset) -> float | None:
    """Gap in positive-prediction rates between sensitive groups."""
    idx = _as_index(subset, len(sens))
    if idx.size == 0:
        raise ValueError("statistical_parity over an empty subset")
    return _rate_gap(preds.predicted_class[idx], sens[idx])


def equal_opportunity(preds, truth: np.ndarray, sens: np.ndarray,
                      subset) -> float | None:
    """Statistical parity restricted to truly positive (c = 1) nodes."""
    idx = _as_index(subset, len(sens))
    if idx.size == 0:
        raise ValueError("equal_opportunity over an empty subset")
    pos = idx[truth[idx] == 1]
    if pos.size == 0:
        return None
    return _rate_gap(preds.predicted_class[pos], sens[pos])


def f1_binary(preds, truth: np.ndarray, subset) -> float:
    idx = _as_index(subset, len(truth))
    if idx.size == 0:
        raise ValueError("f1_binary over an empty subset")
    return f1_from_arrays(preds.predicted_class[idx], truth[idx])


def accuracy(preds, truth: np.ndarray, subset) -> float:
    idx = _as_index(subset, len(truth))
    return accuracy_from_arrays(preds.predicted_class[idx], truth[idx])


@dataclass(frozen=True)
class FairnessReport:
    """All four metrics on one node set; delta metrics may be UNDEFINED.

    group_counts[s][c] holds the number of evaluated nodes with
    sensitive value s and true class c. Reports rebuilt from CSV (which
    does not store the cell counts) carry group_counts=None.
    """

    f1: float
    accuracy: float
    delta_sp: float | None
    delta_eo: float | None
    group_counts: np.ndarray | None

    @property
    def n_nodes(self) -> int:
        if self.group_counts is None:
            raise ValueError("group counts were not preserved for this report")
        return int(self.group_counts.sum())


def fairness_report(preds, truth: np.ndarray, sens: np.ndarray,
                    subset) -> FairnessReport:
    idx = _as_index(subset, len(truth))
    if idx.size == 0:
        raise ValueError("fairness report over an empty subset")
    counts = np.zeros((2, 2), dtype=np.int64)
    for s_val in (0, 1):
        for c_val in (0, 1):
            counts[s_val, c_val] = np.count_nonzero(
                (sens[idx] == s_val) & (truth[idx] == c_val))
    return FairnessReport(
        f1=f1_binary(preds, truth, idx),
        accuracy=accuracy(preds, truth, idx),
        delta_sp=statistical_parity(preds, sens, idx),
        delta_eo=equal_opportunity(preds, truth, sens, idx),
        group_counts=counts,
    )


@dataclass(frozen=True, order=True)
class HomophilyBin:
    """Cell of the 5x5 (class homophily x sensitive homophily) lattice."""

    class_bin: int
    sens_bin: int

    def __post_init__(self):
        for v in (self.class_bin, self.sens_bin):
            if not 0 <= v < N_BINS:
                raise ValueError(f"bin index {v} outside [0, {N_BINS})")

    @property
    def class_range(self) -> tuple[float, float]:
        return self.class_bin * BIN_WIDTH, (self.class_bin + 1) * BIN_WIDTH

    @property
    def sens_range(self) -> tuple[float, float]:
        return self.sens_bin * BIN_WIDTH, (self.sens_bin + 1) * BIN_WIDTH


def stratify(profile: LocalHomophilyProfile, k: int,
             eval_nodes) -> tuple[dict[HomophilyBin, np.ndarray], np.ndarray]:
    """Partition eval nodes into homophily bins at hop k.

    Returns (bin -> node ids, ids with UNDEFINED local homophily); only
    populated bins appear in the map, and bin membership uses the
    convention min(floor(h / 0.2), 4) so h = 1.0 lands in the top bin.
    """
    eval_idx = _as_index(eval_nodes, profile.n_nodes)
    ch = profile.values("class", k)[eval_idx]
    sh = profile.values("sens", k)[eval_idx]
    undef = np.isnan(ch) | np.isnan(sh)
    defined_idx = eval_idx[~undef]
    cbins, _ = bin_indices(ch[~undef], BIN_WIDTH)
    sbins, _ = bin_indices(sh[~undef], BIN_WIDTH)
    key = cbins * N_BINS + sbins
    out: dict[HomophilyBin, np.ndarray] = {}
    for k_val in np.unique(key):
        out[HomophilyBin(int(k_val) // N_BINS, int(k_val) % N_BINS)] = \
            defined_idx[key == k_val]
    return out, eval_idx[undef]


@dataclass(frozen=True)
class StratifiedReport:
    """Per-bin fairness reports plus the count of unbinnable nodes."""

    bins: dict[HomophilyBin, tuple[FairnessReport, int]]
    undefined_node_count: int
    k: int

    @property
    def n_evaluated(self) -> int:
        return sum(n for _, n in self.bins.values()) + self.undefined_node_count

    def metric(self, b: HomophilyBin, name: str) -> float | None:
        """One metric value in one bin; None when the bin is empty or
        the metric is UNDEFINED there."""
        if b not in self.bins:
            return None
        return getattr(self.bins[b][0], name)


def stratified_report(preds, attrs, profile: LocalHomophilyProfile, k: int,
                      eval_nodes=None) -> StratifiedReport:
    """FairnessReport per populated homophily bin at hop k.

    ``eval_nodes`` defaults to all nodes; pipelines evaluating held-out
    performance pass the test split here.
    """
    if eval_nodes is None:
        eval_nodes = np.arange(profile.n_nodes)
    binned, undefined = stratify(profile, k, eval_nodes)
    bins = {
        b: (fairness_report(preds, attrs.class_labels, attrs.sensitive, ids),
            int(ids.size))
        for b, ids in binned.items()
    }
    return StratifiedReport(bins=bins, undefined_node_count=int(undefined.size), k=k)


@dataclass(frozen=True)
class DesignComparison:
    """Heterophilous-mean minus homophilous-mean, per bin and metric.

    diff[bin][metric] is the signed difference (negative delta values
    mean the heterophilous family is fairer there); counts[bin][metric]
    records how many defined per-run values entered each side's mean.
    """

    diff: dict[HomophilyBin, dict[str, float | None]]
    counts: dict[HomophilyBin, dict[str, tuple[int, int]]]

    def defined_bins(self, metric: str) -> list[HomophilyBin]:
        return sorted(b for b, d in self.diff.items() if d[metric] is not None)


def _collect(reports: list[StratifiedReport], b: HomophilyBin,
             metric: str) -> list[float]:
    vals = []
    for rep in reports:
        v = rep.metric(b, metric)
        if v is not None:
            vals.append(v)
    return vals


def design_comparison(het_reports: list[StratifiedReport],
                      hom_reports: list[StratifiedReport]) -> DesignComparison:
    """Difference map between the two design families.

    UNDEFINED per-run entries are skipped (their exclusion is visible in
    the counts); a bin/metric difference exists only when both sides
    contribute at least one defined value.
    """
    if not het_reports or not hom_reports:
        raise ValueError("design_comparison needs reports from both families")
    all_bins: set[HomophilyBin] = set()
    for rep in het_reports + hom_reports:
        all_bins.update(rep.bins)
    diff: dict[HomophilyBin, dict[str, float | None]] = {}
    counts: dict[HomophilyBin, dict[str, tuple[int, int]]] = {}
    any_defined = False
    for b in sorted(all_bins):
        diff[b] = {}
        counts[b] = {}
        for metric in COMPARISON_METRICS:
            het_vals = _collect(het_reports, b, metric)
            hom_vals = _collect(hom_reports, b, metric)
            counts[b][metric] = (len(het_vals), len(hom_vals))
            if het_vals and hom_vals:
                diff[b][metric] = (sum(het_vals) / len(het_vals)
                                   - sum(hom_vals) / len(hom_vals))
                any_defined = True
            else:
                diff[b][metric] = None
    if not any_defined:
        raise ValueError("design_comparison: no bin has defined values "
                         "for both families")
    return DesignComparison(diff=diff, counts=counts)


def high_hs_slice(profile: LocalHomophilyProfile, preds, attrs,
                  threshold: float, k: int = 1,
                  eval_nodes=None) -> dict[int, tuple[FairnessReport, int]]:
    """Reports per class-homophily bin over nodes with local sensitive
    homophily strictly above ``threshold``.

    Nodes with UNDEFINED local homophily never pass the strict
    threshold and are excluded.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    if eval_nodes is None:
        eval_nodes = np.arange(profile.n_nodes)
    eval_idx = _as_index(eval_nodes, profile.n_nodes)
    sh = profile.values("sens", k)[eval_idx]
    with np.errstate(invalid="ignore"):
        keep = sh > threshold
    sliced = eval_idx[keep]
    if sliced.size == 0:
        raise ValueError(f"no nodes with local sensitive homophily > {threshold}")
    ch = profile.values("class", k)[sliced]
    cbins, _ = bin_indices(ch, BIN_WIDTH)
    out: dict[int, tuple[FairnessReport, int]] = {}
    for b in np.unique(cbins):
        ids = sliced[cbins == b]
        out[int(b)] = (
            fairness_report(preds, attrs.class_labels, attrs.sensitive, ids),
            int(ids.size))
    return out
