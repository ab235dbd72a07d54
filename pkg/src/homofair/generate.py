"""Synthetic attributed-graph generator with controllable homophily.

Nodes carry a binary class, a binary sensitive attribute (sampled
jointly), and Gaussian features whose means encode the sensitive
attribute with adjustable strength. Structure grows by preferential
attachment where the probability of attaching to an existing node is
proportional to the product of two compatibility matrices (one per
attribute channel) and the node's current degree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph

__all__ = [
    "GenerationError",
    "JointDistribution",
    "CompatibilityMatrix",
    "GeneratorConfig",
    "NodeAttributes",
    "sample_attributes",
    "generate_features",
    "build_compatibility",
    "attachment_weights",
    "generate",
]


class GenerationError(RuntimeError):
    """Raised when structure generation cannot proceed."""


@dataclass(frozen=True)
class JointDistribution:
    """Joint probability table over (class, sensitive), indexed [c][s]."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        if p.shape != (2, 2):
            raise ValueError(f"joint table must be 2x2, got shape {p.shape}")
        if (p < 0).any():
            raise ValueError("joint table entries must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"joint table must sum to 1, got {p.sum()!r}")
        object.__setattr__(self, "p", p)
        p.setflags(write=False)

    @classmethod
    def uniform(cls) -> "JointDistribution":
        return cls(np.full((2, 2), 0.25))

    @classmethod
    def skew3x(cls) -> "JointDistribution":
        """Uniform marginals, but each sensitive group is 3x as likely to
        carry one particular class (group 1 skews to class 1, group 0 to
        class 0)."""
        return cls(np.array([[0.375, 0.125], [0.125, 0.375]]))

    @classmethod
    def from_mode(cls, mode: str) -> "JointDistribution":
        if mode == "uniform":
            return cls.uniform()
        if mode == "skew3x":
            return cls.skew3x()
        raise ValueError(f"unknown joint mode {mode!r}, expected 'uniform' or 'skew3x'")


@dataclass(frozen=True)
class CompatibilityMatrix:
    """2x2 connection-propensity table with constant diagonal."""

    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.float64)
        if h.shape != (2, 2):
            raise ValueError(f"compatibility matrix must be 2x2, got shape {h.shape}")
        if h[0, 0] != h[1, 1] or h[0, 1] != h[1, 0] or h[0, 0] + h[0, 1] != 1.0:
            raise ValueError("compatibility matrix must be [[h, 1-h], [1-h, h]]")
        object.__setattr__(self, "h", h)
        h.setflags(write=False)

    @property
    def diag(self) -> float:
        return float(self.h[0, 0])


def build_compatibility(h_diag: float) -> CompatibilityMatrix:
    """Compatibility matrix [[h, 1-h], [1-h, h]] for homophily level h."""
    if not 0.0 <= h_diag <= 1.0:
        raise ValueError(f"homophily level must be in [0, 1], got {h_diag}")
    return CompatibilityMatrix(np.array([[h_diag, 1.0 - h_diag],
                                         [1.0 - h_diag, h_diag]]))


@dataclass(frozen=True)
class GeneratorConfig:
    """All knobs of one synthetic graph.

    ``feature_bias`` is the strength with which features encode the
    sensitive attribute: group means sit at +-feature_bias per dimension
    (signed mapping of s in {0, 1} to {-1, +1}), so 0 removes the
    attribute from the features entirely and 1 encodes it strongly.
    """

    n_nodes: int
    edges_per_node: int
    h_c: float
    h_s: float
    joint: JointDistribution = field(default_factory=JointDistribution.uniform)
    feature_bias: float = 1.0
    feature_dim: int = 2
    feature_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes <= self.edges_per_node + 1:
            raise ValueError(
                f"n_nodes={self.n_nodes} must exceed edges_per_node+1={self.edges_per_node + 1}")
        if self.edges_per_node < 1:
            raise ValueError("edges_per_node must be >= 1")
        for name in ("h_c", "h_s", "feature_bias"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.feature_std <= 0:
            raise ValueError("feature_std must be positive")

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "edges_per_node": self.edges_per_node,
            "h_c": self.h_c,
            "h_s": self.h_s,
            "joint": [list(row) for row in self.joint.p.tolist()],
            "feature_bias": self.feature_bias,
            "feature_dim": self.feature_dim,
            "feature_std": self.feature_std,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        d["joint"] = JointDistribution(np.asarray(d["joint"], dtype=np.float64))
        return cls(**d)


@dataclass(frozen=True)
class NodeAttributes:
    """Per-node class labels, sensitive attribute, and feature matrix."""

    class_labels: np.ndarray
    sensitive: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        n = self.class_labels.shape[0]
        if self.sensitive.shape != (n,) or self.features.shape[0] != n:
            raise ValueError("attribute arrays disagree on node count")
        for arr in (self.class_labels, self.sensitive, self.features):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.class_labels.shape[0]


def sample_attributes(joint: JointDistribution, n: int,
                      rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw n i.i.d. (class, sensitive) pairs from the joint table."""
    cum = np.cumsum(joint.p.reshape(-1))
    cum[-1] = 1.0
    cells = np.searchsorted(cum, rng.random(n), side="right")
    return (cells // 2).astype(np.int64), (cells % 2).astype(np.int64)


def generate_features(sensitive: np.ndarray, feature_bias: float, dim: int,
                      std: float, rng: np.random.Generator) -> np.ndarray:
    """Isotropic Gaussian features with per-dimension mean +-feature_bias.

    The sensitive attribute is mapped {0, 1} -> {-1, +1}, so the two
    group means are separated by 2 * feature_bias per dimension and
    feature_bias = 0 makes the groups indistinguishable.
    """
    signed = 2.0 * np.asarray(sensitive, dtype=np.float64) - 1.0
    means = feature_bias * signed
    return rng.normal(size=(sensitive.shape[0], dim)) * std + means[:, None]


def attachment_weights(existing: np.ndarray, u: int, attrs: NodeAttributes,
                       h_c: CompatibilityMatrix, h_s: CompatibilityMatrix,
                       degrees: np.ndarray) -> np.ndarray:
    """Attachment distribution of incoming node ``u`` over ``existing``.

    weight(v) = H_S[s_u, s_v] * H_C[c_u, c_v] * degree(v), normalized to
    sum to one. Raises ``GenerationError`` when every candidate has zero
    weight (possible only at homophily levels of exactly 0 or 1).
    """
    c_u = attrs.class_labels[u]
    s_u = attrs.sensitive[u]
    w = (h_s.h[s_u, attrs.sensitive[existing]]
         * h_c.h[c_u, attrs.class_labels[existing]]
         * degrees[existing])
    total = w.sum()
    if total <= 0.0:
        raise GenerationError(f"no compatible attachment target for incoming node {u}")
    return w / total


def generate(config: GeneratorConfig) -> tuple[Graph, NodeAttributes]:
    """Generate one attributed graph from a config, bit-reproducibly.

    Attributes for all nodes are sampled up front. Structure starts from
    a clique on the first edges_per_node + 1 nodes (so every candidate
    has positive degree) and each later node attaches to edges_per_node
    distinct targets drawn sequentially with renormalization; degrees
    seen by those draws are frozen until the node's insertion completes.
    """
    rng = np.random.default_rng(config.seed)
    n, m = config.n_nodes, config.edges_per_node
    class_labels, sensitive = sample_attributes(config.joint, n, rng)
    features = generate_features(sensitive, config.feature_bias,
                                 config.feature_dim, config.feature_std, rng)
    attrs = NodeAttributes(class_labels=class_labels, sensitive=sensitive,
                           features=features)
    hc = build_compatibility(config.h_c)
    hs = build_compatibility(config.h_s)

    first, second = np.triu_indices(m + 1, k=1)
    edges_u = [first.astype(np.int64)]
    edges_v = [second.astype(np.int64)]
    degrees = np.zeros(n, dtype=np.int64)
    degrees[:m + 1] = m

    for u in range(m + 1, n):
        w = (hs.h[sensitive[u], sensitive[:u]]
             * hc.h[class_labels[u], class_labels[:u]]
             * degrees[:u].astype(np.float64))
        if w.sum() <= 0.0:
            raise GenerationError(f"no compatible attachment target for incoming node {u}")
        targets = np.empty(m, dtype=np.int64)
        for j in range(m):
            cum = np.cumsum(w)
            if cum[-1] <= 0.0:
                raise GenerationError(
                    f"fewer than {m} compatible attachment targets for incoming node {u}")
            t = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
            t = min(t, u - 1)
            targets[j] = t
            w[t] = 0.0
        edges_u.append(np.full(m, u, dtype=np.int64))
        edges_v.append(targets)
        degrees[targets] += 1
        degrees[u] = m

    edges = np.stack([np.concatenate(edges_u), np.concatenate(edges_v)], axis=1)
    graph = Graph.from_edges(n, edges)
    return graph, attrs
