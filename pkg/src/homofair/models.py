"""The four model architectures, split management, and training.

Two design families: GCN and SGC average the ego node together with its
neighbors through the symmetric-normalized adjacency; SAGE and H2GCN
keep the ego representation in its own branch (concatenation), with
H2GCN additionally aggregating the exact-1-hop and exact-2-hop rings
separately. All training is full batch on float64 tensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graph import Graph
from .generate import NodeAttributes
from .metrics import f1_from_arrays
from .optim import OptimizerState, optimizer_step
from .propagation import build_propagation_matrices
from .seeding import derive_seed

__all__ = [
    "MODEL_NAMES",
    "FAMILY_MODELS",
    "family_of",
    "ModelConfig",
    "SplitMasks",
    "Predictions",
    "DivergenceError",
    "RunError",
    "make_splits",
    "init_params",
    "forward",
    "FitResult",
    "fit",
    "train",
    "run_design_family",
    "save_params",
    "load_params",
]

MODEL_NAMES = ("GCN", "SGC", "SAGE", "H2GCN")
FAMILY_MODELS = {
    "homophilous": ("GCN", "SGC"),
    "heterophilous": ("SAGE", "H2GCN"),
}

# Parameter tensors per model, in fixed init/update order.
_PARAM_KEYS = {
    "GCN": ("w0", "w1"),
    "SGC": ("w",),
    "SAGE": ("w0", "w1", "w_head"),
    "H2GCN": ("w_embed", "w_final"),
}

_DEFAULT_DROPOUT = {"GCN": 0.5, "SGC": 0.0, "SAGE": 0.5, "H2GCN": 0.5}

N_CLASSES = 2


def family_of(model: str) -> str:
    for fam, members in FAMILY_MODELS.items():
        if model in members:
            return fam
    raise ValueError(f"unknown model {model!r}, expected one of {MODEL_NAMES}")


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, epoch: int, detail: str):
        self.epoch = epoch
        super().__init__(f"training diverged at epoch {epoch}: {detail}")


class RunError(RuntimeError):
    """A (model, run) cell failed; carries which one."""

    def __init__(self, model: str, run_index: int, cause: Exception):
        self.model = model
        self.run_index = run_index
        super().__init__(f"model {model} run {run_index} failed: {cause}")


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters of one training run.

    ``dropout=None`` picks the per-model default (0.5, except 0 for
    SGC, which has no interior nonlinearity to regularize).
    """

    family: str
    hidden_dim: int = 16
    depth: int = 2
    dropout: float | None = None
    lr: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.family not in MODEL_NAMES:
            raise ValueError(f"unknown model {self.family!r}, expected one of {MODEL_NAMES}")
        if self.dropout is None:
            object.__setattr__(self, "dropout", _DEFAULT_DROPOUT[self.family])
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.family == "SGC":
            if self.depth < 1:
                raise ValueError("SGC depth must be >= 1")
        elif self.depth != 2:
            raise ValueError(f"{self.family} is a fixed 2-hop architecture, got depth {self.depth}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass(frozen=True)
class SplitMasks:
    """Disjoint boolean train/val/test masks covering all nodes."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        n = self.train.shape[0]
        if self.val.shape != (n,) or self.test.shape != (n,):
            raise ValueError("split masks disagree on node count")
        total = (self.train.astype(int) + self.val.astype(int)
                 + self.test.astype(int))
        if not (total == 1).all():
            raise ValueError("split masks must partition the node set")
        for arr in (self.train, self.val, self.test):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.train.shape[0]

    def names(self) -> np.ndarray:
        """Per-node split name, for export."""
        out = np.where(self.train, "train", np.where(self.val, "val", "test"))
        return out.astype(object)


def make_splits(n: int, seed: int) -> SplitMasks:
    """Uniform random 50/25/25 partition, deterministic in the seed."""
    if n < 4:
        raise ValueError(f"need at least 4 nodes to split, got {n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = round(0.5 * n)
    n_val = round(0.25 * n)
    masks = []
    for ids in (perm[:n_train], perm[n_train:n_train + n_val],
                perm[n_train + n_val:]):
        m = np.zeros(n, dtype=bool)
        m[ids] = True
        masks.append(m)
    return SplitMasks(train=masks[0], val=masks[1], test=masks[2])


@dataclass(frozen=True)
class Predictions:
    """Hard and soft predictions over all nodes; class 1 at prob >= 0.5."""

    predicted_class: np.ndarray
    prob_class1: np.ndarray

    def __post_init__(self):
        if self.predicted_class.shape != self.prob_class1.shape:
            raise ValueError("prediction arrays disagree on node count")
        if ((self.prob_class1 < 0) | (self.prob_class1 > 1)).any():
            raise ValueError("prob_class1 must lie in [0, 1]")
        if not (self.predicted_class == (self.prob_class1 >= 0.5)).all():
            raise ValueError("predicted_class must be 1 exactly when prob_class1 >= 0.5")
        for arr in (self.predicted_class, self.prob_class1):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.predicted_class.shape[0]


def _predictions_from_probs(prob1: np.ndarray) -> Predictions:
    return Predictions(predicted_class=(prob1 >= 0.5).astype(np.int64),
                       prob_class1=prob1)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> ad.Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    vals = rng.uniform(-limit, limit, size=(fan_in, fan_out))
    return ad.Tensor(vals, requires_grad=True)


def init_params(family: str, in_dim: int, hidden_dim: int,
                seed: int) -> dict[str, ad.Tensor]:
    """Glorot-uniform parameter tensors for one model, seeded."""
    rng = np.random.default_rng(seed)
    h = hidden_dim
    if family == "GCN":
        return {"w0": _glorot(rng, in_dim, h), "w1": _glorot(rng, h, N_CLASSES)}
    if family == "SGC":
        return {"w": _glorot(rng, in_dim, N_CLASSES)}
    if family == "SAGE":
        return {"w0": _glorot(rng, 2 * in_dim, h),
                "w1": _glorot(rng, 2 * h, h),
                "w_head": _glorot(rng, h, N_CLASSES)}
    if family == "H2GCN":
        return {"w_embed": _glorot(rng, in_dim, h),
                "w_final": _glorot(rng, 3 * h, N_CLASSES)}
    raise ValueError(f"unknown model {family!r}, expected one of {MODEL_NAMES}")


def forward(family: str, params: dict[str, ad.Tensor], features,
            operators: dict, *, depth: int = 2, dropout: float = 0.0,
            dropout_rng: np.random.Generator | None = None,
            training: bool = False) -> ad.Tensor:
    """Logits (n x 2) for one model on full-graph features.

    Dropout masks are drawn from ``dropout_rng`` only when training;
    evaluation passes are deterministic functions of the parameters.
    """
    missing = [k for k in _PARAM_KEYS.get(family, ()) if k not in params]
    if family not in _PARAM_KEYS:
        raise ValueError(f"unknown model {family!r}, expected one of {MODEL_NAMES}")
    if missing:
        raise ValueError(f"{family} params not initialized: missing {missing}; "
                         "build them with init_params")
    x = features if isinstance(features, ad.Tensor) else ad.Tensor(features)

    use_dropout = training and dropout > 0.0
    if use_dropout and dropout_rng is None:
        raise ValueError("training with dropout > 0 needs a dropout_rng")

    def drop(t: ad.Tensor) -> ad.Tensor:
        if not use_dropout:
            return t
        return ad.dropout_mask_apply(
            t, ad.make_dropout_mask(t.shape, dropout, dropout_rng))

    if family == "GCN":
        sym = operators["sym_norm"]
        h1 = ad.relu(ad.spmm(sym, ad.matmul(drop(x), params["w0"])))
        return ad.spmm(sym, ad.matmul(drop(h1), params["w1"]))

    if family == "SGC":
        sym = operators["sym_norm"]
        z = drop(x)
        for _ in range(depth):
            z = ad.spmm(sym, z)
        return ad.matmul(z, params["w"])

    if family == "SAGE":
        p1 = operators["row_norm_1hop"]
        h = drop(x)
        h = ad.relu(ad.matmul(ad.concat_cols([h, ad.spmm(p1, h)]), params["w0"]))
        h = drop(h)
        h = ad.relu(ad.matmul(ad.concat_cols([h, ad.spmm(p1, h)]), params["w1"]))
        return ad.matmul(h, params["w_head"])

    # H2GCN: embed, then aggregate ego / exact-1-hop / exact-2-hop rings
    # in separate concatenated branches.
    p1 = operators["row_norm_1hop"]
    p2 = operators["row_norm_2hop"]
    h0 = ad.relu(ad.matmul(drop(x), params["w_embed"]))
    r = ad.concat_cols([h0, ad.spmm(p1, h0), ad.spmm(p2, h0)])
    return ad.matmul(drop(r), params["w_final"])


@dataclass(frozen=True)
class FitResult:
    """Everything one training run produced."""

    predictions: Predictions
    trace: list[tuple[int, float, float]]
    best_epoch: int
    best_val_f1: float
    params: dict[str, np.ndarray]


def fit(g: Graph, attrs: NodeAttributes, splits: SplitMasks,
        cfg: ModelConfig) -> FitResult:
    """Full-batch training with best-validation-F1 snapshotting.

    The returned predictions come from the epoch whose validation F1
    was highest (earliest such epoch on ties), evaluated over all
    nodes without dropout. The trace rows are (epoch, train loss,
    val F1). Non-finite losses or gradients raise DivergenceError.
    """
    labels = attrs.class_labels
    if attrs.n_nodes != g.n_nodes or splits.n_nodes != g.n_nodes:
        raise ValueError("graph, attributes, and splits disagree on node count")
    operators = build_propagation_matrices(g)
    x = ad.Tensor(attrs.features)
    params = init_params(cfg.family, x.shape[1], cfg.hidden_dim,
                         derive_seed(cfg.seed, "init"))
    plist = [params[k] for k in _PARAM_KEYS[cfg.family]]
    state = OptimizerState.for_params(plist, cfg.lr, cfg.weight_decay)
    drng = np.random.default_rng(derive_seed(cfg.seed, "dropout"))

    trace: list[tuple[int, float, float]] = []
    best_val = -1.0
    best_epoch = 0
    best_prob1: np.ndarray | None = None
    best_params: dict[str, np.ndarray] = {}
    val_idx = np.flatnonzero(splits.val)

    for epoch in range(1, cfg.epochs + 1):
        try:
            logits = forward(cfg.family, params, x, operators, depth=cfg.depth,
                             dropout=cfg.dropout, dropout_rng=drng, training=True)
            loss = ad.cross_entropy_masked(logits, labels, splits.train)
            for p in plist:
                p.reset_grad()
            ad.backward(loss)
            optimizer_step(plist, [p.grad for p in plist], state)

            eval_logits = forward(cfg.family, params, x, operators,
                                  depth=cfg.depth, training=False)
        except ad.NonFiniteError as e:
            raise DivergenceError(epoch, str(e)) from e
        prob1 = ad.softmax_values(eval_logits.values)[:, 1]
        val_f1 = f1_from_arrays((prob1[val_idx] >= 0.5).astype(np.int64),
                                labels[val_idx])
        trace.append((epoch, loss.item(), val_f1))
        if val_f1 > best_val:
            best_val = val_f1
            best_epoch = epoch
            best_prob1 = prob1
            best_params = {k: params[k].values.copy() for k in _PARAM_KEYS[cfg.family]}

    return FitResult(predictions=_predictions_from_probs(best_prob1),
                     trace=trace, best_epoch=best_epoch, best_val_f1=best_val,
                     params=best_params)


def train(g: Graph, attrs: NodeAttributes, splits: SplitMasks,
          cfg: ModelConfig) -> tuple[Predictions, list[tuple[int, float, float]]]:
    """Train one model; returns (predictions, per-epoch trace)."""
    result = fit(g, attrs, splits, cfg)
    return result.predictions, result.trace


def run_design_family(g: Graph, attrs: NodeAttributes, splits: SplitMasks,
                      family_set: str, runs: int,
                      base_seed: int) -> list[Predictions]:
    """All (model, run) predictions for one design family.

    Ordered model-major: every run of the family's first model, then of
    the second. Seeds derive from (base_seed, model, run index), so any
    single cell can be reproduced in isolation.
    """
    if family_set not in FAMILY_MODELS:
        raise ValueError(f"unknown family {family_set!r}, expected one of "
                         f"{sorted(FAMILY_MODELS)}")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    out: list[Predictions] = []
    for model in FAMILY_MODELS[family_set]:
        for run_index in range(runs):
            cfg = ModelConfig(family=model,
                              seed=derive_seed(base_seed, model, run_index))
            try:
                preds, _ = train(g, attrs, splits, cfg)
            except Exception as e:
                raise RunError(model, run_index, e) from e
            out.append(preds)
    return out


def save_params(path, family: str, params: dict[str, np.ndarray]) -> None:
    """Write one model's parameter arrays to an .npz blob."""
    np.savez(path, family=np.array(family), **params)


def load_params(path) -> tuple[str, dict[str, ad.Tensor]]:
    """Read parameters saved by save_params, as trainable tensors."""
    blob = np.load(path, allow_pickle=False)
    family = str(blob["family"])
    keys = _PARAM_KEYS.get(family)
    if keys is None:
        raise ValueError(f"unknown model {family!r} in parameter file {path}")
    missing = [k for k in keys if k not in blob]
    if missing:
        raise ValueError(f"parameter file {path} missing arrays {missing}")
    return family, {k: ad.Tensor(blob[k], requires_grad=True) for k in keys}
