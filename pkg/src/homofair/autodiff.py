"""Minimal reverse-mode autodiff over dense 64-bit matrices.

Every value is a 2-D float64 matrix wrapped in a Tensor. Operations
build a computation graph eagerly; backward(loss) walks it in reverse
topological order and accumulates gradients into parameter tensors.
Only the handful of primitives the four model families need exist:
matmul, spmm (constant sparse times dense), add, relu, dropout masks,
column concatenation, row softmax, and masked cross entropy.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

__all__ = [
    "NonFiniteError",
    "Tensor",
    "matmul",
    "spmm",
    "add",
    "relu",
    "dropout_mask_apply",
    "make_dropout_mask",
    "concat_cols",
    "softmax_rows",
    "softmax_values",
    "cross_entropy_masked",
    "sum_all",
    "backward",
]


class NonFiniteError(FloatingPointError):
    """A primitive produced or received NaN/Inf values."""


def _check_finite(values: np.ndarray, op: str) -> None:
    if not np.isfinite(values).all():
        raise NonFiniteError(f"non-finite values at boundary of op {op!r}")


class Tensor:
    """A 2-D float64 matrix, optionally tracked for gradients.

    Parameter tensors (requires_grad=True leaves) keep a ``grad``
    accumulator that sums across backward passes until ``reset_grad``.
    Tensors created by primitives remember their parents and how to
    push incoming gradients back to them; those interior gradients are
    recomputed fresh on every backward pass and never stored.
    """

    __slots__ = ("values", "requires_grad", "grad", "_parents", "_backward", "_op")

    def __init__(self, values, requires_grad: bool = False, *,
                 _parents: tuple = (), _backward=None, _op: str = "leaf"):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"tensors are 2-D matrices, got shape {values.shape}")
        _check_finite(values, _op)
        self.values = values
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._backward = _backward
        self._op = _op

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def item(self) -> float:
        if self.values.size != 1:
            raise ValueError(f"item() needs a 1-element tensor, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += g

    def reset_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op!r}, requires_grad={self.requires_grad})"


def _result(values: np.ndarray, parents: tuple, backward_fn, op: str) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    return Tensor(values, requires_grad=needs,
                  _parents=parents if needs else (),
                  _backward=backward_fn if needs else None, _op=op)


def _stage(flow: dict, t: Tensor, g: np.ndarray) -> None:
    """Add a gradient contribution for tensor ``t`` to the in-flight map."""
    if not t.requires_grad:
        return
    key = id(t)
    if key in flow:
        flow[key] = flow[key] + g
    else:
        flow[key] = g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out_vals = a.values @ b.values

    def push(g: np.ndarray, flow: dict) -> None:
        _stage(flow, a, g @ b.values.T)
        _stage(flow, b, a.values.T @ g)

    return _result(out_vals, (a, b), push, "matmul")


def spmm(s: sp.spmatrix, x: Tensor) -> Tensor:
    """Product of a constant sparse matrix and a dense tensor."""
    if s.shape[1] != x.shape[0]:
        raise ValueError(f"spmm shape mismatch: {s.shape} @ {x.shape}")
    s = s.tocsr()
    out_vals = s @ x.values
    s_t = s.T  # CSC view, no conversion cost per call

    def push(g: np.ndarray, flow: dict) -> None:
        _stage(flow, x, np.asarray(s_t @ g))

    return _result(np.asarray(out_vals), (x,), push, "spmm")


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may be a 1-row bias broadcast over rows."""
    if a.shape != b.shape and b.shape != (1, a.shape[1]):
        raise ValueError(f"add shape mismatch: {a.shape} + {b.shape}")
    out_vals = a.values + b.values

    def push(g: np.ndarray, flow: dict) -> None:
        _stage(flow, a, g)
        _stage(flow, b, g if b.shape == a.shape else g.sum(axis=0, keepdims=True))

    return _result(out_vals, (a, b), push, "add")


def relu(x: Tensor) -> Tensor:
    out_vals = np.maximum(x.values, 0.0)

    def push(g: np.ndarray, flow: dict) -> None:
        _stage(flow, x, g * (x.values > 0.0))

    return _result(out_vals, (x,), push, "relu")


def make_dropout_mask(shape: tuple[int, int], rate: float,
                      rng: np.random.Generator) -> np.ndarray:
    """Seeded inverted-dropout mask: zeros with probability rate, kept
    entries scaled by 1/(1-rate) so expectations are preserved."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def dropout_mask_apply(x: Tensor, mask: np.ndarray) -> Tensor:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != x.shape:
        raise ValueError(f"dropout mask shape mismatch: {x.shape} vs {mask.shape}")
    out_vals = x.values * mask

    def push(g: np.ndarray, flow: dict) -> None:
        _stage(flow, x, g * mask)

    return _result(out_vals, (x,), push, "dropout_mask_apply")


def concat_cols(tensors: list[Tensor]) -> Tensor:
    if not tensors:
        raise ValueError("concat_cols needs at least one tensor")
    rows = tensors[0].shape[0]
    for t in tensors[1:]:
        if t.shape[0] != rows:
            raise ValueError(
                f"concat_cols row mismatch: {tensors[0].shape} vs {t.shape}")
    out_vals = np.concatenate([t.values for t in tensors], axis=1)
    offsets = np.cumsum([0] + [t.shape[1] for t in tensors])

    def push(g: np.ndarray, flow: dict) -> None:
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            _stage(flow, t, g[:, lo:hi])

    return _result(out_vals, tuple(tensors), push, "concat_cols")


def softmax_values(values: np.ndarray) -> np.ndarray:
    """Row softmax of a plain array (no graph tracking)."""
    shifted = values - values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows(x: Tensor) -> Tensor:
    p = softmax_values(x.values)

    def push(g: np.ndarray, flow: dict) -> None:
        inner = (g * p).sum(axis=1, keepdims=True)
        _stage(flow, x, p * (g - inner))

    return _result(p, (x,), push, "softmax_rows")


def cross_entropy_masked(logits: Tensor, labels: np.ndarray,
                         mask: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of ``labels`` over masked rows.

    Computed via a shifted log-sum-exp so large logits stay finite.
    """
    labels = np.asarray(labels)
    mask = np.asarray(mask, dtype=bool)
    n, k = logits.shape
    if labels.shape != (n,) or mask.shape != (n,):
        raise ValueError(
            f"cross_entropy_masked shape mismatch: logits {logits.shape}, "
            f"labels {labels.shape}, mask {mask.shape}")
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ValueError("cross_entropy_masked: mask selects no nodes")
    sel = logits.values[idx]
    sel_labels = labels[idx]
    if (sel_labels < 0).any() or (sel_labels >= k).any():
        raise ValueError(f"labels must lie in [0, {k}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    shifted = sel - sel.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    loss = -log_p[np.arange(idx.size), sel_labels].mean()

    def push(g: np.ndarray, flow: dict) -> None:
        scale = float(g.reshape(-1)[0]) / idx.size
        d_sel = np.exp(log_p)
        d_sel[np.arange(idx.size), sel_labels] -= 1.0
        d = np.zeros_like(logits.values)
        d[idx] = d_sel * scale
        _stage(flow, logits, d)

    return _result(np.array([[loss]]), (logits,), push, "cross_entropy_masked")


def sum_all(x: Tensor) -> Tensor:
    out_vals = np.array([[x.values.sum()]])

    def push(g: np.ndarray, flow: dict) -> None:
        _stage(flow, x, np.full_like(x.values, float(g.reshape(-1)[0])))

    return _result(out_vals, (x,), push, "sum_all")


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(parameter) into every parameter's grad.

    Interior gradients flow through a per-call map, so repeated calls
    without reset_grad add up on the parameter leaves exactly, never
    double-counting shared interior nodes. The loss must be a scalar
    produced by a forward computation, not a bare leaf.
    """
    if loss.values.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._backward is None:
        raise ValueError(
            "backward called before a forward computation produced this value")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    flow: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    for node in reversed(topo):
        g = flow.pop(id(node), None)
        if g is None:
            continue
        _check_finite(g, node._op)
        if node._backward is not None:
            node._backward(g, flow)
        elif node.requires_grad:
            node.accumulate_grad(g)
