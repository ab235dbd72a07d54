"""Reverse-mode engine: primitives, losses, gradients, dropout masks."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

import homofair.autodiff as ad
import oracles
from homofair.autodiff import NonFiniteError, Tensor


def tensor(values, requires_grad=False):
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=requires_grad)


class TestForwardValues:
    def test_softmax_of_equal_logits_is_uniform(self):
        out = ad.softmax_rows(tensor([[0.0, 0.0]]))
        assert np.allclose(out.values, [[0.5, 0.5]], atol=1e-15)

    def test_softmax_rows_sum_to_one(self, rng):
        x = tensor(rng.normal(size=(40, 5)) * 300.0)
        out = ad.softmax_rows(x)
        assert np.abs(out.values.sum(axis=1) - 1.0).max() < 1e-12
        assert (out.values >= 0.0).all()

    def test_cross_entropy_of_even_odds_is_ln2(self):
        loss = ad.cross_entropy_masked(tensor([[0.0, 0.0]]),
                                       np.array([1]), np.array([True]))
        assert loss.item() == pytest.approx(np.log(2.0), abs=1e-12)

    def test_cross_entropy_of_confident_correct_is_near_zero(self):
        loss = ad.cross_entropy_masked(tensor([[30.0, -30.0]]),
                                       np.array([0]), np.array([True]))
        assert 0.0 <= loss.item() < 1e-12

    def test_cross_entropy_nonnegative(self, rng):
        logits = tensor(rng.normal(size=(25, 2)) * 5)
        labels = rng.integers(0, 2, size=25)
        mask = rng.random(25) < 0.6
        mask[0] = True
        assert ad.cross_entropy_masked(logits, labels, mask).item() >= 0.0

    def test_cross_entropy_mask_restricts_average(self):
        logits = tensor([[2.0, 0.0], [0.0, 0.0]])
        labels = np.array([0, 1])
        only_first = ad.cross_entropy_masked(logits, labels,
                                             np.array([True, False]))
        lz = np.log(np.exp(0.0) + np.exp(-2.0))
        assert only_first.item() == pytest.approx(lz, abs=1e-12)

    def test_relu(self):
        out = ad.relu(tensor([[-1.0, 2.0]]))
        assert out.values.tolist() == [[0.0, 2.0]]

    def test_spmm_matches_dense_product(self, rng):
        s = sp.random(7, 5, density=0.4, random_state=3, format="csr")
        x = tensor(rng.normal(size=(5, 3)))
        assert np.allclose(ad.spmm(s, x).values, s.toarray() @ x.values)

    def test_add_broadcasts_one_row_bias(self):
        out = ad.add(tensor([[1.0, 2.0], [3.0, 4.0]]), tensor([[10.0, 20.0]]))
        assert out.values.tolist() == [[11.0, 22.0], [13.0, 24.0]]

    def test_concat_cols(self):
        out = ad.concat_cols([tensor([[1.0], [2.0]]), tensor([[3.0], [4.0]])])
        assert out.values.tolist() == [[1.0, 3.0], [2.0, 4.0]]


class TestErrors:
    def test_matmul_shape_error_names_both_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\) @ \(2, 3\)"):
            ad.matmul(tensor(np.zeros((2, 3))), tensor(np.zeros((2, 3))))

    def test_add_shape_error_names_both_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 2\) \+ \(3, 2\)"):
            ad.add(tensor(np.zeros((2, 2))), tensor(np.zeros((3, 2))))

    def test_cross_entropy_shape_error(self):
        with pytest.raises(ValueError, match="logits .* labels"):
            ad.cross_entropy_masked(tensor(np.zeros((3, 2))),
                                    np.array([0, 1]), np.array([True] * 3))

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError, match="mask selects no nodes"):
            ad.cross_entropy_masked(tensor(np.zeros((3, 2))),
                                    np.array([0, 1, 0]), np.zeros(3, dtype=bool))

    def test_backward_before_forward_rejected(self):
        leaf = tensor([[1.0]], requires_grad=True)
        with pytest.raises(ValueError, match="before a forward"):
            ad.backward(leaf)

    def test_backward_needs_scalar(self):
        w = tensor(np.ones((2, 2)), requires_grad=True)
        y = ad.relu(w)
        with pytest.raises(ValueError, match="scalar"):
            ad.backward(y)

    def test_non_finite_values_rejected_at_boundary(self):
        with pytest.raises(NonFiniteError):
            tensor([[np.nan]])
        with pytest.raises(NonFiniteError):
            tensor([[np.inf, 0.0]])

    def test_tensors_are_matrices(self):
        with pytest.raises(ValueError, match="2-D"):
            Tensor(np.zeros(3))

    def test_bad_labels_rejected(self):
        with pytest.raises(ValueError, match=r"labels must lie in \[0, 2\)"):
            ad.cross_entropy_masked(tensor(np.zeros((2, 2))),
                                    np.array([0, 2]), np.array([True, True]))


class TestBackward:
    def test_sum_of_parameter_gives_all_ones(self):
        w = tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        ad.backward(ad.sum_all(w))
        assert np.array_equal(w.grad, np.ones((2, 3)))

    def test_reset_between_backwards_gives_identical_gradients(self, rng):
        w = tensor(rng.normal(size=(3, 2)), requires_grad=True)
        x = tensor(rng.normal(size=(4, 3)))
        labels = np.array([0, 1, 1, 0])
        mask = np.ones(4, dtype=bool)

        def run():
            ad.backward(ad.cross_entropy_masked(ad.matmul(x, w), labels, mask))
            g = w.grad.copy()
            w.reset_grad()
            return g

        assert np.array_equal(run(), run())

    def test_backward_without_reset_accumulates(self, rng):
        w = tensor(rng.normal(size=(3, 2)), requires_grad=True)
        x = tensor(rng.normal(size=(4, 3)))
        loss = ad.cross_entropy_masked(ad.matmul(x, w), np.array([0, 1, 1, 0]),
                                       np.ones(4, dtype=bool))
        ad.backward(loss)
        once = w.grad.copy()
        ad.backward(loss)
        assert np.allclose(w.grad, 2.0 * once)

    def test_shared_interior_node_not_double_counted(self, rng):
        # y feeds the loss twice; d/dw sum(y + y) = 2 * x^T 1.
        xv = rng.normal(size=(4, 3))
        w = tensor(rng.normal(size=(3, 2)), requires_grad=True)
        x = tensor(xv)
        y = ad.matmul(x, w)
        ad.backward(ad.sum_all(ad.add(y, y)))
        expect = 2.0 * xv.T @ np.ones((4, 2))
        assert np.allclose(w.grad, expect, atol=1e-12)

    def test_only_leaves_accumulate(self, rng):
        w = tensor(rng.normal(size=(2, 2)), requires_grad=True)
        y = ad.relu(w)
        ad.backward(ad.sum_all(y))
        assert y.grad is None
        assert w.grad is not None

    def test_constant_inputs_get_no_gradient(self, rng):
        x = tensor(rng.normal(size=(3, 2)))
        w = tensor(rng.normal(size=(2, 2)), requires_grad=True)
        ad.backward(ad.sum_all(ad.matmul(x, w)))
        assert x.grad is None


def finite_check(build_loss, param_arrays, tol=1e-4):
    """Compare backward() gradients of each named array against central
    finite differences of the rebuilt forward computation."""
    tensors = {name: Tensor(arr, requires_grad=True)
               for name, arr in param_arrays.items()}
    loss = build_loss(tensors)
    ad.backward(loss)
    for name, arr in param_arrays.items():
        def loss_value():
            fresh = {n: Tensor(a, requires_grad=False)
                     for n, a in param_arrays.items()}
            return build_loss(fresh).item()
        numeric = oracles.finite_diff_grad(loss_value, arr)
        rel = oracles.max_rel_err(tensors[name].grad, numeric)
        assert rel < tol, f"{name}: relative error {rel}"


class TestFiniteDifferences:
    def test_dense_mlp_chain(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(6, 4))
        labels = rng.integers(0, 2, size=6)
        mask = np.array([True, True, False, True, False, True])
        params = {"w0": rng.normal(size=(4, 5)), "b": rng.normal(size=(1, 5)),
                  "w1": rng.normal(size=(5, 2))}

        def build(t):
            h = ad.relu(ad.add(ad.matmul(Tensor(x), t["w0"]), t["b"]))
            return ad.cross_entropy_masked(ad.matmul(h, t["w1"]), labels, mask)

        finite_check(build, params)

    def test_sparse_propagation(self):
        rng = np.random.default_rng(8)
        s = sp.random(6, 6, density=0.5, random_state=1, format="csr")
        labels = rng.integers(0, 2, size=6)
        params = {"x": rng.normal(size=(6, 3)), "w": rng.normal(size=(3, 2))}

        def build(t):
            return ad.cross_entropy_masked(
                ad.spmm(s, ad.matmul(t["x"], t["w"])), labels,
                np.ones(6, dtype=bool))

        finite_check(build, params)

    def test_concat_branches(self):
        rng = np.random.default_rng(13)
        x = rng.normal(size=(5, 3))
        labels = rng.integers(0, 2, size=5)
        params = {"wa": rng.normal(size=(3, 2)), "wb": rng.normal(size=(3, 2)),
                  "wf": rng.normal(size=(4, 2))}

        def build(t):
            a = ad.matmul(Tensor(x), t["wa"])
            b = ad.relu(ad.matmul(Tensor(x), t["wb"]))
            return ad.cross_entropy_masked(
                ad.matmul(ad.concat_cols([a, b]), t["wf"]), labels,
                np.ones(5, dtype=bool))

        finite_check(build, params)

    def test_fixed_dropout_mask(self):
        rng = np.random.default_rng(21)
        mask = ad.make_dropout_mask((5, 3), 0.4, np.random.default_rng(2))
        labels = rng.integers(0, 2, size=5)
        params = {"x": rng.normal(size=(5, 3)), "w": rng.normal(size=(3, 2))}

        def build(t):
            return ad.cross_entropy_masked(
                ad.matmul(ad.dropout_mask_apply(t["x"], mask), t["w"]),
                labels, np.ones(5, dtype=bool))

        finite_check(build, params)

    def test_softmax_weighted_readout(self):
        rng = np.random.default_rng(34)
        x = rng.normal(size=(4, 3))
        c = rng.normal(size=(2, 1))
        params = {"w": rng.normal(size=(3, 2))}

        def build(t):
            p = ad.softmax_rows(ad.matmul(Tensor(x), t["w"]))
            return ad.sum_all(ad.matmul(p, Tensor(c)))

        finite_check(build, params)


class TestDropoutMask:
    def test_rate_zero_is_identity(self):
        mask = ad.make_dropout_mask((3, 4), 0.0, np.random.default_rng(0))
        assert np.array_equal(mask, np.ones((3, 4)))

    def test_values_are_zero_or_inverse_keep(self):
        mask = ad.make_dropout_mask((50, 50), 0.25, np.random.default_rng(1))
        assert set(np.unique(mask)) <= {0.0, 1.0 / 0.75}

    def test_expectation_preserved(self):
        mask = ad.make_dropout_mask((200, 200), 0.5, np.random.default_rng(2))
        assert abs(mask.mean() - 1.0) < 0.02

    def test_seeded_determinism(self):
        a = ad.make_dropout_mask((10, 10), 0.3, np.random.default_rng(9))
        b = ad.make_dropout_mask((10, 10), 0.3, np.random.default_rng(9))
        assert np.array_equal(a, b)

    def test_rate_validation(self):
        with pytest.raises(ValueError, match="dropout rate"):
            ad.make_dropout_mask((2, 2), 1.0, np.random.default_rng(0))


class TestDeterminism:
    def test_forward_and_gradients_bit_identical(self):
        def run():
            rng = np.random.default_rng(17)
            w = tensor(rng.normal(size=(4, 2)), requires_grad=True)
            x = tensor(rng.normal(size=(6, 4)))
            loss = ad.cross_entropy_masked(
                ad.relu(ad.matmul(x, w)), rng.integers(0, 2, size=6),
                np.ones(6, dtype=bool))
            ad.backward(loss)
            return loss.item(), w.grad.copy()

        l1, g1 = run()
        l2, g2 = run()
        assert l1 == l2
        assert np.array_equal(g1, g2)
