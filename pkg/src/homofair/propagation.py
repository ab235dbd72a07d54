"""Sparse propagation operators shared by the model forward passes."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .graph import Graph

__all__ = ["build_propagation_matrices"]


def _row_normalize(mat: sp.spmatrix) -> sp.csr_matrix:
    """Divide each row by its sum; rows that sum to 0 stay all-zero."""
    mat = mat.tocsr()
    row_sums = np.asarray(mat.sum(axis=1)).reshape(-1)
    inv = np.zeros_like(row_sums)
    nz = row_sums > 0
    inv[nz] = 1.0 / row_sums[nz]
    return (sp.diags(inv) @ mat).tocsr()


def build_propagation_matrices(g: Graph) -> dict[str, sp.csr_matrix]:
    """The three operators the model families aggregate with.

    sym_norm: D^{-1/2} (A + I) D^{-1/2} with self-loop-augmented degrees.
    row_norm_1hop: mean over direct neighbors (zero row for isolates).
    row_norm_2hop: mean over exact-distance-2 neighbors, excluding both
    the ego and its direct neighbors (zero row when the set is empty).
    """
    n = g.n_nodes
    a = g.adjacency().astype(np.float64)

    a_tilde = (a + sp.identity(n, format="csr")).tocsr()
    d_tilde = np.asarray(a_tilde.sum(axis=1)).reshape(-1)
    d_inv_sqrt = sp.diags(1.0 / np.sqrt(d_tilde))
    sym_norm = (d_inv_sqrt @ a_tilde @ d_inv_sqrt).tocsr()

    row_norm_1hop = _row_normalize(a)

    walk2 = (a @ a).tocsr()
    walk2.setdiag(0.0)
    walk2.eliminate_zeros()
    if walk2.nnz:
        reach2 = walk2.copy()
        reach2.data[:] = 1.0
        exact2 = (reach2 - reach2.multiply(a)).tocsr()
        exact2.eliminate_zeros()
    else:
        exact2 = walk2
    row_norm_2hop = _row_normalize(exact2)

    return {
        "sym_norm": sym_norm,
        "row_norm_1hop": row_norm_1hop,
        "row_norm_2hop": row_norm_2hop,
    }
