"""Shared test fixtures and graph builders."""

from __future__ import annotations

import numpy as np
import pytest

from homofair.graph import Graph


def random_edges(rng: np.random.Generator, n: int, p: float = 0.3) -> np.ndarray:
    """Erdos-Renyi edge list (u < v), re-drawn until at least one edge."""
    while True:
        mask = rng.random((n, n)) < p
        iu, iv = np.triu_indices(n, k=1)
        keep = mask[iu, iv]
        if keep.any():
            return np.stack([iu[keep], iv[keep]], axis=1).astype(np.int64)


def random_graph(rng: np.random.Generator, n: int, p: float = 0.3) -> Graph:
    return Graph.from_edges(n, random_edges(rng, n, p))


def path_graph(n: int) -> Graph:
    edges = np.array([[i, i + 1] for i in range(n - 1)], dtype=np.int64)
    return Graph.from_edges(n, edges)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)
