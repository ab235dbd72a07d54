"""Undirected graph storage and global/local homophily ratios.

Graphs are stored in compressed sparse form (offset vector plus one
concatenated, sorted neighbor array). A homophily ratio is the fraction
of edges whose endpoints agree on a binary node property; the local
variant restricts the edge set to the subgraph induced on all nodes
within ``k`` hops of an ego node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Graph",
    "LocalHomophilyProfile",
    "Histogram",
    "as_label_vector",
    "global_homophily",
    "khop_nodes",
    "khop_subgraph_edges",
    "local_homophily",
    "homophily_profile",
    "homophily_histogram",
    "bin_indices",
]

# Above this many (node, edge) pairs the dense profile path would
# allocate too much; fall back to the per-node sweep.
_DENSE_PROFILE_LIMIT = 3e7


def as_label_vector(values, n_nodes: int | None = None) -> np.ndarray:
    """Validate and return a binary label vector as an int64 array."""
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"label vector must be 1-D, got shape {arr.shape}")
    if n_nodes is not None and arr.shape[0] != n_nodes:
        raise ValueError(f"label vector has length {arr.shape[0]}, expected {n_nodes}")
    bad = (arr != 0) & (arr != 1)
    if bad.any():
        raise ValueError(f"label vector contains non-binary value {arr[bad][0]}")
    return arr


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph in compressed neighbor-list form.

    Attributes
    ----------
    n_nodes : int
    offsets : (n_nodes + 1,) int64 array; neighbors of node ``u`` are
        ``neighbor_ids[offsets[u]:offsets[u + 1]]``, sorted ascending.
    neighbor_ids : concatenated neighbor lists.
    degrees : (n_nodes,) int64 array of node degrees.
    """

    n_nodes: int
    offsets: np.ndarray
    neighbor_ids: np.ndarray
    degrees: np.ndarray

    def __post_init__(self):
        for arr in (self.offsets, self.neighbor_ids, self.degrees):
            arr.setflags(write=False)

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "Graph":
        """Build a graph from an iterable of undirected (u, v) pairs.

        Duplicate edges (in either orientation) collapse to a single
        stored edge. Self-loops are rejected.
        """
        edges = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                           dtype=np.int64)
        if edges.size == 0:
            edges = edges.reshape(0, 2)
        if edges.ndim != 2 or edges.shape[1] != 2:
            raise ValueError(f"edge array must have shape (m, 2), got {edges.shape}")
        if edges.size and (edges.min() < 0 or edges.max() >= n_nodes):
            raise ValueError("edge endpoint out of range")
        if edges.size and (edges[:, 0] == edges[:, 1]).any():
            loop = edges[edges[:, 0] == edges[:, 1]][0, 0]
            raise ValueError(f"self-loop at node {loop}")
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        canonical = np.unique(np.stack([lo, hi], axis=1), axis=0)
        src = np.concatenate([canonical[:, 0], canonical[:, 1]])
        dst = np.concatenate([canonical[:, 1], canonical[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        degrees = np.bincount(src, minlength=n_nodes).astype(np.int64)
        offsets = np.zeros(n_nodes + 1, dtype=np.int64)
        np.cumsum(degrees, out=offsets[1:])
        return cls(n_nodes=n_nodes, offsets=offsets, neighbor_ids=dst, degrees=degrees)

    def neighbors(self, u: int) -> np.ndarray:
        """Sorted neighbor ids of node ``u`` (shared, read-only view)."""
        return self.neighbor_ids[self.offsets[u]:self.offsets[u + 1]]

    @property
    def n_edges(self) -> int:
        return self.neighbor_ids.shape[0] // 2

    def edge_array(self) -> np.ndarray:
        """All edges as an (n_edges, 2) array with u < v, lexicographically sorted."""
        src = np.repeat(np.arange(self.n_nodes, dtype=np.int64), self.degrees)
        keep = src < self.neighbor_ids
        return np.stack([src[keep], self.neighbor_ids[keep]], axis=1)

    def adjacency(self) -> sp.csr_matrix:
        """Binary adjacency as a scipy CSR matrix."""
        data = np.ones(self.neighbor_ids.shape[0], dtype=np.float64)
        return sp.csr_matrix((data, self.neighbor_ids.copy(), self.offsets.copy()),
                             shape=(self.n_nodes, self.n_nodes))

    def check_invariants(self) -> None:
        """Raise if symmetry, sortedness, or degree bookkeeping is violated."""
        if self.offsets.shape != (self.n_nodes + 1,):
            raise AssertionError("offset vector has wrong length")
        if not np.array_equal(np.diff(self.offsets), self.degrees):
            raise AssertionError("degrees inconsistent with offsets")
        for u in range(self.n_nodes):
            nb = self.neighbors(u)
            if nb.size and (np.diff(nb) <= 0).any():
                raise AssertionError(f"neighbor list of {u} not strictly sorted")
            if (nb == u).any():
                raise AssertionError(f"self-loop at {u}")
        a = self.adjacency()
        if (a != a.T).nnz != 0:
            raise AssertionError("adjacency not symmetric")


def global_homophily(g: Graph, labels) -> float:
    """Fraction of edges whose endpoints share the label, each edge once.

    Raises ``ValueError`` on an edgeless graph (the ratio is undefined).
    """
    labels = as_label_vector(labels, g.n_nodes)
    if g.n_edges == 0:
        raise ValueError("global homophily is undefined on an edgeless graph")
    edges = g.edge_array()
    matches = int(np.count_nonzero(labels[edges[:, 0]] == labels[edges[:, 1]]))
    return matches / g.n_edges


def khop_nodes(g: Graph, u: int, k: int) -> np.ndarray:
    """Sorted ids of all nodes within distance <= k of ``u`` (including ``u``)."""
    _check_node_and_k(g, u, k)
    frontier = np.array([u], dtype=np.int64)
    seen = {u}
    for _ in range(k):
        nxt = []
        for a in frontier:
            for b in g.neighbors(a):
                if b not in seen:
                    seen.add(b)
                    nxt.append(b)
        if not nxt:
            break
        frontier = np.array(nxt, dtype=np.int64)
    return np.array(sorted(seen), dtype=np.int64)


def khop_subgraph_edges(g: Graph, u: int, k: int) -> list[tuple[int, int]]:
    """Edges of the subgraph induced on the k-hop neighborhood of ``u``.

    Returned as sorted (a, b) tuples with a < b. An isolated node yields
    an empty list.
    """
    nodes = khop_nodes(g, u, k)
    member = np.zeros(g.n_nodes, dtype=bool)
    member[nodes] = True
    out = []
    for a in nodes:
        nb = g.neighbors(a)
        for b in nb[(nb > a) & member[nb]]:
            out.append((int(a), int(b)))
    return out


def local_homophily(g: Graph, labels, u: int, k: int) -> float | None:
    """Homophily ratio over the k-hop induced subgraph of ``u``.

    Returns ``None`` when that subgraph has no edges (the ratio is
    undefined, which is a value here rather than an error).
    """
    labels = as_label_vector(labels, g.n_nodes)
    edges = khop_subgraph_edges(g, u, k)
    if not edges:
        return None
    matches = sum(1 for a, b in edges if labels[a] == labels[b])
    return matches / len(edges)


@dataclass(frozen=True)
class LocalHomophilyProfile:
    """Per-node local homophily ratios for k in {1, 2} and both channels.

    Arrays hold NaN exactly where the k-hop induced subgraph around the
    node has no edges.
    """

    class_hom: dict[int, np.ndarray]
    sens_hom: dict[int, np.ndarray]

    @property
    def n_nodes(self) -> int:
        return self.class_hom[1].shape[0]

    def values(self, which: str, k: int) -> np.ndarray:
        if which == "class":
            return self.class_hom[k]
        if which == "sens":
            return self.sens_hom[k]
        raise ValueError(f"unknown channel {which!r}, expected 'class' or 'sens'")


def homophily_profile(g: Graph, class_labels, sens_labels,
                      ks: tuple[int, ...] = (1, 2)) -> LocalHomophilyProfile:
    """Local class and sensitive-attribute homophily for every node.

    Equals pointwise :func:`local_homophily` calls; computed with a
    vectorized reachability pass on small graphs and a per-node sweep
    otherwise.
    """
    class_labels = as_label_vector(class_labels, g.n_nodes)
    sens_labels = as_label_vector(sens_labels, g.n_nodes)
    for k in ks:
        if k not in (1, 2):
            raise ValueError(f"k must be 1 or 2, got {k}")
    dense_ok = g.n_edges > 0 and g.n_nodes * g.n_edges <= _DENSE_PROFILE_LIMIT
    class_hom, sens_hom = {}, {}
    for k in ks:
        if dense_ok:
            c, s = _profile_dense(g, class_labels, sens_labels, k)
        else:
            c, s = _profile_sweep(g, class_labels, sens_labels, k)
        class_hom[k], sens_hom[k] = c, s
    return LocalHomophilyProfile(class_hom=class_hom, sens_hom=sens_hom)


def _profile_dense(g, class_labels, sens_labels, k):
    # reach[u, v] is True iff dist(u, v) <= k; an edge (a, b) belongs to
    # u's k-hop subgraph iff both endpoints are reachable.
    a = g.adjacency().astype(bool)
    reach = (a + sp.identity(g.n_nodes, dtype=bool, format="csr"))
    if k == 2:
        reach = (reach @ reach).astype(bool)
    dense = reach.toarray()
    edges = g.edge_array()
    both = dense[:, edges[:, 0]] & dense[:, edges[:, 1]]
    denom = both.sum(axis=1)
    cmatch = class_labels[edges[:, 0]] == class_labels[edges[:, 1]]
    smatch = sens_labels[edges[:, 0]] == sens_labels[edges[:, 1]]
    with np.errstate(invalid="ignore"):
        c = np.where(denom > 0, both[:, cmatch].sum(axis=1) / denom, np.nan)
        s = np.where(denom > 0, both[:, smatch].sum(axis=1) / denom, np.nan)
    return c, s


def _profile_sweep(g, class_labels, sens_labels, k):
    c = np.full(g.n_nodes, np.nan)
    s = np.full(g.n_nodes, np.nan)
    mark = np.full(g.n_nodes, -1, dtype=np.int64)
    for u in range(g.n_nodes):
        members = [u]
        mark[u] = u
        frontier = [u]
        for _ in range(k):
            nxt = []
            for node in frontier:
                nb = g.neighbors(node)
                fresh = nb[mark[nb] != u]
                mark[fresh] = u
                nxt.extend(fresh.tolist())
            members.extend(nxt)
            frontier = nxt
        total = 0
        cmatch = 0
        smatch = 0
        for node in members:
            nb = g.neighbors(node)
            inside = nb[(nb > node) & (mark[nb] == u)]
            total += inside.size
            cmatch += int(np.count_nonzero(class_labels[inside] == class_labels[node]))
            smatch += int(np.count_nonzero(sens_labels[inside] == sens_labels[node]))
        if total:
            c[u] = cmatch / total
            s[u] = smatch / total
    return c, s


@dataclass(frozen=True)
class Histogram:
    """Binned counts of defined local homophily values.

    ``counts[i]`` covers ``[edges[i], edges[i + 1])``; the top bin is
    closed so a ratio of exactly 1.0 lands in it. Nodes whose local
    ratio is undefined are tallied in ``undefined_count``, so bin counts
    plus ``undefined_count`` always equal the node count.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    undefined_count: int


def bin_indices(values: np.ndarray, bin_width: float) -> tuple[np.ndarray, int]:
    """Map values in [0, 1] to bin indices of the given width.

    Returns (indices, n_bins). The small epsilon counters float error in
    the division so that exact bin-edge ratios (e.g. 3/5 with width 0.2)
    land in their mathematical bin; the top bin is closed at 1.0.
    """
    if not 0.0 < bin_width <= 1.0:
        raise ValueError(f"bin width must be in (0, 1], got {bin_width}")
    n_bins = int(np.ceil(round(1.0 / bin_width, 9)))
    idx = np.floor(values / bin_width + 1e-9).astype(np.int64)
    return np.minimum(idx, n_bins - 1), n_bins


def homophily_histogram(profile: LocalHomophilyProfile, which: str, k: int,
                        bin_width: float) -> Histogram:
    """Histogram of one channel of a profile at one hop radius."""
    values = profile.values(which, k)
    defined = values[~np.isnan(values)]
    idx, n_bins = bin_indices(defined, bin_width)
    counts = np.bincount(idx, minlength=n_bins).astype(np.int64)
    edges = np.minimum(np.arange(n_bins + 1) * bin_width, 1.0)
    edges[-1] = 1.0
    return Histogram(bin_edges=edges, counts=counts,
                     undefined_count=int(values.shape[0] - defined.shape[0]))


def _check_node_and_k(g: Graph, u: int, k: int) -> None:
    if not 0 <= u < g.n_nodes:
        raise ValueError(f"node id {u} out of range for graph with {g.n_nodes} nodes")
    if k < 1:
        raise ValueError(f"hop radius must be >= 1, got {k}")
