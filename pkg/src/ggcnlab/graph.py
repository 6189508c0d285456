"""Undirected simple graphs, adjacency normalization, and the node statistics
(homophily, relative degree) the propagation theory is phrased in.

All types are immutable after construction; operations are pure functions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRangeError, IsolatedNodeError, SelfLoopError

RENORMALIZED = "renormalized"
ROW_NORMALIZED = "row"
SCHEMES = (RENORMALIZED, ROW_NORMALIZED)


@dataclass(frozen=True)
class Graph:
    """Symmetric simple graph in CSR form.

    Attributes
    ----------
    n : int
        Node count.
    edges : ndarray, shape (m, 2)
        Unique undirected edges with u < v, lexicographically sorted.
    degrees : ndarray, shape (n,)
    indptr, indices : ndarray
        CSR structure of the symmetric adjacency; neighbor lists sorted.
    src, dst : ndarray, shape (2m,)
        Directed-edge expansion of the CSR rows: entry k is the message edge
        src[k] -> dst[k], i.e. dst[k] owns CSR row containing src[k].
    """

    n: int
    edges: np.ndarray
    degrees: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    src: np.ndarray
    dst: np.ndarray

    @property
    def n_edges(self):
        return self.edges.shape[0]

    def neighbors(self, i):
        return self.indices[self.indptr[i]:self.indptr[i + 1]]


def _freeze(a):
    a.flags.writeable = False
    return a


def build_graph(edge_list, n):
    """Build a deduplicated symmetric simple graph from a pair list.

    Duplicates and both orientations collapse to one undirected edge.
    Self-loops and out-of-range endpoints are rejected.
    """
    pairs = np.asarray(list(edge_list), dtype=np.int64)
    if pairs.size == 0:
        pairs = pairs.reshape(0, 2)
    for u, v in pairs:
        if not (0 <= u < n):
            raise IndexOutOfRangeError(int(u), n)
        if not (0 <= v < n):
            raise IndexOutOfRangeError(int(v), n)
        if u == v:
            raise SelfLoopError(int(u))
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    edges = np.unique(np.stack([lo, hi], axis=1), axis=0) if len(pairs) else pairs

    m = edges.shape[0]
    both_src = np.concatenate([edges[:, 0], edges[:, 1]])
    both_dst = np.concatenate([edges[:, 1], edges[:, 0]])
    degrees = np.bincount(both_src, minlength=n).astype(np.int64)

    order = np.lexsort((both_src, both_dst))  # group by owner row, sorted nbrs
    dst = both_dst[order]
    src = both_src[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degrees, out=indptr[1:])
    indices = src.copy()

    return Graph(
        n=n,
        edges=_freeze(edges),
        degrees=_freeze(degrees),
        indptr=_freeze(indptr),
        indices=_freeze(indices),
        src=_freeze(src),
        dst=_freeze(dst),
    )


@dataclass(frozen=True)
class NormalizedAdjacency:
    scheme: str
    matrix: np.ndarray


def normalize(g, scheme=RENORMALIZED):
    """Dense normalized adjacency of I + A.

    renormalized: D^{-1/2} (I+A) D^{-1/2} with D the degree matrix of I+A,
    so edge (i,j) carries 1/sqrt((d_i+1)(d_j+1)) and the diagonal 1/(d_i+1).
    row: each row of I+A divided by its sum d_i+1.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    a = np.zeros((g.n, g.n), dtype=np.float64)
    dp1 = g.degrees.astype(np.float64) + 1.0
    if scheme == RENORMALIZED:
        inv_sqrt = 1.0 / np.sqrt(dp1)
        a[g.dst, g.src] = inv_sqrt[g.dst] * inv_sqrt[g.src]
        a[np.arange(g.n), np.arange(g.n)] = 1.0 / dp1
    else:
        a[g.dst, g.src] = 1.0 / dp1[g.dst]
        a[np.arange(g.n), np.arange(g.n)] = 1.0 / dp1
    return NormalizedAdjacency(scheme=scheme, matrix=_freeze(a))


@dataclass(frozen=True)
class HomophilyStats:
    per_node_h: np.ndarray
    graph_h: float


def node_homophily(g, labels):
    """Per-node fraction of same-label neighbors and its unweighted mean."""
    labels = np.asarray(labels)
    _require_no_isolated(g)
    same = (labels[g.src] == labels[g.dst]).astype(np.float64)
    per = np.bincount(g.dst, weights=same, minlength=g.n) / g.degrees
    return HomophilyStats(per_node_h=_freeze(per), graph_h=float(per.mean()))


@dataclass(frozen=True)
class RelativeDegreeStats:
    """r_ij = sqrt((d_i+1)/(d_j+1)) per directed edge, aligned with g.src/g.dst
    (i = dst, j = src), and its per-node neighbor mean rbar.
    """

    r_edge: np.ndarray
    rbar: np.ndarray

    def r(self, i, j, g):
        k = _edge_slot(g, i, j)
        return float(self.r_edge[k])


def _edge_slot(g, i, j):
    lo, hi = g.indptr[i], g.indptr[i + 1]
    k = lo + np.searchsorted(g.indices[lo:hi], j)
    if k >= hi or g.indices[k] != j:
        raise KeyError(f"no edge ({i},{j})")
    return k


def relative_degrees(g):
    _require_no_isolated(g)
    dp1 = g.degrees.astype(np.float64) + 1.0
    r_edge = np.sqrt(dp1[g.dst] / dp1[g.src])
    rbar = np.bincount(g.dst, weights=r_edge, minlength=g.n) / g.degrees
    return RelativeDegreeStats(r_edge=_freeze(r_edge), rbar=_freeze(rbar))


def effective_homophily(g, signs):
    """Fraction of neighbors whose sign (+-1) matches the node's own."""
    signs = np.asarray(signs)
    _require_no_isolated(g)
    same = (signs[g.src] == signs[g.dst]).astype(np.float64)
    return _freeze(np.bincount(g.dst, weights=same, minlength=g.n) / g.degrees)


def empirical_effective_homophily(g, labels, correct):
    """Fraction of neighbors that share the node's label and are classified
    correctly (classifier-based homophily estimate).
    """
    labels = np.asarray(labels)
    correct = np.asarray(correct, dtype=bool)
    _require_no_isolated(g)
    hit = ((labels[g.src] == labels[g.dst]) & correct[g.src]).astype(np.float64)
    return _freeze(np.bincount(g.dst, weights=hit, minlength=g.n) / g.degrees)


def _require_no_isolated(g):
    iso = np.flatnonzero(g.degrees == 0)
    if iso.size:
        raise IsolatedNodeError(int(iso[0]))
