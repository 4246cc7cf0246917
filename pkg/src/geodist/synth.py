"""
Synthetic geometry experiment: epsilon-orthogonal teachers, student
initializations, and counting approximately orthogonal vectors.

Teacher rows are random sign vectors scaled to unit length. Pairs of
such rows are epsilon-orthogonal with overwhelming probability when the
number of rows is at most ``exp(epsilon^2 d_t / 4)``. Orthogonality of a
student is estimated by building the graph whose edges join rows with
``|<v_i, v_j>| > epsilon`` and finding a maximal independent set with
Luby's randomized algorithm.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .core import as_gram, as_matrix, normalize_rows
from .errors import PreconditionError

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class TeacherConfig:
    d_t: int
    epsilon: float
    n_override: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise PreconditionError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.d_t < 2:
            raise PreconditionError(f"d_t must be at least 2, got {self.d_t}")
        if self.n_override is not None and self.n_override < 1:
            raise PreconditionError(f"n_override must be positive, got {self.n_override}")

    @property
    def n(self):
        if self.n_override is not None:
            return int(self.n_override)
        return teacher_count(self.d_t, self.epsilon)


def teacher_count(d_t, epsilon):
    """``floor(exp(epsilon^2 d_t / 4))`` rows; 22026 for ``d_t=1000, eps=0.2``."""
    return int(math.floor(math.exp(epsilon * epsilon * d_t / 4.0)))


def build_teacher(cfg):
    """Random sign matrix with entries ``+-1/sqrt(d_t)``."""
    rng = np.random.default_rng(cfg.seed)
    bits = rng.integers(0, 2, size=(cfg.n, cfg.d_t), dtype=np.int8)
    R = (2.0 * bits - 1.0) / math.sqrt(cfg.d_t)
    return R


def init_student_projected(Rt, d_s, seed, projection=None):
    """Student rows ``normalize_rows(Rt @ G)``, ``G`` Gaussian with variance ``1/d_s``.

    ``projection`` overrides ``G`` (used by tests).
    """
    Rt = as_matrix(Rt, "Rt")
    if projection is None:
        if d_s < 1:
            raise PreconditionError(f"d_s must be positive, got {d_s}")
        rng = np.random.default_rng(seed)
        G = rng.standard_normal((Rt.shape[1], d_s)) / math.sqrt(d_s)
    else:
        G = as_matrix(projection, "projection")
        if G.shape != (Rt.shape[1], d_s):
            raise PreconditionError(f"projection must have shape {(Rt.shape[1], d_s)}")
    return normalize_rows(Rt @ G)


def init_student_random(n, d_s, seed):
    """``n`` i.i.d. uniformly random unit vectors in ``d_s`` dimensions."""
    if n < 1 or d_s < 1:
        raise PreconditionError(f"n and d_s must be positive, got n={n} d_s={d_s}")
    rng = np.random.default_rng(seed)
    return normalize_rows(rng.standard_normal((n, d_s)))


def sample_pair_violations(R, epsilon, num_pairs, seed):
    """Count sampled distinct pairs with ``|<v_i, v_j>| > epsilon``."""
    R = as_matrix(R)
    n = R.shape[0]
    if n < 2:
        return 0
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=num_pairs)
    j = rng.integers(0, n - 1, size=num_pairs)
    j = j + (j >= i)  # uniform over j != i
    dots = np.einsum("ij,ij->i", R[i], R[j])
    return int(np.count_nonzero(np.abs(dots) > epsilon))


@dataclass
class ThresholdGraph:
    """Undirected graph as a symmetric boolean CSR adjacency without self-loops."""

    n: int
    adjacency: sp.csr_matrix
    epsilon: float

    @property
    def num_edges(self):
        return int(self.adjacency.nnz // 2)

    def neighbors(self, i):
        a = self.adjacency
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def has_edge(self, i, j):
        return bool(np.any(self.neighbors(i) == j))

    def edges(self):
        """``(m, 2)`` array of edges ``i < j`` in lexicographic order."""
        coo = self.adjacency.tocoo()
        keep = coo.row < coo.col
        e = np.stack([coo.row[keep], coo.col[keep]], axis=1).astype(np.int64)
        order = np.lexsort((e[:, 1], e[:, 0]))
        return e[order]

    def edge_list_text(self):
        return "".join(f"{i} {j}\n" for i, j in self.edges())


def _graph_from_coords(n, rows, cols, epsilon):
    data = np.ones(rows.size, dtype=bool)
    adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n), dtype=bool)
    adj.sum_duplicates()
    adj.sort_indices()
    return ThresholdGraph(n=n, adjacency=adj, epsilon=float(epsilon))


def graph_from_edges(n, edges):
    """Build a graph from an iterable of ``(i, j)`` pairs (test fixtures)."""
    e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    e = e[e[:, 0] != e[:, 1]]
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    return _graph_from_coords(n, rows, cols, float("nan"))


def threshold_graph(K, epsilon):
    """Edges where ``|K[i, j]| > epsilon`` for ``i != j``."""
    K = as_gram(K)
    mask = np.abs(K) > epsilon
    np.fill_diagonal(mask, False)
    rows, cols = np.nonzero(mask)
    return _graph_from_coords(K.shape[0], rows, cols, epsilon)


def threshold_graph_repr(R, epsilon, block=2048):
    """Same as ``threshold_graph(gram(R), epsilon)`` but built in row blocks."""
    R = as_matrix(R)
    n = R.shape[0]
    rows, cols = [], []
    for start in range(0, n, block):
        stop = min(start + block, n)
        S = np.abs(R[start:stop] @ R.T) > epsilon
        S[np.arange(stop - start), np.arange(start, stop)] = False
        r, c = np.nonzero(S)
        rows.append(r + start)
        cols.append(c)
    return _graph_from_coords(n, np.concatenate(rows), np.concatenate(cols), epsilon)


@dataclass
class OrthogonalityReport:
    independent_set: np.ndarray
    count: int
    seed: int
    rounds: int = 0


def _priorities(seed, stream, rnd, n):
    # counter-based: the value for vertex v depends only on (seed, stream, round, v)
    bitgen = np.random.Philox(key=[int(seed) & _U64, ((int(stream) << 32) + rnd) & _U64])
    return np.random.Generator(bitgen).random(n)


def luby_mis(G, seed, stream=0):
    """Luby's randomized maximal independent set.

    Each round draws fresh random priorities for the active vertices,
    selects every vertex whose priority beats all of its active
    neighbors, and deactivates the selected vertices and their
    neighbors. Rounds repeat until no vertex is active.
    """
    n = G.n
    adj = G.adjacency
    src = np.repeat(np.arange(n), np.diff(adj.indptr))
    dst = adj.indices
    active = np.ones(n, dtype=bool)
    in_set = np.zeros(n, dtype=bool)
    rnd = 0
    while active.any():
        p = _priorities(seed, stream, rnd, n)
        live = active[src] & active[dst]
        s, d = src[live], dst[live]
        best = np.full(n, -np.inf)
        if s.size:
            starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
            best[s[starts]] = np.maximum.reduceat(p[d], starts)
        chosen = active & (p > best)
        in_set |= chosen
        active &= ~chosen
        active[dst[chosen[src]]] = False
        rnd += 1
    members = np.flatnonzero(in_set)
    return OrthogonalityReport(independent_set=members, count=int(members.size),
                               seed=int(seed), rounds=rnd)


def is_independent(G, members):
    members = np.asarray(members, dtype=np.int64)
    sub = G.adjacency[members][:, members]
    return sub.nnz == 0


def is_maximal(G, members):
    """Every vertex outside ``members`` has a neighbor inside."""
    inside = np.zeros(G.n, dtype=bool)
    inside[np.asarray(members, dtype=np.int64)] = True
    covered = (G.adjacency.astype(np.int32) @ inside.astype(np.int32)) > 0
    return bool(np.all(inside | covered))


def best_orthogonal_set(R, epsilon, seed, trials=5, graph=None):
    """Largest of ``trials`` Luby sets on the epsilon-threshold graph of ``R``."""
    if trials < 1:
        raise PreconditionError(f"trials must be at least 1, got {trials}")
    G = graph if graph is not None else threshold_graph_repr(R, epsilon)
    best = None
    for t in range(trials):
        rep = luby_mis(G, seed, stream=t)
        if best is None or rep.count > best.count:
            best = rep
    return best


def count_eps_orthogonal(R, epsilon, seed, trials=5):
    """Estimated number of mutually epsilon-orthogonal rows of ``R``."""
    return best_orthogonal_set(R, epsilon, seed, trials).count
