"""Node-level integration indicators for yearly trade graphs.

Degrees, strengths, PageRank and shortest-path betweenness use the directed
graph. Clustering, closeness, random-walk betweenness and k-core use the
undirected projection (an edge wherever trade flows in either direction).
"""

from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np
import pandas as pd
from scipy import linalg
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ConvergenceError, ValidationError
from .trade_graph import _undirected_clustering

CENTRALITY_COLUMNS = (
    "country", "year", "k_in", "k_out", "s_in", "s_out", "pagerank",
    "betweenness", "betweenness_norm", "rwb", "closeness", "clustering", "kcore",
)


@dataclass(frozen=True)
class CentralityRecord:
    country: str
    year: int
    k_in: int
    k_out: int
    s_in: float
    s_out: float
    pagerank: float
    betweenness: float
    betweenness_norm: float
    rwb: float
    closeness: float
    clustering: float
    kcore: int


def _as_mapping(graph, values):
    return {c: values[i].item() for i, c in enumerate(graph.nodes)}


def _check_direction(direction):
    if direction not in ("in", "out"):
        raise ValidationError(f"direction must be 'in' or 'out', got {direction!r}")


def degree(graph, direction="in"):
    _check_direction(direction)
    a = graph.adjacency
    return _as_mapping(graph, a.sum(axis=0 if direction == "in" else 1))


def strength(graph, direction="in"):
    _check_direction(direction)
    w = graph.weights
    return _as_mapping(graph, w.sum(axis=0 if direction == "in" else 1))


# ---------------------------------------------------------------------------
# PageRank

def _pagerank_array(weights, d=0.85, mode="weighted", tol=1e-12, max_iter=1000):
    if not 0 < d < 1:
        raise ValidationError(f"damping must lie in (0, 1), got {d}")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if mode not in ("weighted", "binary"):
        raise ValidationError(f"mode must be 'weighted' or 'binary', got {mode!r}")
    w = np.asarray(weights, dtype=float)
    if mode == "binary":
        w = (w > 0).astype(float)
    n = w.shape[0]
    if n == 0:
        return np.zeros(0)
    out = w.sum(axis=1)
    dangling = out == 0
    # row-stochastic transitions of exporters; rank flows exporter -> importer
    p = np.divide(w, out[:, None], out=np.zeros_like(w), where=~dangling[:, None])
    pt = np.ascontiguousarray(p.T)
    x = np.full(n, 1.0 / n)
    residual = np.inf
    for _ in range(max_iter):
        x_new = d * (pt @ x + x[dangling].sum() / n) + (1.0 - d) / n
        residual = float(np.abs(x_new - x).sum())
        x = x_new
        if residual < tol:
            return x / x.sum()
    raise ConvergenceError(f"PageRank did not converge in {max_iter} iterations", residual)


def pagerank(graph, d=0.85, mode="weighted", tol=1e-12, max_iter=1000):
    """PageRank by power iteration with uniform redistribution of dangling mass.

    In weighted mode each exporter spreads its rank over importers in
    proportion to trade value; in binary mode, uniformly over partners.

    Raises
    ------
    ConvergenceError
        If the L1 change between iterates is still above ``tol`` after
        ``max_iter`` iterations.
    """
    return _as_mapping(graph, _pagerank_array(graph.weights, d, mode, tol, max_iter))


# ---------------------------------------------------------------------------
# Clustering and closeness (undirected projection)

def clustering_coefficient(graph):
    return _as_mapping(graph, _undirected_clustering(graph.undirected()))


def _neighbours(adj):
    return [np.flatnonzero(row).tolist() for row in adj]


def _bfs_distances(nbrs, source):
    dist = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in nbrs[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def _closeness_array(u):
    n = u.shape[0]
    nbrs = _neighbours(u)
    out = np.zeros(n)
    if n < 2:
        return out
    for i in range(n):
        dist = _bfs_distances(nbrs, i)
        reach = len(dist) - 1
        total = sum(dist.values())
        if total > 0:
            # scaled by the reachable share so disconnected nodes are comparable
            out[i] = (reach / total) * (reach / (n - 1))
    return out


def closeness(graph):
    return _as_mapping(graph, _closeness_array(graph.undirected()))


# ---------------------------------------------------------------------------
# Shortest-path betweenness (directed, hop counts)

def _betweenness_array(adj):
    """Brandes accumulation over ordered pairs on an unweighted digraph.

    Path counts are integers and dependencies are accumulated as exact
    fractions, so each result is the correctly rounded betweenness.
    """
    n = adj.shape[0]
    nbrs = _neighbours(adj)
    bc = [Fraction(0)] * n
    for s in range(n):
        stack = []
        preds = [[] for _ in range(n)]
        sigma = [0] * n
        sigma[s] = 1
        dist = [-1] * n
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in nbrs[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = [Fraction(0)] * n
        while stack:
            w = stack.pop()
            coeff = (1 + delta[w]) / sigma[w]
            for v in preds[w]:
                delta[v] += sigma[v] * coeff
            if w != s:
                bc[w] += delta[w]
    return np.array([float(x) for x in bc])


def betweenness(graph, normalized=False):
    """Sum over ordered pairs of the share of shortest paths through each node.

    With ``normalized=True`` the raw value is divided by ``(N-1)(N-2)``.
    """
    bc = _betweenness_array(graph.adjacency)
    if normalized:
        n = graph.n_nodes
        bc = bc / ((n - 1) * (n - 2)) if n > 2 else np.zeros_like(bc)
    return _as_mapping(graph, bc)


# ---------------------------------------------------------------------------
# Random-walk (current-flow) betweenness

def _components(u):
    n = u.shape[0]
    nbrs = _neighbours(u)
    seen = np.zeros(n, dtype=bool)
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        comp = sorted(_bfs_distances(nbrs, s))
        seen[comp] = True
        comps.append(comp)
    return comps


def _rwb_array(u):
    """Newman random-walk betweenness, net-flow convention, endpoints excluded.

    For each component the grounded Laplacian is inverted once; each edge
    then carries current ``F[e, s] - F[e, t]`` for the unit s->t flow, and
    the per-edge sum over source/target pairs is taken in sorted order.
    Unit throughput at the two endpoints of every pair is subtracted.
    """
    n = u.shape[0]
    out = np.zeros(n)
    if n < 3:
        return out
    for comp in _components(u):
        c = len(comp)
        if c < 3:
            continue
        sub = u[np.ix_(comp, comp)].astype(float)
        lap = np.diag(sub.sum(axis=1)) - sub
        inv = np.zeros((c, c))
        inv[1:, 1:] = linalg.inv(lap[1:, 1:])
        iu, iv = np.nonzero(np.triu(sub))
        flow = inv[iu] - inv[iv]  # (edges, c)
        flow.sort(axis=1)
        ranks = 2.0 * np.arange(1, c + 1) - c - 1
        per_edge = flow @ ranks
        through = np.zeros(c)
        np.add.at(through, iu, per_edge)
        np.add.at(through, iv, per_edge)
        through = 0.5 * through - 0.5 * (c - 1)
        out[comp] = np.maximum(through, 0.0)
    return out / (n * (n - 1) / 2.0)


def random_walk_betweenness(graph):
    return _as_mapping(graph, _rwb_array(graph.undirected()))


# ---------------------------------------------------------------------------
# k-core

def _kcore_array(u):
    n = u.shape[0]
    nbrs = _neighbours(u)
    deg = u.sum(axis=1).astype(np.int64)
    shell = np.zeros(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    remaining = n
    k = 0
    while remaining:
        queue = deque(i for i in range(n) if alive[i] and deg[i] <= k)
        if not queue:
            k += 1
            continue
        while queue:
            v = queue.popleft()
            if not alive[v]:
                continue
            alive[v] = False
            remaining -= 1
            shell[v] = k
            for w in nbrs[v]:
                if alive[w]:
                    deg[w] -= 1
                    if deg[w] <= k:
                        queue.append(w)
    return shell


def kcore_decomposition(graph):
    """Shell index of every node by iterative peeling of the undirected projection."""
    return _as_mapping(graph, _kcore_array(graph.undirected()))


# ---------------------------------------------------------------------------

def compute_all(graph, d=0.85, pagerank_mode="weighted", tol=1e-12, max_iter=1000):
    """Every indicator for every registered country of ``graph``, ordered by code."""
    a = graph.adjacency
    w = graph.weights
    u = graph.undirected()
    n = graph.n_nodes
    bc = _betweenness_array(a)
    bc_norm = bc / ((n - 1) * (n - 2)) if n > 2 else np.zeros(n)
    pr = _pagerank_array(w, d, pagerank_mode, tol, max_iter)
    rwb = _rwb_array(u)
    clo = _closeness_array(u)
    cc = _undirected_clustering(u)
    kc = _kcore_array(u)
    k_in, k_out = a.sum(axis=0), a.sum(axis=1)
    s_in, s_out = w.sum(axis=0), w.sum(axis=1)
    return [
        CentralityRecord(
            country=c,
            year=graph.year,
            k_in=int(k_in[i]),
            k_out=int(k_out[i]),
            s_in=float(s_in[i]),
            s_out=float(s_out[i]),
            pagerank=float(pr[i]),
            betweenness=float(bc[i]),
            betweenness_norm=float(bc_norm[i]),
            rwb=float(rwb[i]),
            closeness=float(clo[i]),
            clustering=float(cc[i]),
            kcore=int(kc[i]),
        )
        for i, c in enumerate(graph.nodes)
    ]


def records_frame(records):
    return pd.DataFrame([asdict(r) for r in records], columns=list(CENTRALITY_COLUMNS))


class CentralityTransformer(TransformerMixin, BaseEstimator):
    """Map a list of yearly graphs to a long frame of centrality records."""

    def __init__(self, damping=0.85, pagerank_mode="weighted", tol=1e-12, max_iter=1000):
        self.damping = damping
        self.pagerank_mode = pagerank_mode
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        records = []
        for graph in X:
            records.extend(
                compute_all(graph, self.damping, self.pagerank_mode, self.tol, self.max_iter)
            )
        return records_frame(records)
