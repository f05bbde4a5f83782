"""Slow-preprocessing alpha-pruned search graph with provable guarantees.

Deliberately cubic-time construction over a small point set: every vertex
considers all others in distance order and keeps an edge u->v unless an
already-kept neighbor w satisfies alpha * D(w, v) <= D(u, v). Greedy (b=1)
search on the result carries worst-case approximation and visit-count bounds
that hold from any start vertex, and improve when started from a good seed.

Distances in this module are plain Euclidean: the guarantees are multiplicative
in true distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, metric
from .errors import ContractViolation

DEFAULT_POINT_CAP = 4096


@dataclass
class AlphaParams:
    alpha: float = 2.0
    epsilon: float = 0.5

    def __post_init__(self):
        if not self.alpha > 1.0:
            raise ContractViolation("alpha must be strictly > 1")
        if not self.epsilon > 0.0:
            raise ContractViolation("epsilon must be > 0")

    @property
    def target_ratio(self):
        return (self.alpha + 1.0) / (self.alpha - 1.0) + self.epsilon


class AlphaGraph:
    def __init__(self, points, adjacency, params, aspect_ratio):
        self.points = points
        self.adjacency = adjacency  # list of int arrays, ascending by distance
        self.params = params
        self.aspect_ratio = aspect_ratio
        maxdeg = max((len(a) for a in adjacency), default=0)
        n = len(adjacency)
        self._nbr = np.full((n, max(maxdeg, 1)), -1, np.int64)
        self._cnt = np.zeros(n, np.int32)
        for u, a in enumerate(adjacency):
            self._nbr[u, : len(a)] = a
            self._cnt[u] = len(a)

    @property
    def num_nodes(self):
        return self.points.shape[0]

    def max_degree(self):
        return int(self._cnt.max())


def build_slow(P, ap: AlphaParams, point_cap=DEFAULT_POINT_CAP) -> AlphaGraph:
    P = np.ascontiguousarray(P, dtype=np.float32)
    n = P.shape[0]
    if n > point_cap:
        raise ContractViolation(f"|P|={n} exceeds cap {point_cap} for the cubic build")
    P64 = P.astype(np.float64)
    sq = np.einsum("ij,ij->i", P64, P64)
    D2 = sq[:, None] + sq[None, :] - 2.0 * (P64 @ P64.T)
    np.maximum(D2, 0.0, out=D2)
    D = np.sqrt(D2)
    metric.counter.add(n * n)
    off = ~np.eye(n, dtype=bool)
    dmin = D[off].min() if n > 1 else 0.0
    if n > 1 and dmin == 0.0:
        raise ContractViolation("duplicate points: aspect ratio undefined")
    dmax = D[off].max() if n > 1 else 0.0
    aspect = dmax / dmin if n > 1 else 1.0

    adjacency = []
    ids = np.arange(n)
    for u in range(n):
        order = np.lexsort((ids, D[u]))
        order = order[order != u]
        kept = np.empty(n, np.int64)
        nk = 0
        for v in order:
            duv = D[u, v]
            if nk and np.any(ap.alpha * D[kept[:nk], v] <= duv):
                continue
            kept[nk] = v
            nk += 1
        adjacency.append(kept[:nk].copy())
    return AlphaGraph(points=P, adjacency=adjacency, params=ap, aspect_ratio=aspect)


def _greedy_trace(ag: AlphaGraph, q, start):
    q = np.ascontiguousarray(q, dtype=np.float32)
    start = int(start)
    if start < 0 or start >= ag.num_nodes:
        raise ContractViolation(f"start node {start} not in graph")
    ids, d2, visits, ndist = _kernels.greedy_path_kernel(
        ag.points, ag._nbr, ag._cnt, start, q)
    metric.counter.add(ndist)
    return ids, np.sqrt(d2.astype(np.float64)), visits


def greedy_search_counted(ag: AlphaGraph, q, start, ap: AlphaParams = None):
    """Greedy b=1 search; returns (best node id, visit count)."""
    ids, dists, visits = _greedy_trace(ag, q, start)
    best = int(np.lexsort((ids, dists))[0])
    return int(ids[best]), visits


@dataclass
class SeededSearchResult:
    best_id: int
    best_dist: float
    visit_count: int
    delta: float
    visit_bound: int
    guarantee_met: bool


def seeded_greedy_search(ag: AlphaGraph, q, seed, ap: AlphaParams = None) -> SeededSearchResult:
    """Greedy search from a seed vertex, checked against the consistency bound.

    delta is measured from the seed's actual approximation ratio; the bound is
    ceil(log_alpha((1 + delta) / epsilon)) visits to reach a
    ((alpha+1)/(alpha-1) + epsilon)-approximate nearest neighbor.
    """
    ap = ap or ag.params
    ids, dists, visits = _greedy_trace(ag, q, seed)
    exact_d2 = _kernels.dists_all(ag.points, np.ascontiguousarray(q, np.float32))
    metric.counter.add(ag.num_nodes)
    d_exact = math.sqrt(float(exact_d2.min()))
    d_seed = float(dists[0])

    best = int(np.lexsort((ids, dists))[0])
    best_id, best_dist = int(ids[best]), float(dists[best])

    if d_exact == 0.0:
        delta = 0.0
        bound = 1
        met = best_dist == 0.0
    else:
        delta = d_seed / d_exact - 1.0
        bound = max(1, math.ceil(math.log((1.0 + delta) / ap.epsilon, ap.alpha)))
        upto = min(bound, visits)
        met = float(dists[:upto].min()) <= ap.target_ratio * d_exact
    return SeededSearchResult(best_id=best_id, best_dist=best_dist,
                              visit_count=visits, delta=delta,
                              visit_bound=bound, guarantee_met=met)


class ProjectionSeeder:
    """Seed supplier: nearest point in a 1-D random projection.

    O(n) preprocessing per direction, O(log n) per query via binary search on
    the sorted projections.
    """

    def __init__(self, P, projection_seed):
        P = np.ascontiguousarray(P, dtype=np.float32)
        if P.shape[0] == 0:
            raise ContractViolation("P must be non-empty")
        rng = np.random.default_rng(projection_seed)
        r = rng.normal(size=P.shape[1])
        self.direction = (r / np.linalg.norm(r)).astype(np.float32)
        proj = (P @ self.direction).astype(np.float64)
        self.order = np.lexsort((np.arange(P.shape[0]), proj))
        self.sorted_proj = proj[self.order]

    def query(self, q):
        qp = float(np.asarray(q, np.float32) @ self.direction)
        i = int(np.searchsorted(self.sorted_proj, qp))
        best_id, best_gap = -1, np.inf
        for j in (i - 1, i):
            if 0 <= j < len(self.sorted_proj):
                gap = abs(self.sorted_proj[j] - qp)
                pid = int(self.order[j])
                if gap < best_gap or (gap == best_gap and pid < best_id):
                    best_id, best_gap = pid, gap
        return best_id


def projection_seed(P, q, projection_seed_value):
    """One-shot form of ProjectionSeeder for single queries."""
    return ProjectionSeeder(P, projection_seed_value).query(q)


def check_pruning_soundness(ag: AlphaGraph):
    """No kept edge u->v may be dominated by an earlier-kept neighbor w."""
    P64 = ag.points.astype(np.float64)
    for u, adj in enumerate(ag.adjacency):
        for i, v in enumerate(adj):
            duv = np.linalg.norm(P64[u] - P64[v])
            for w in adj[:i]:
                if ag.params.alpha * np.linalg.norm(P64[w] - P64[v]) <= duv:
                    return False
    return True
