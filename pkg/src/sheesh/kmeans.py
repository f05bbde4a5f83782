"""Clustering engines: exact Lloyd, black-box graph-search Lloyd, and the
seeded search-graph engine with multi-assignment carryover and continuous
rebuilds.

Reassignment and recompute share one streaming pass: per-center coordinate
sums, counts, and squared-norm sums are accumulated in float64 while points
are assigned, and the post-recompute score is derived algebraically from the
same accumulators. Reported scores use the assigned center, so approximate
engines report an upper bound on the true objective; exact_score() runs an
exact re-evaluation pass for verification.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, metric
from .dataset import VectorSet, default_chunk_size
from .errors import ContractViolation
from .graph import BuildParams, SearchParams, bulk_build, hierarchical_search, \
    rebuild_from_previous
from .sanns import plan_bulk, run_bulk


@dataclass
class CentersState:
    centers: np.ndarray  # (k, d) float32
    iteration: int = 0

    def __post_init__(self):
        self.centers = np.ascontiguousarray(self.centers, dtype=np.float32)
        if self.centers.ndim != 2 or self.centers.shape[0] < 1:
            raise ContractViolation("centers must be a non-empty (k, d) array")
        if not np.all(np.isfinite(self.centers)):
            raise ContractViolation("centers must be finite")

    @property
    def k(self):
        return self.centers.shape[0]


class MultiAssignment:
    """Per point, the top-m (center id, squared distance) pairs, ascending.

    Stored as padded arrays: ids -1 and dists +inf where a point has fewer
    than m entries. The first entry is the point's assigned center.
    """

    def __init__(self, ids, dists):
        self.ids = ids
        self.dists = dists

    @classmethod
    def empty(cls, n, m):
        return cls(np.full((n, m), -1, np.int64),
                   np.full((n, m), np.inf, np.float32))

    @property
    def best_ids(self):
        return self.ids[:, 0]

    @property
    def best_dists(self):
        return self.dists[:, 0]

    def seed_lists(self, start, stop):
        block = self.ids[start:stop]
        return [row[row >= 0] for row in block]


@dataclass
class IterationStats:
    iteration: int
    score: float
    wall_seconds: float
    avg_center_movement: float
    reassigned_count: int


def _stream(P, chunk_size):
    if chunk_size is None:
        chunk_size = default_chunk_size(65536)
    return P.chunks(chunk_size)


def score(P: VectorSet, A: MultiAssignment, C: CentersState, chunk_size=None):
    """Sum of squared distances from each point to its assigned center,
    accumulated in float64."""
    acc = 0.0
    seen = 0
    for chunk in _stream(P, chunk_size):
        ids = A.best_ids[chunk.start_index: chunk.start_index + len(chunk.vectors)]
        if np.any(ids < 0):
            raise ContractViolation("point without an assignment")
        acc += _kernels.score_assigned(chunk.vectors, C.centers, ids)
        metric.counter.add(len(ids))
        seen += len(ids)
    if seen != P.count:
        raise ContractViolation("assignment length does not match dataset")
    return acc


def exact_score(P: VectorSet, C: CentersState, chunk_size=None):
    """Exact objective: brute-force nearest-center assignment for every point."""
    acc = 0.0
    for chunk in _stream(P, chunk_size):
        _, ds = _kernels.assign_chunk(chunk.vectors, C.centers)
        metric.counter.add(len(chunk.vectors) * C.k)
        acc += float(np.sum(ds.astype(np.float64)))
    return acc


def init_uniform(P: VectorSet, k, seed, chunk_size=None) -> CentersState:
    """k distinct points via a single-pass reservoir sample."""
    if k > P.count:
        raise ContractViolation(f"k={k} exceeds |P|={P.count}")
    rng = np.random.default_rng(seed)
    reservoir = np.empty((k, P.dim), np.float32)
    seen = 0
    for chunk in _stream(P, chunk_size):
        vecs = chunk.vectors
        n = len(vecs)
        take = min(max(k - seen, 0), n)
        if take:
            reservoir[seen: seen + take] = vecs[:take]
        if seen + n > k:
            lo = max(k - seen, 0)
            idx = np.arange(seen + lo, seen + n)
            j = rng.integers(0, idx + 1)
            hits = np.nonzero(j < k)[0]
            for h in hits:
                reservoir[j[h]] = vecs[lo + h]
        seen += n
    return CentersState(centers=reservoir)


def init_kmeanspp(P, k, seed) -> CentersState:
    """Standard D^2 sampling; in-memory only, for small-scale experiments."""
    pts = P.read_all() if isinstance(P, VectorSet) else np.asarray(P, np.float32)
    n = pts.shape[0]
    if k > n:
        raise ContractViolation(f"k={k} exceeds |P|={n}")
    rng = np.random.default_rng(seed)
    centers = np.empty((k, pts.shape[1]), np.float32)
    centers[0] = pts[rng.integers(n)]
    pts64 = pts.astype(np.float64)
    min_d2 = np.full(n, np.inf)
    for i in range(1, k):
        d2 = np.sum((pts64 - centers[i - 1].astype(np.float64)) ** 2, axis=1)
        metric.counter.add(n)
        np.minimum(min_d2, d2, out=min_d2)
        total = min_d2.sum()
        if total > 0:
            u = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(min_d2), u, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centers[i] = pts[idx]
    return CentersState(centers=centers)


class _PassAccumulator:
    """Per-center float64 sums / counts / squared norms for one streaming pass."""

    def __init__(self, k, d):
        self.sums = np.zeros((k, d), np.float64)
        self.counts = np.zeros(k, np.int64)
        self.sumsq = np.zeros(k, np.float64)
        self.reassigned = 0

    def add_chunk(self, points, assign):
        s, c = _kernels.accumulate_means(points, assign, self.sums.shape[0])
        self.sums += s
        self.counts += c
        sq = np.einsum("ij,ij->i", points.astype(np.float64), points.astype(np.float64))
        np.add.at(self.sumsq, assign, sq)

    def recompute(self, old_centers):
        new = old_centers.astype(np.float64).copy()
        nz = self.counts > 0
        new[nz] = self.sums[nz] / self.counts[nz, None]
        return new.astype(np.float32)

    def assigned_score(self, new_centers):
        c64 = new_centers.astype(np.float64)
        cross = np.einsum("ij,ij->i", self.sums, c64)
        cnorm = np.einsum("ij,ij->i", c64, c64)
        return float(np.sum(self.sumsq - 2.0 * cross + self.counts * cnorm))


def _finish_iteration(C: CentersState, acc: _PassAccumulator, wall):
    new_centers = acc.recompute(C.centers)
    movement = float(np.mean(np.linalg.norm(
        new_centers.astype(np.float64) - C.centers.astype(np.float64), axis=1)))
    stats = IterationStats(iteration=C.iteration + 1,
                           score=acc.assigned_score(new_centers),
                           wall_seconds=wall,
                           avg_center_movement=movement,
                           reassigned_count=acc.reassigned)
    return CentersState(centers=new_centers, iteration=C.iteration + 1), stats


def lloyd_exact_iteration(P: VectorSet, C: CentersState, prev: MultiAssignment = None,
                          chunk_size=None):
    """One exact Lloyd iteration: brute-force assignment, centroid recompute."""
    t0 = time.perf_counter()
    acc = _PassAccumulator(C.k, C.centers.shape[1])
    A = MultiAssignment.empty(P.count, 1)
    for chunk in _stream(P, chunk_size):
        ids, ds = _kernels.assign_chunk(chunk.vectors, C.centers)
        metric.counter.add(len(chunk.vectors) * C.k)
        lo = chunk.start_index
        hi = lo + len(chunk.vectors)
        A.ids[lo:hi, 0] = ids
        A.dists[lo:hi, 0] = ds
        acc.add_chunk(chunk.vectors, ids)
        if prev is not None:
            acc.reassigned += int(np.count_nonzero(prev.best_ids[lo:hi] != ids))
        else:
            acc.reassigned += len(ids)
    C2, stats = _finish_iteration(C, acc, time.perf_counter() - t0)
    return C2, A, stats


def _merge_prev_best(result_ids, result_dists, prev_id, prev_dist, m):
    """Fold the previously assigned center into a result list, keeping it
    whenever the search found nothing strictly closer (avoid-regress)."""
    ids = list(result_ids)
    ds = list(result_dists)
    if prev_id in ids:
        i = ids.index(prev_id)
        ds[i] = min(ds[i], prev_dist)
    else:
        ids.append(prev_id)
        ds.append(prev_dist)
    order = sorted(range(len(ids)), key=lambda i: (ds[i], ids[i]))[:m]
    return [ids[i] for i in order], [ds[i] for i in order]


def _store_results(A, idx, ids, dists):
    m = A.ids.shape[1]
    ids = ids[:m]
    dists = dists[:m]
    A.ids[idx, : len(ids)] = ids
    A.ids[idx, len(ids):] = -1
    A.dists[idx, : len(dists)] = dists
    A.dists[idx, len(dists):] = np.inf


def blackbox_iteration(P: VectorSet, C: CentersState, sp: SearchParams,
                       bp: BuildParams, avoid_regress=True,
                       prev: MultiAssignment = None, chunk_size=None):
    """Graph-search Lloyd iteration with a from-scratch build each time.

    Each point is assigned via an unseeded hierarchical search; with
    avoid_regress on, a point keeps its previous center whenever the search's
    best is not strictly closer.
    """
    t0 = time.perf_counter()
    g = bulk_build(C.centers, bp)
    acc = _PassAccumulator(C.k, C.centers.shape[1])
    m = sp.result_count
    A = MultiAssignment.empty(P.count, m)
    for chunk in _stream(P, chunk_size):
        n = len(chunk.vectors)
        lo = chunk.start_index
        assign = np.empty(n, np.int64)
        for i in range(n):
            tr = hierarchical_search(g, chunk.vectors[i], [], sp)
            ids = [r[0] for r in tr.results]
            ds = [r[1] for r in tr.results]
            if avoid_regress and prev is not None and prev.best_ids[lo + i] >= 0:
                pid = int(prev.best_ids[lo + i])
                pd = float(_kernels.sqdist32(chunk.vectors[i], C.centers[pid]))
                metric.counter.add(1)
                if not ds or not (ds[0] < pd or (ds[0] == pd and ids[0] < pid)):
                    ids, ds = _merge_prev_best(ids, ds, pid, pd, m)
            _store_results(A, lo + i, ids, ds)
            assign[i] = ids[0]
        acc.add_chunk(chunk.vectors, assign)
        if prev is not None:
            acc.reassigned += int(np.count_nonzero(prev.best_ids[lo: lo + n] != assign))
        else:
            acc.reassigned += n
    C2, stats = _finish_iteration(C, acc, time.perf_counter() - t0)
    return C2, A, stats, g


@dataclass
class EngineOptions:
    num_prev_assignments: int = 10
    avoid_regress: bool = True
    enable_seeds: bool = True
    enable_bulk: bool = True
    enable_min_iter: bool = True
    use_rebuilds: bool = True


def sheesh_iteration(P: VectorSet, C: CentersState, S: MultiAssignment,
                     G_prev, sp: SearchParams, bp: BuildParams,
                     opts: EngineOptions = None, chunk_size=None,
                     projection_seed=0):
    """One seeded search-graph Lloyd iteration.

    The graph is refreshed from the previous iteration's graph; reassignment
    runs per chunk with grouping, projection ordering, seed chaining, the
    minimum-iteration search floor, and the avoid-regress guard against the
    carried best assignment.
    """
    opts = opts or EngineOptions()
    t0 = time.perf_counter()
    if G_prev is not None and opts.use_rebuilds:
        g = rebuild_from_previous(G_prev, C.centers, bp)
    else:
        g = bulk_build(C.centers, bp)
    sp_eff = SearchParams(
        beam_width=sp.beam_width,
        min_iterations=sp.min_iterations if opts.enable_min_iter else 0,
        result_count=min(opts.num_prev_assignments, sp.beam_width))
    m = sp_eff.result_count
    acc = _PassAccumulator(C.k, C.centers.shape[1])
    A = MultiAssignment.empty(P.count, m)
    for chunk in _stream(P, chunk_size):
        n = len(chunk.vectors)
        lo = chunk.start_index
        carried = S.seed_lists(lo, lo + n) if (S is not None and opts.enable_seeds) else None
        if opts.enable_bulk:
            plan = plan_bulk(chunk, g, projection_seed)
            traces = run_bulk(g, chunk, carried, sp_eff, plan, chaining=True)
        else:
            traces = []
            for i in range(n):
                seeds = list(carried[i]) if carried is not None else []
                traces.append(hierarchical_search(g, chunk.vectors[i], seeds, sp_eff))
        assign = np.empty(n, np.int64)
        for i, tr in enumerate(traces):
            ids = [r[0] for r in tr.results]
            ds = [r[1] for r in tr.results]
            if opts.avoid_regress and S is not None and S.best_ids[lo + i] >= 0:
                pid = int(S.best_ids[lo + i])
                pd = float(_kernels.sqdist32(chunk.vectors[i], C.centers[pid]))
                metric.counter.add(1)
                if not (ds[0] < pd or (ds[0] == pd and ids[0] < pid)):
                    ids, ds = _merge_prev_best(ids, ds, pid, pd, m)
            _store_results(A, lo + i, ids, ds)
            assign[i] = ids[0]
        acc.add_chunk(chunk.vectors, assign)
        if S is not None:
            acc.reassigned += int(np.count_nonzero(S.best_ids[lo: lo + n] != assign))
        else:
            acc.reassigned += n
    C2, stats = _finish_iteration(C, acc, time.perf_counter() - t0)
    return C2, A, stats, g


def run_clustering(config):
    """Driver: init, iterate until convergence / max_iterations / time limit.

    The iteration in progress when the time limit trips is completed and
    recorded. Returns (list of IterationStats, final CentersState).
    """
    P = config.load_dataset()
    if config.k < 1 or config.k > P.count:
        raise ContractViolation(f"k={config.k} invalid for |P|={P.count}")
    chunk_size = config.chunk_size or default_chunk_size(config.k)
    sp = SearchParams(beam_width=config.ef_search,
                      min_iterations=config.min_iterations,
                      result_count=min(config.num_prev_assignments, config.ef_search))
    bp = BuildParams(ef_build=config.ef_build, M=config.M, level_seed=config.seed)
    opts = EngineOptions(num_prev_assignments=config.num_prev_assignments,
                         avoid_regress=config.avoid_regress,
                         enable_seeds=config.enable_seeds,
                         enable_bulk=config.enable_bulk,
                         enable_min_iter=config.enable_min_iter,
                         use_rebuilds=config.use_rebuilds)

    t0 = time.perf_counter()
    if config.init == "uniform":
        C = init_uniform(P, config.k, config.seed, chunk_size)
    elif config.init == "kmeanspp":
        C = init_kmeanspp(P, config.k, config.seed)
    else:
        raise ContractViolation(f"unknown init {config.init!r}")

    rows = [IterationStats(iteration=0,
                           score=exact_score(P, C, chunk_size),
                           wall_seconds=time.perf_counter() - t0,
                           avg_center_movement=0.0, reassigned_count=0)]
    A = None
    g = None
    for _ in range(config.max_iterations):
        if config.engine == "lloyd":
            C, A, stats = lloyd_exact_iteration(P, C, prev=A, chunk_size=chunk_size)
        elif config.engine == "blackbox":
            C, A, stats, g = blackbox_iteration(P, C, sp, bp,
                                                avoid_regress=config.avoid_regress,
                                                prev=A, chunk_size=chunk_size)
        elif config.engine == "sheesh":
            C, A, stats, g = sheesh_iteration(P, C, A, g, sp, bp, opts,
                                              chunk_size=chunk_size,
                                              projection_seed=config.seed + C.iteration)
        else:
            raise ContractViolation(f"unknown engine {config.engine!r}")
        stats.wall_seconds = time.perf_counter() - t0
        rows.append(stats)
        if config.engine == "lloyd" and stats.reassigned_count == 0:
            break
        if stats.wall_seconds > config.time_limit_seconds:
            break
    return rows, C
