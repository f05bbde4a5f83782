"""Leveled search graph over the current centers.

Construction and queries follow the usual hierarchy: upper levels are
geometric subsamples used to find a good entry into the full level-0 graph.
Level assignments are a pure function of (node id, level_seed) so they stay
fixed across rebuilds, which lets a refreshed graph reuse the previous
iteration's topology as a coarse approximation.

Determinism: fixed (level_seed, insertion order, single thread) produces a
bit-identical graph. All distance ties break toward the lower node id.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels, metric
from .errors import ContractViolation

SNAPSHOT_VERSION = 1


@dataclass
class BuildParams:
    ef_build: int = 200
    M: int = 60
    level_seed: int = 0

    def __post_init__(self):
        if self.ef_build < 1 or self.M < 2:
            raise ContractViolation("ef_build >= 1 and M >= 2 required")
        if self.ef_build < self.M:
            warnings.warn("ef_build < M; neighbor selection will be starved",
                          stacklevel=3)


@dataclass
class SearchParams:
    beam_width: int = 100
    min_iterations: int = 0
    result_count: int = 10

    def __post_init__(self):
        if self.beam_width < 1 or self.min_iterations < 0 or self.result_count < 1:
            raise ContractViolation("invalid search parameters")
        if self.result_count > self.beam_width:
            raise ContractViolation("result_count must be <= beam_width")


@dataclass
class SearchTrace:
    results: list  # [(node id, squared distance)], ascending
    visited_count: int
    default_start: int | None = None


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x):
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MUL1
        z = (z ^ (z >> np.uint64(27))) * _MUL2
        return z ^ (z >> np.uint64(31))


def node_levels_for(ids, level_seed, M):
    """Geometric level law: floor(-ln(u) / ln(M)), u hashed from (id, seed)."""
    ids = np.asarray(ids, dtype=np.uint64)
    h = _splitmix64(ids ^ _splitmix64(np.uint64(level_seed & 0xFFFFFFFFFFFFFFFF)))
    u = ((h >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53  # in (0, 1]
    return np.floor(-np.log(u) / np.log(float(M))).astype(np.int64)


class SearchGraph:
    def __init__(self, coords, bp: BuildParams):
        coords = np.ascontiguousarray(coords, dtype=np.float32)
        if coords.ndim != 2 or coords.shape[0] < 1:
            raise ContractViolation("coords must be a non-empty (n, d) array")
        if coords.shape[0] > 2**32:
            raise ContractViolation("node ids limited to 32 bits")
        self.coords = coords
        self.bp = bp
        n = coords.shape[0]
        self.node_levels = node_levels_for(np.arange(n), bp.level_seed, bp.M)
        self.present = np.zeros(n, dtype=bool)
        self.entry_point = -1
        self.max_level = -1
        self._adj = []  # per level: (neighbors (n, M+1) int64 padded -1, counts int32)

    # -- structure ---------------------------------------------------------

    @property
    def num_nodes(self):
        return int(self.present.sum())

    def _ensure_level(self, level):
        n = self.coords.shape[0]
        while len(self._adj) <= level:
            self._adj.append((np.full((n, self.bp.M + 1), -1, np.int64),
                              np.zeros(n, np.int32)))

    def neighbors(self, node_id, level=0):
        nbr, cnt = self._adj[level]
        return [int(v) for v in nbr[node_id, : cnt[node_id]]]

    def level_members(self, level):
        ids = np.nonzero(self.present & (self.node_levels >= level))[0]
        return ids

    # -- low-level search --------------------------------------------------

    def _search_level(self, q, starts, b, min_iters, level, prefetch=True):
        nbr, cnt = self._adj[level]
        starts = np.asarray(starts, dtype=np.int64)
        ids, dists, visited, ndist = _kernels.beam_search_kernel(
            self.coords, nbr, cnt, starts, q, b, min_iters, prefetch)
        metric.counter.add(ndist)
        return ids, dists, visited

    def _descend(self, q, down_to=1):
        """Greedy b=1 descent from the entry point through levels above down_to.

        Returns (arrival node, visited count). The arrival node at level 1 is
        the "default initial point" used for grouping bulk queries.
        """
        ep = self.entry_point
        visited = 0
        for level in range(self.max_level, down_to - 1, -1):
            ids, _, vis = self._search_level(q, [ep], 1, 0, level)
            ep = int(ids[0])
            visited += vis
        return ep, visited

    def default_start(self, q):
        ep, _ = self._descend(q, down_to=1)
        return ep

    # -- construction ------------------------------------------------------

    def _select_heuristic(self, cand_ids, cand_dists, cap):
        """Keep candidate e (ascending by distance) unless some already-kept
        neighbor w is closer to e than the base point is."""
        kept = []
        kept_ids = np.empty(cap, np.int64)
        for e, de in zip(cand_ids, cand_dists):
            if len(kept) >= cap:
                break
            if kept:
                dw = _kernels.dists_for_ids(self.coords, kept_ids[: len(kept)],
                                            self.coords[e])
                metric.counter.add(len(kept))
                if np.any(dw < de):
                    continue
            kept_ids[len(kept)] = e
            kept.append(int(e))
        return kept

    def _set_neighbors(self, level, node_id, ids):
        nbr, cnt = self._adj[level]
        nbr[node_id, : len(ids)] = ids
        nbr[node_id, len(ids):] = -1
        cnt[node_id] = len(ids)

    def _add_edge(self, level, u, v):
        nbr, cnt = self._adj[level]
        nbr[u, cnt[u]] = v
        cnt[u] += 1
        if cnt[u] > self.bp.M:
            ids = nbr[u, : cnt[u]].copy()
            dists = _kernels.dists_for_ids(self.coords, ids, self.coords[u])
            metric.counter.add(len(ids))
            order = np.lexsort((ids, dists))
            kept = self._select_heuristic(ids[order], dists[order], self.bp.M)
            self._set_neighbors(level, u, kept)

    def insert(self, node_id):
        node_id = int(node_id)
        if node_id < 0 or node_id >= self.coords.shape[0]:
            raise ContractViolation(f"node id {node_id} out of range")
        if self.present[node_id]:
            raise ContractViolation(f"node {node_id} already present")
        level = int(self.node_levels[node_id])
        self._ensure_level(level)
        q = self.coords[node_id]

        if self.entry_point < 0:
            self.present[node_id] = True
            self.entry_point = node_id
            self.max_level = level
            return

        ep = self.entry_point
        for lvl in range(self.max_level, level, -1):
            ids, _, _ = self._search_level(q, [ep], 1, 0, lvl)
            ep = int(ids[0])
        for lvl in range(min(level, self.max_level), -1, -1):
            rid, rdist, _ = self._search_level(q, [ep], self.bp.ef_build, 0, lvl)
            sel = self._select_heuristic(rid, rdist, self.bp.M)
            self._set_neighbors(lvl, node_id, sel)
            for w in sel:
                self._add_edge(lvl, w, node_id)
            ep = int(rid[0])
        self.present[node_id] = True
        if level > self.max_level:
            self.max_level = level
            self.entry_point = node_id

    # -- persistence -------------------------------------------------------

    def save(self, path):
        arrays = {"version": np.int64(SNAPSHOT_VERSION),
                  "coords": self.coords,
                  "present": self.present,
                  "entry_point": np.int64(self.entry_point),
                  "max_level": np.int64(self.max_level),
                  "params": np.array([self.bp.ef_build, self.bp.M, self.bp.level_seed],
                                     np.int64)}
        for lvl, (nbr, cnt) in enumerate(self._adj):
            arrays[f"nbr_{lvl}"] = nbr
            arrays[f"cnt_{lvl}"] = cnt
        np.savez_compressed(path, **arrays)

    @classmethod
    def load(cls, path):
        data = np.load(path)
        if int(data["version"]) != SNAPSHOT_VERSION:
            raise ContractViolation(f"unsupported snapshot version {int(data['version'])}")
        ef, M, seed = (int(v) for v in data["params"])
        g = cls(data["coords"], BuildParams(ef_build=ef, M=M, level_seed=seed))
        g.present = data["present"]
        g.entry_point = int(data["entry_point"])
        g.max_level = int(data["max_level"])
        lvl = 0
        while f"nbr_{lvl}" in data:
            g._adj.append((data[f"nbr_{lvl}"].copy(), data[f"cnt_{lvl}"].copy()))
            lvl += 1
        return g


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------


def _validate_node_ids(g, ids, what):
    for i in ids:
        if i < 0 or i >= g.coords.shape[0] or not g.present[i]:
            raise ContractViolation(f"unknown {what} id {i}")


def beam_search(g: SearchGraph, q, starts, sp: SearchParams) -> SearchTrace:
    """Level-0 beam search starting from all of `starts` at once."""
    if len(starts) == 0:
        raise ContractViolation("starts must be non-empty")
    _validate_node_ids(g, starts, "start")
    q = np.ascontiguousarray(q, dtype=np.float32)
    ids, dists, visited = g._search_level(q, starts, sp.beam_width,
                                          sp.min_iterations, 0)
    results = [(int(i), float(d)) for i, d in
               zip(ids[: sp.result_count], dists[: sp.result_count])]
    return SearchTrace(results=results, visited_count=visited)


def hierarchical_search(g: SearchGraph, q, seeds, sp: SearchParams) -> SearchTrace:
    """Greedy descent to level 0, then beam search with the descent result
    plus any seed points as initial points. Seeds enter only at level 0."""
    _validate_node_ids(g, seeds, "seed")
    q = np.ascontiguousarray(q, dtype=np.float32)
    ep, descent_visited = g._descend(q, down_to=1)
    starts = [ep]
    seen = {ep}
    for s in seeds:
        s = int(s)
        if s not in seen:
            seen.add(s)
            starts.append(s)
    ids, dists, visited = g._search_level(q, starts, sp.beam_width,
                                          sp.min_iterations, 0)
    results = [(int(i), float(d)) for i, d in
               zip(ids[: sp.result_count], dists[: sp.result_count])]
    return SearchTrace(results=results, visited_count=visited + descent_visited,
                       default_start=ep)


def bulk_build(points, bp: BuildParams) -> SearchGraph:
    points = np.ascontiguousarray(points, dtype=np.float32)
    g = SearchGraph(points, bp)
    for i in range(points.shape[0]):
        g.insert(i)
    return g


def rebuild_from_previous(g_prev: SearchGraph, new_coords, bp: BuildParams | None = None):
    """Refresh the previous iteration's graph for moved coordinates.

    Per node and level: search the old topology (under the new coordinates)
    starting from the node's previous neighbors, merge the search results with
    those neighbors, and re-prune to M. Level memberships and the entry point
    are unchanged. If no coordinate moved, the topology is copied verbatim.
    """
    bp = bp or g_prev.bp
    new_coords = np.ascontiguousarray(new_coords, dtype=np.float32)
    if new_coords.shape != g_prev.coords.shape:
        raise ContractViolation("node set mismatch: coordinate shapes differ")
    if bp.level_seed != g_prev.bp.level_seed or bp.M != g_prev.bp.M:
        raise ContractViolation("level assignments must be identical across rebuilds")

    g = SearchGraph(new_coords, bp)
    g.present = g_prev.present.copy()
    g.entry_point = g_prev.entry_point
    g.max_level = g_prev.max_level
    g._ensure_level(g_prev.max_level)

    if np.array_equal(new_coords, g_prev.coords):
        g._adj = [(nbr.copy(), cnt.copy()) for nbr, cnt in g_prev._adj]
        return g

    for lvl in range(g_prev.max_level + 1):
        prev_nbr, prev_cnt = g_prev._adj[lvl]
        for u in g_prev.level_members(lvl):
            u = int(u)
            old = prev_nbr[u, : prev_cnt[u]]
            starts = np.empty(len(old) + 1, np.int64)
            starts[: len(old)] = old
            starts[len(old)] = u
            rid, _, _, ndist = _kernels.beam_search_kernel(
                new_coords, prev_nbr, prev_cnt, starts, new_coords[u],
                bp.ef_build, 0, True)
            metric.counter.add(ndist)
            # merge search results with previous neighbors, drop self
            cand = np.unique(np.concatenate([rid, old.astype(np.int64)]))
            cand = cand[cand != u]
            dists = _kernels.dists_for_ids(new_coords, cand, new_coords[u])
            metric.counter.add(len(cand))
            order = np.lexsort((cand, dists))
            kept = g._select_heuristic(cand[order], dists[order], bp.M)
            g._set_neighbors(lvl, u, kept)
    return g
