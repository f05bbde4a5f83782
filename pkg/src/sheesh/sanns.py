"""Seeded and bulk-seeded query layer.

Single queries carry optional seed point ids that are admitted as extra
initial points at level 0. Bulk queries over a chunk are grouped by the
default initial point of an unseeded descent, ordered within each group by a
1-D random projection, and chained: each point's results seed the next point
in its group.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation
from .graph import SearchGraph, SearchParams, SearchTrace, hierarchical_search


@dataclass
class SeededQuery:
    q: np.ndarray
    seeds: list = field(default_factory=list)
    m: int = 10


@dataclass
class BulkPlan:
    groups: dict  # group key (level-1 node id) -> list of chunk-local indices, ordered
    projection_seed: int


def projection_direction(dim, projection_seed):
    """Deterministic random unit direction (Gaussian components, normalized)."""
    rng = np.random.default_rng(projection_seed)
    r = rng.normal(size=dim)
    return (r / np.linalg.norm(r)).astype(np.float32)


def seeded_query(g: SearchGraph, sq: SeededQuery, sp: SearchParams) -> SearchTrace:
    sp = SearchParams(beam_width=sp.beam_width, min_iterations=sp.min_iterations,
                      result_count=min(sq.m, sp.beam_width))
    return hierarchical_search(g, sq.q, sq.seeds, sp)


def plan_bulk(chunk, g: SearchGraph, projection_seed) -> BulkPlan:
    """Group a chunk's points by unseeded-descent arrival node, order each
    group along a single random projection (ties by point index)."""
    points = chunk.vectors
    if points.shape[0] == 0:
        raise ContractViolation("chunk must be non-empty")
    keys = np.empty(points.shape[0], np.int64)
    for i in range(points.shape[0]):
        keys[i] = g.default_start(points[i])
    r = projection_direction(points.shape[1], projection_seed)
    proj = points @ r
    order = np.lexsort((np.arange(points.shape[0]), proj))
    groups: dict = {}
    for idx in order:
        groups.setdefault(int(keys[idx]), []).append(int(idx))
    return BulkPlan(groups=groups, projection_seed=projection_seed)


def run_bulk(g: SearchGraph, chunk, prev_assignments, sp: SearchParams,
             plan: BulkPlan, chaining=True):
    """Process the chunk group by group in plan order.

    prev_assignments: per-point carried seed id lists (or None). Within a
    group, each point's seeds are the predecessor's just-computed result ids
    followed by its own carried seeds, deduplicated order-preserving; the
    first point of a group uses carried seeds alone.

    Returns a list of SearchTraces indexed like the chunk.
    """
    points = chunk.vectors
    n = points.shape[0]
    if sorted(i for idxs in plan.groups.values() for i in idxs) != list(range(n)):
        raise ContractViolation("plan does not partition this chunk")
    traces: list = [None] * n
    for key in sorted(plan.groups):
        prev_ids: list = []
        for idx in plan.groups[key]:
            seeds = []
            seen = set()
            if chaining:
                for s in prev_ids:
                    if s not in seen:
                        seen.add(s)
                        seeds.append(s)
            if prev_assignments is not None:
                for s in prev_assignments[idx]:
                    s = int(s)
                    if s >= 0 and s not in seen:
                        seen.add(s)
                        seeds.append(s)
            tr = hierarchical_search(g, points[idx], seeds, sp)
            traces[idx] = tr
            prev_ids = [i for i, _ in tr.results]
    return traces
