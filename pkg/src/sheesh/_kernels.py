"""Numba kernels for distance computation and graph traversal.

Everything here is single-threaded and deterministic. Distances are squared
Euclidean, computed with a sequential float32 accumulator so that the brute
force path and the graph path produce bit-identical values for the same
inputs. Ties are broken by lower node id everywhere.
"""

import numpy as np
from numba import njit

PREFETCH_AHEAD = 4
_CACHE_LINE_FLOATS = 16  # 64-byte lines / 4-byte floats


@njit(cache=True)
def sqdist32(a, b):
    acc = np.float32(0.0)
    for i in range(a.shape[0]):
        diff = a[i] - b[i]
        acc += diff * diff
    return acc


@njit(cache=True)
def sqdist64(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        diff = np.float64(a[i]) - np.float64(b[i])
        acc += diff * diff
    return acc


@njit(cache=True)
def dists_all(coords, q):
    n = coords.shape[0]
    out = np.empty(n, np.float32)
    for i in range(n):
        out[i] = sqdist32(coords[i], q)
    return out


@njit(cache=True)
def dists_for_ids(coords, ids, q):
    m = ids.shape[0]
    out = np.empty(m, np.float32)
    for i in range(m):
        out[i] = sqdist32(coords[ids[i]], q)
    return out


@njit(cache=True)
def assign_chunk(points, centers):
    """Exact nearest center per point, ties to the lower center id."""
    n = points.shape[0]
    k = centers.shape[0]
    ids = np.empty(n, np.int64)
    ds = np.empty(n, np.float32)
    for i in range(n):
        best = np.float32(np.inf)
        bid = -1
        for c in range(k):
            d = sqdist32(points[i], centers[c])
            if d < best:
                best = d
                bid = c
        ids[i] = bid
        ds[i] = best
    return ids, ds


# ---------------------------------------------------------------------------
# heap helpers: parallel (dist, id) arrays, lexicographic (dist, id) order
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _lt(d1, i1, d2, i2):
    return d1 < d2 or (d1 == d2 and i1 < i2)


@njit(cache=True)
def _minheap_push(hd, hi, sz, d, i):
    hd[sz] = d
    hi[sz] = i
    sz += 1
    j = sz - 1
    while j > 0:
        p = (j - 1) >> 1
        if _lt(hd[j], hi[j], hd[p], hi[p]):
            hd[j], hd[p] = hd[p], hd[j]
            hi[j], hi[p] = hi[p], hi[j]
            j = p
        else:
            break
    return sz


@njit(cache=True)
def _minheap_pop(hd, hi, sz):
    d = hd[0]
    i = hi[0]
    sz -= 1
    hd[0] = hd[sz]
    hi[0] = hi[sz]
    j = 0
    while True:
        l = 2 * j + 1
        r = l + 1
        s = j
        if l < sz and _lt(hd[l], hi[l], hd[s], hi[s]):
            s = l
        if r < sz and _lt(hd[r], hi[r], hd[s], hi[s]):
            s = r
        if s == j:
            break
        hd[j], hd[s] = hd[s], hd[j]
        hi[j], hi[s] = hi[s], hi[j]
        j = s
    return d, i, sz


@njit(cache=True)
def _maxheap_siftdown(hd, hi, sz, j):
    while True:
        l = 2 * j + 1
        r = l + 1
        s = j
        if l < sz and _lt(hd[s], hi[s], hd[l], hi[l]):
            s = l
        if r < sz and _lt(hd[s], hi[s], hd[r], hi[r]):
            s = r
        if s == j:
            break
        hd[j], hd[s] = hd[s], hd[j]
        hi[j], hi[s] = hi[s], hi[j]
        j = s


@njit(cache=True)
def _maxheap_push(hd, hi, sz, d, i):
    hd[sz] = d
    hi[sz] = i
    sz += 1
    j = sz - 1
    while j > 0:
        p = (j - 1) >> 1
        if _lt(hd[p], hi[p], hd[j], hi[j]):
            hd[j], hd[p] = hd[p], hd[j]
            hi[j], hi[p] = hi[p], hi[j]
            j = p
        else:
            break
    return sz


@njit(cache=True)
def _maxheap_push_bounded(hd, hi, sz, cap, d, i):
    if sz < cap:
        return _maxheap_push(hd, hi, sz, d, i)
    if _lt(d, i, hd[0], hi[0]):
        hd[0] = d
        hi[0] = i
        _maxheap_siftdown(hd, hi, sz, 0)
    return sz


# ---------------------------------------------------------------------------
# beam search
# ---------------------------------------------------------------------------


@njit(cache=True)
def beam_search_kernel(coords, nbr, cnt, starts, q, b, min_iters, prefetch):
    """Best-first search keeping the b nearest candidates found so far.

    The termination rule (nearest extracted candidate worse than the worst of
    the b best) is additionally gated on a minimum number of extractions.
    Neighbor expansion first collects all unvisited neighbors into a list,
    then evaluates their distances while requesting the memory of the vector
    PREFETCH_AHEAD positions down the list (every cache line of it). The
    prefetch pass only reads memory, so results are bit-identical either way.

    Returns (result_ids, result_dists, visited_count, distance_evals),
    results sorted ascending by (distance, id).
    """
    n = coords.shape[0]
    d = coords.shape[1]
    visited = np.zeros(n, np.uint8)
    max_deg = nbr.shape[1]
    lbuf = np.empty(max_deg, np.int64)

    cd = np.empty(n + 1, np.float32)
    ci = np.empty(n + 1, np.int64)
    csz = 0
    nd = np.empty(b + 1, np.float32)
    ni = np.empty(b + 1, np.int64)
    nsz = 0

    ndist = 0
    nvisited = 0
    sink = np.float32(0.0)

    for s in starts:
        if visited[s] != 0:
            continue
        visited[s] = 1
        nvisited += 1
        dv = sqdist32(coords[s], q)
        ndist += 1
        csz = _minheap_push(cd, ci, csz, dv, s)
        nsz = _maxheap_push_bounded(nd, ni, nsz, b, dv, s)

    iters = 0
    while csz > 0:
        dc, c, csz = _minheap_pop(cd, ci, csz)
        if nsz == b and dc > nd[0] and iters >= min_iters:
            break
        iters += 1
        lsz = 0
        for j in range(cnt[c]):
            v = nbr[c, j]
            if visited[v] == 0:
                visited[v] = 1
                nvisited += 1
                lbuf[lsz] = v
                lsz += 1
        if prefetch:
            for j in range(min(PREFETCH_AHEAD, lsz)):
                row = lbuf[j]
                for t in range(0, d, _CACHE_LINE_FLOATS):
                    sink += coords[row, t]
        for j in range(lsz):
            if prefetch and j + PREFETCH_AHEAD < lsz:
                row = lbuf[j + PREFETCH_AHEAD]
                for t in range(0, d, _CACHE_LINE_FLOATS):
                    sink += coords[row, t]
            v = lbuf[j]
            dv = sqdist32(coords[v], q)
            ndist += 1
            if nsz < b or _lt(dv, v, nd[0], ni[0]):
                csz = _minheap_push(cd, ci, csz, dv, v)
                nsz = _maxheap_push_bounded(nd, ni, nsz, b, dv, v)

    # drain N into ascending order
    out_d = np.empty(nsz, np.float32)
    out_i = np.empty(nsz, np.int64)
    m = nsz
    while nsz > 0:
        nsz -= 1
        out_d[nsz] = nd[0]
        out_i[nsz] = ni[0]
        nd[0] = nd[nsz]
        ni[0] = ni[nsz]
        _maxheap_siftdown(nd, ni, nsz, 0)
    if sink == np.float32(1e38):  # keep the prefetch reads alive
        out_d[0] += np.float32(0.0)
    return out_i[:m], out_d[:m], nvisited, ndist


@njit(cache=True)
def greedy_path_kernel(coords, nbr, cnt, start, q):
    """b=1 descent recording every visited node. Used by the provable-guarantee
    search structure, where the visit trace itself is checked against bounds.

    Returns (visit_ids, visit_dists, n_visits, distance_evals); visit order is
    extraction order, visit_ids[last] holds the final best only implicitly —
    the best is the min over the trace.
    """
    n = coords.shape[0]
    visited = np.zeros(n, np.uint8)
    cd = np.empty(n + 1, np.float32)
    ci = np.empty(n + 1, np.int64)
    csz = 0
    trace_i = np.empty(n, np.int64)
    trace_d = np.empty(n, np.float32)
    tsz = 0
    ndist = 0

    visited[start] = 1
    best_d = sqdist32(coords[start], q)
    best_i = start
    ndist += 1
    csz = _minheap_push(cd, ci, csz, best_d, start)

    while csz > 0:
        dc, c, csz = _minheap_pop(cd, ci, csz)
        if dc > best_d:
            break
        trace_i[tsz] = c
        trace_d[tsz] = dc
        tsz += 1
        if _lt(dc, c, best_d, best_i):
            best_d = dc
            best_i = c
        for j in range(cnt[c]):
            v = nbr[c, j]
            if visited[v] == 0:
                visited[v] = 1
                dv = sqdist32(coords[v], q)
                ndist += 1
                if _lt(dv, v, best_d, best_i):
                    csz = _minheap_push(cd, ci, csz, dv, v)
    return trace_i[:tsz], trace_d[:tsz], tsz, ndist


@njit(cache=True)
def accumulate_means(points, assign, k):
    d = points.shape[1]
    sums = np.zeros((k, d), np.float64)
    counts = np.zeros(k, np.int64)
    for i in range(points.shape[0]):
        c = assign[i]
        counts[c] += 1
        for j in range(d):
            sums[c, j] += points[i, j]
    return sums, counts


@njit(cache=True)
def score_assigned(points, centers, assign):
    acc = 0.0
    for i in range(points.shape[0]):
        acc += np.float64(sqdist32(points[i], centers[assign[i]]))
    return acc
