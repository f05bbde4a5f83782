import numpy as np
import pytest

from sheesh import kmeans, metric
from sheesh.dataset import VectorSet, gen_gaussian_mixture
from sheesh.errors import ContractViolation
from sheesh.graph import BuildParams, SearchParams
from sheesh.kmeans import CentersState, EngineOptions, MultiAssignment


def _vs(arr):
    return VectorSet.from_array(np.asarray(arr, np.float32))


def _assign_exact(P, C):
    """Brute-force single-best MultiAssignment, independent of the engines."""
    pts = P.read_all().astype(np.float64)
    cs = C.centers.astype(np.float64)
    A = MultiAssignment.empty(P.count, 1)
    for i in range(P.count):
        d = np.sum((cs - pts[i]) ** 2, axis=1)
        A.ids[i, 0] = int(np.argmin(d))
        A.dists[i, 0] = d[A.ids[i, 0]]
    return A


# -- score -----------------------------------------------------------------


def test_score_two_points_one_center():
    P = _vs([[0.0, 0.0], [2.0, 0.0]])
    C = CentersState(centers=np.array([[1.0, 0.0]], np.float32))
    A = MultiAssignment.empty(2, 1)
    A.ids[:, 0] = 0
    assert kmeans.score(P, A, C) == 2.0


def test_score_zero_when_points_on_centers(rng):
    pts = rng.normal(size=(10, 3)).astype(np.float32)
    P = _vs(pts)
    C = CentersState(centers=pts.copy())
    A = MultiAssignment.empty(10, 1)
    A.ids[:, 0] = np.arange(10)
    assert kmeans.score(P, A, C) == 0.0


def test_score_matches_brute_objective(rng):
    pts = rng.normal(size=(500, 6)).astype(np.float32)
    P = _vs(pts)
    C = CentersState(centers=pts[rng.choice(500, 20, replace=False)].copy())
    A = _assign_exact(P, C)
    brute = sum(metric.nearest_brute(p, C.centers, 1)[0][1] for p in pts)
    assert kmeans.score(P, A, C) == pytest.approx(brute, rel=1e-6)


def test_score_requires_full_assignment():
    P = _vs(np.zeros((3, 2)))
    C = CentersState(centers=np.zeros((1, 2), np.float32))
    A = MultiAssignment.empty(3, 1)  # ids left at -1
    with pytest.raises(ContractViolation):
        kmeans.score(P, A, C)


# -- initializations -------------------------------------------------------


def test_init_uniform_k_equals_n(rng):
    pts = rng.normal(size=(25, 4)).astype(np.float32)
    C = kmeans.init_uniform(_vs(pts), 25, 3)
    got = {tuple(r) for r in C.centers.tolist()}
    want = {tuple(r) for r in pts.tolist()}
    assert got == want


def test_init_uniform_deterministic(rng):
    P = _vs(rng.normal(size=(100, 4)))
    a = kmeans.init_uniform(P, 10, 5).centers
    b = kmeans.init_uniform(P, 10, 5).centers
    assert a.tobytes() == b.tobytes()


def test_init_uniform_selection_frequencies():
    pts = np.arange(10, dtype=np.float32)[:, None]
    P = _vs(pts)
    counts = np.zeros(10)
    n_seeds = 100
    for seed in range(n_seeds):
        v = float(kmeans.init_uniform(P, 1, seed).centers[0, 0])
        counts[int(v)] += 1
    p = 0.1
    sigma = np.sqrt(n_seeds * p * (1 - p))
    assert np.all(np.abs(counts - n_seeds * p) <= 3 * sigma)


def test_init_uniform_rejects_oversized_k():
    with pytest.raises(ContractViolation):
        kmeans.init_uniform(_vs(np.zeros((3, 2))), 4, 0)


def test_init_kmeanspp_k1_is_uniform_draw(rng):
    pts = rng.normal(size=(50, 3)).astype(np.float32)
    C = kmeans.init_kmeanspp(_vs(pts), 1, 9)
    assert any(np.array_equal(C.centers[0], p) for p in pts)


def test_init_kmeanspp_zero_weight_locations_not_repeated():
    # 4 distinct locations, each duplicated 5x: D^2 weight vanishes at chosen
    # locations, so the first 4 draws must all be distinct
    locs = np.array([[0.0], [10.0], [20.0], [30.0]], np.float32)
    pts = np.repeat(locs, 5, axis=0)
    for seed in range(10):
        C = kmeans.init_kmeanspp(_vs(pts), 4, seed)
        assert len({float(c) for c in C.centers[:, 0]}) == 4


def test_init_kmeanspp_beats_uniform_on_average():
    P = gen_gaussian_mixture(1000, 8, 10, 0.01, 1)
    pp, uni = [], []
    for seed in range(20):
        for init, out in [(kmeans.init_kmeanspp, pp), (kmeans.init_uniform, uni)]:
            C = init(P, 10, seed)
            out.append(kmeans.exact_score(P, C))
    assert np.mean(pp) <= np.mean(uni)


# -- exact Lloyd -----------------------------------------------------------


def test_lloyd_hand_case():
    P = _vs([[0.0], [1.0], [8.0], [9.0]])
    C = CentersState(centers=np.array([[1.0], [8.0]], np.float32))
    C2, A, stats = kmeans.lloyd_exact_iteration(P, C)
    np.testing.assert_array_equal(C2.centers, [[0.5], [8.5]])
    # score after recompute-then-assign
    assert kmeans.exact_score(P, C2) == 1.0


def test_lloyd_fixed_point():
    P = _vs([[0.0], [1.0], [8.0], [9.0]])
    C = CentersState(centers=np.array([[0.5], [8.5]], np.float32))
    _, A, _ = kmeans.lloyd_exact_iteration(P, C)
    C2, _, stats = kmeans.lloyd_exact_iteration(P, C, prev=A)
    assert stats.reassigned_count == 0
    np.testing.assert_array_equal(C2.centers, C.centers)


def test_lloyd_monotone(rng):
    P = _vs(rng.normal(size=(2000, 8)))
    C = kmeans.init_uniform(P, 50, 0)
    prev = np.inf
    for _ in range(20):
        C, _, stats = kmeans.lloyd_exact_iteration(P, C)
        assert stats.score <= prev * (1 + 1e-6)
        prev = stats.score


def test_lloyd_empty_cluster_keeps_coords():
    # second center is far away and captures nothing; it must not move
    P = _vs([[0.0], [1.0]])
    C = CentersState(centers=np.array([[0.0], [100.0]], np.float32))
    C2, _, _ = kmeans.lloyd_exact_iteration(P, C)
    assert float(C2.centers[1, 0]) == 100.0


# -- black-box engine ------------------------------------------------------


def test_blackbox_full_beam_equals_exact(rng):
    pts = rng.normal(size=(400, 8)).astype(np.float32)
    P = _vs(pts)
    C = kmeans.init_uniform(P, 30, 1)
    sp = SearchParams(beam_width=30, result_count=1)
    bp = BuildParams(ef_build=30, M=12)
    Ce, Ae, _ = kmeans.lloyd_exact_iteration(P, C)
    Cb, Ab, _, _ = kmeans.blackbox_iteration(P, C, sp, bp, avoid_regress=False)
    np.testing.assert_array_equal(Ab.best_ids, Ae.best_ids)
    assert Cb.centers.tobytes() == Ce.centers.tobytes()


def test_blackbox_avoid_regress_keeps_closer_prev():
    ids, ds = kmeans._merge_prev_best([4], [2.0], prev_id=7, prev_dist=1.0, m=2)
    assert ids[0] == 7 and ds[0] == 1.0


def test_blackbox_monotone_with_guard(rng):
    pts = rng.normal(size=(1500, 8)).astype(np.float32)
    P = _vs(pts)
    C = kmeans.init_uniform(P, 40, 2)
    sp = SearchParams(beam_width=6, result_count=3)
    bp = BuildParams(ef_build=16, M=6)
    A = None
    prev_score = np.inf
    for _ in range(20):
        C, A, stats, _ = kmeans.blackbox_iteration(P, C, sp, bp,
                                                   avoid_regress=True, prev=A)
        assert stats.score <= prev_score * (1 + 1e-6)
        prev_score = stats.score


def test_assignment_distance_dominance(rng):
    pts = rng.normal(size=(800, 8)).astype(np.float32)
    P = _vs(pts)
    C = kmeans.init_uniform(P, 30, 4)
    sp = SearchParams(beam_width=4, result_count=2)
    bp = BuildParams(ef_build=12, M=6)
    _, A, _, _ = kmeans.blackbox_iteration(P, C, sp, bp)
    before = A.best_dists.copy()
    # re-run reassignment against the SAME centers: guarded distances may not rise
    _, A2, _, _ = kmeans.blackbox_iteration(P, C, sp, bp, avoid_regress=True, prev=A)
    assert np.all(A2.best_dists <= before)


# -- SHEESH engine ---------------------------------------------------------


def test_sheesh_full_beam_equals_exact(rng):
    pts = rng.normal(size=(400, 8)).astype(np.float32)
    P = _vs(pts)
    C = kmeans.init_uniform(P, 25, 1)
    sp = SearchParams(beam_width=25, result_count=10)
    bp = BuildParams(ef_build=25, M=10)
    opts = EngineOptions(avoid_regress=False)
    Ce, Ae, _ = kmeans.lloyd_exact_iteration(P, C)
    Cs, S, _, _ = kmeans.sheesh_iteration(P, C, None, None, sp, bp, opts)
    np.testing.assert_array_equal(S.best_ids, Ae.best_ids)
    assert Cs.centers.tobytes() == Ce.centers.tobytes()


def test_sheesh_fixed_point(rng):
    pts = rng.normal(size=(300, 4)).astype(np.float32)
    P = _vs(pts)
    C = kmeans.init_uniform(P, 10, 0)
    for _ in range(30):
        C, _, stats = kmeans.lloyd_exact_iteration(P, C)
        if stats.reassigned_count == 0:
            break
    sp = SearchParams(beam_width=10, result_count=5)
    bp = BuildParams(ef_build=10, M=5)
    C1, S, _, g = kmeans.sheesh_iteration(P, C, None, None, sp, bp)
    C2, S2, stats, _ = kmeans.sheesh_iteration(P, C1, S, g, sp, bp)
    assert C2.centers.tobytes() == C1.centers.tobytes()
    np.testing.assert_array_equal(S2.ids, S.ids)
    assert stats.reassigned_count == 0


def test_sheesh_monotone_with_guard(rng):
    pts = rng.normal(size=(1500, 8)).astype(np.float32)
    P = _vs(pts)
    C = kmeans.init_uniform(P, 40, 3)
    sp = SearchParams(beam_width=8, min_iterations=5, result_count=5)
    bp = BuildParams(ef_build=16, M=6)
    S, g = None, None
    prev_score = np.inf
    for it in range(20):
        C, S, stats, g = kmeans.sheesh_iteration(P, C, S, g, sp, bp,
                                                 projection_seed=it)
        assert stats.score <= prev_score * (1 + 1e-6)
        prev_score = stats.score


def test_multiassignment_consistency(rng):
    pts = rng.normal(size=(600, 8)).astype(np.float32)
    P = _vs(pts)
    C = kmeans.init_uniform(P, 30, 5)
    sp = SearchParams(beam_width=10, result_count=5)
    bp = BuildParams(ef_build=16, M=6)
    _, S, _, _ = kmeans.sheesh_iteration(P, C, None, None, sp, bp)
    for i in range(P.count):
        for j in range(S.ids.shape[1]):
            cid = S.ids[i, j]
            if cid < 0:
                continue
            want = metric.sq_l2(pts[i], C.centers[cid])
            assert S.dists[i, j] == pytest.approx(want, rel=1e-5, abs=1e-7)
    # rows ascending, first entry is the assignment
    finite = np.where(S.ids >= 0, S.dists, np.inf)
    assert np.all(np.diff(finite, axis=1) >= 0)


def test_permutation_invariance_of_exact_engine(rng):
    pts = rng.normal(size=(500, 6)).astype(np.float32)
    P = _vs(pts)
    C = kmeans.init_uniform(P, 20, 6)
    perm = rng.permutation(20)
    Ca, Cb = C, CentersState(centers=C.centers[perm].copy())
    for _ in range(8):
        Ca, _, sa = kmeans.lloyd_exact_iteration(P, Ca)
        Cb, _, sb = kmeans.lloyd_exact_iteration(P, Cb)
        assert sa.score == pytest.approx(sb.score, rel=1e-9)


# -- driver ----------------------------------------------------------------


def _config(P, **kw):
    from sheesh.cli import RunConfig
    base = dict(dataset=P, k=10, engine="lloyd", seed=0, max_iterations=20,
                ef_build=16, M=6, ef_search=8, min_iterations=3,
                num_prev_assignments=4, output=None)
    base.update(kw)
    return RunConfig(**base)


def test_run_clustering_zero_iterations(rng):
    P = _vs(rng.normal(size=(200, 4)))
    rows, _ = kmeans.run_clustering(_config(P, max_iterations=0))
    assert len(rows) == 1
    assert rows[0].iteration == 0


def test_run_clustering_stops_at_convergence(rng):
    P = _vs(rng.normal(size=(200, 4)))
    rows, C = kmeans.run_clustering(_config(P, max_iterations=100))
    assert rows[-1].reassigned_count == 0
    # a rerun on an already-converged instance stops almost immediately
    rows2, _ = kmeans.run_clustering(_config(_vs(C.centers), k=10, max_iterations=100))
    assert len(rows2) <= 3


def test_run_clustering_time_limit_completion(rng):
    P = _vs(rng.normal(size=(500, 4)))
    rows, _ = kmeans.run_clustering(_config(P, time_limit_seconds=0.0))
    assert len(rows) == 2  # init row + the single completed iteration


def test_run_clustering_rejects_bad_k(rng):
    P = _vs(rng.normal(size=(5, 2)))
    with pytest.raises(ContractViolation):
        kmeans.run_clustering(_config(P, k=10))
