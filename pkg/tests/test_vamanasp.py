import math

import numpy as np
import pytest

from sheesh import vamanasp
from sheesh.errors import ContractViolation
from sheesh.vamanasp import AlphaParams, ProjectionSeeder

from conftest import brute_nn_ids


def euclid(a, b):
    return float(np.linalg.norm(np.asarray(a, np.float64) - np.asarray(b, np.float64)))


# -- construction ----------------------------------------------------------


def test_build_collinear_pruning():
    pts = np.array([[0.0], [9.0], [10.0]], np.float32)
    ag = vamanasp.build_slow(pts, AlphaParams(alpha=2.0))
    # from 0: keep 0->9; then 2*D(9,10)=2 <= D(0,10)=10 prunes 0->10
    assert ag.adjacency[0].tolist() == [1]


def test_build_two_points_mutual():
    pts = np.array([[0.0, 0.0], [3.0, 4.0]], np.float32)
    for alpha in [1.1, 2.0, 10.0]:
        ag = vamanasp.build_slow(pts, AlphaParams(alpha=alpha))
        assert ag.adjacency[0].tolist() == [1]
        assert ag.adjacency[1].tolist() == [0]


def test_build_rejects_duplicates():
    pts = np.array([[1.0], [1.0], [2.0]], np.float32)
    with pytest.raises(ContractViolation):
        vamanasp.build_slow(pts, AlphaParams())


def test_build_rejects_oversized_input(rng):
    pts = rng.normal(size=(10, 2)).astype(np.float32)
    with pytest.raises(ContractViolation):
        vamanasp.build_slow(pts, AlphaParams(), point_cap=5)


def test_alpha_params_validation():
    with pytest.raises(ContractViolation):
        AlphaParams(alpha=1.0)
    with pytest.raises(ContractViolation):
        AlphaParams(epsilon=0.0)
    assert AlphaParams(alpha=2.0, epsilon=0.5).target_ratio == 3.5


def test_aspect_ratio_exact():
    pts = np.array([[0.0], [1.0], [5.0]], np.float32)
    ag = vamanasp.build_slow(pts, AlphaParams())
    assert ag.aspect_ratio == 5.0  # D_max=5, D_min=1


def test_pruning_soundness_random(rng):
    pts = rng.normal(size=(128, 6)).astype(np.float32)
    ag = vamanasp.build_slow(pts, AlphaParams(alpha=1.5))
    assert vamanasp.check_pruning_soundness(ag)


def test_robustness_from_every_start(rng):
    ap = AlphaParams(alpha=2.0, epsilon=0.5)
    pts = rng.normal(size=(256, 8)).astype(np.float32)
    ag = vamanasp.build_slow(pts, ap)
    queries = rng.normal(size=(100, 8)).astype(np.float32)
    truth = brute_nn_ids(pts, queries)
    for q, t in zip(queries, truth):
        d_exact = euclid(q, pts[t])
        for start in range(256):
            best, _ = vamanasp.greedy_search_counted(ag, q, start)
            assert euclid(q, pts[best]) <= ap.target_ratio * d_exact + 1e-6


# -- greedy search ---------------------------------------------------------


def test_greedy_query_at_start():
    pts = np.array([[0.0], [5.0], [9.0]], np.float32)
    ag = vamanasp.build_slow(pts, AlphaParams())
    best, visits = vamanasp.greedy_search_counted(ag, np.array([5.0], np.float32), 1)
    assert best == 1 and visits == 1


def test_greedy_two_nodes():
    pts = np.array([[0.0], [10.0]], np.float32)
    ag = vamanasp.build_slow(pts, AlphaParams())
    best, visits = vamanasp.greedy_search_counted(ag, np.array([9.0], np.float32), 0)
    assert best == 1 and visits <= 2


def test_greedy_rejects_bad_start():
    pts = np.array([[0.0], [1.0]], np.float32)
    ag = vamanasp.build_slow(pts, AlphaParams())
    with pytest.raises(ContractViolation):
        vamanasp.greedy_search_counted(ag, np.zeros(1, np.float32), 5)


def test_visit_counts_logarithmically_bounded(rng):
    # frozen constant: measured max over this fixed instance was well under
    # 4x the theoretical log term at freeze time
    ap = AlphaParams(alpha=2.0, epsilon=0.25)
    pts = rng.normal(size=(256, 8)).astype(np.float32)
    ag = vamanasp.build_slow(pts, ap)
    bound_term = math.log(ag.aspect_ratio / ((ap.alpha - 1) * ap.epsilon), ap.alpha)
    worst = 0
    for _ in range(1000):
        q = rng.normal(size=8).astype(np.float32)
        start = int(rng.integers(256))
        _, visits = vamanasp.greedy_search_counted(ag, q, start)
        worst = max(worst, visits)
    assert worst <= 4.0 * bound_term


# -- seeded search ---------------------------------------------------------


def test_seeded_exact_nn_met_at_first_visit(rng):
    pts = rng.normal(size=(64, 4)).astype(np.float32)
    ag = vamanasp.build_slow(pts, AlphaParams())
    q = rng.normal(size=4).astype(np.float32)
    t = int(brute_nn_ids(pts, q[None])[0])
    res = vamanasp.seeded_greedy_search(ag, q, t)
    assert res.delta == pytest.approx(0.0, abs=1e-6)
    assert res.guarantee_met


def test_visit_bound_formula():
    # alpha = 2, delta = 1, epsilon = 0.5 -> ceil(log2 4) = 2
    assert math.ceil(math.log((1 + 1) / 0.5, 2)) == 2
    pts = np.array([[0.0], [2.0], [3.0]], np.float32)
    ag = vamanasp.build_slow(pts, AlphaParams(alpha=2.0, epsilon=0.5))
    q = np.array([-1.0], np.float32)  # exact NN dist 1; seed 2 at dist 3 -> delta 2
    res = vamanasp.seeded_greedy_search(ag, q, 1)
    assert res.visit_bound == math.ceil(math.log((1 + res.delta) / 0.5, 2))


def test_consistency_guarantee_2000_trials(rng):
    ap = AlphaParams(alpha=2.0, epsilon=0.25)
    pts = rng.normal(size=(512, 8)).astype(np.float32)
    ag = vamanasp.build_slow(pts, ap)
    trials = 0
    while trials < 2000:
        q = rng.normal(size=8).astype(np.float32)
        seed = int(rng.integers(512))
        res = vamanasp.seeded_greedy_search(ag, q, seed, ap)
        if res.delta > 3.0:
            continue
        assert res.guarantee_met
        trials += 1


# -- projection seeding ----------------------------------------------------


def test_projection_seed_singleton():
    pts = np.array([[4.0, 2.0]], np.float32)
    assert vamanasp.projection_seed(pts, np.array([0.0, 0.0], np.float32), 0) == 0


def test_projection_seed_member_query(rng):
    pts = rng.normal(size=(30, 5)).astype(np.float32)
    seeder = ProjectionSeeder(pts, 3)
    for i in [0, 7, 29]:
        s = seeder.query(pts[i])
        assert float(pts[s] @ seeder.direction) == pytest.approx(
            float(pts[i] @ seeder.direction), abs=1e-6)


def test_projection_seed_beats_random_seed(rng):
    pts = rng.normal(size=(1000, 16)).astype(np.float32)
    seeder = ProjectionSeeder(pts, 11)
    proj_ratios, rand_ratios = [], []
    for _ in range(500):
        q = rng.normal(size=16).astype(np.float32)
        t = int(brute_nn_ids(pts, q[None])[0])
        d_exact = euclid(q, pts[t])
        if d_exact == 0:
            continue
        proj_ratios.append(euclid(q, pts[seeder.query(q)]) / d_exact)
        rand_ratios.append(euclid(q, pts[int(rng.integers(1000))]) / d_exact)
    assert np.median(proj_ratios) <= np.median(rand_ratios)
