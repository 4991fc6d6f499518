import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asmd.bregman import Entropy, Euclidean, bregman_distance
from asmd.data import chain_groups
from asmd.problem import L1Norm, OverlapGroupNorm, Zero
from asmd.prox import (OverlapGroups, ProxCertificationError, overlap_penalty_value, prox_entropy_simplex,
                       prox_indicator, prox_l1, prox_overlap_group, soft_threshold)
from asmd.sets import Box, Simplex

TWO_GROUPS = [[0, 1, 2], [2, 3, 4]]


def grid_prox_1d(v, theta, z0, lam, lo=-10.0, hi=10.0, step=1e-4):
    grid = np.arange(lo, hi + step / 2, step)
    obj = v * grid + lam * np.abs(grid) + 0.5 * theta * (grid - z0) ** 2
    return grid[np.argmin(obj)]


def test_prox_l1_example():
    res = prox_l1(np.array([-2.0, 0.5, 0.0]), 1.0, np.zeros(3), 1.0)
    np.testing.assert_array_equal(res.point, [1.0, 0.0, 0.0])
    assert res.certified_gap == 0


def test_prox_l1_identity_case(rng):
    z0 = rng.normal(size=4)
    np.testing.assert_array_equal(prox_l1(np.zeros(4), 2.0, z0, 0.0).point, z0)


def test_prox_l1_rejects_nonpositive_theta():
    for theta in (0.0, -1.0):
        with pytest.raises(ValueError):
            prox_l1(np.zeros(2), theta, np.zeros(2), 1.0)


@settings(max_examples=100, deadline=None)
# |x*| <= |z0| + (|v| + lam) / theta <= 9 keeps the minimiser inside the grid
@given(st.floats(-3, 3), st.floats(1, 5), st.floats(-3, 3), st.floats(0, 3))
def test_prox_l1_matches_grid(v, theta, z0, lam):
    x = prox_l1(np.array([v]), theta, np.array([z0]), lam).point[0]
    assert abs(x - grid_prox_1d(v, theta, z0, lam)) <= 1e-4 + 1e-12


def test_soft_threshold_is_odd(rng):
    x = rng.normal(size=50)
    np.testing.assert_array_equal(soft_threshold(-x, 0.3), -soft_threshold(x, 0.3))


def test_prox_indicator_examples():
    res = prox_indicator(np.zeros(2), 1.0, np.array([2.0, -1.0]), Box(0, 1))
    np.testing.assert_array_equal(res.point, [1.0, 0.0])
    res = prox_indicator(np.zeros(2), 1.0, np.array([0.6, 0.6]), Simplex())
    np.testing.assert_allclose(res.point, [0.5, 0.5])


def _exact_prox_objective(reg, gen, v, theta, z0, x):
    return float(v @ x) + reg.value(x) + theta * bregman_distance(gen, x, z0)


@pytest.mark.parametrize("case", ["l1", "box", "simplex", "entropy"])
def test_exact_prox_three_point_optimality(case, rng):
    d = 5
    for _ in range(20):
        v, theta = rng.normal(size=d), float(rng.uniform(0.1, 5))
        if case == "l1":
            reg, gen, cset = L1Norm(0.7), Euclidean(), None
            z0 = rng.normal(size=d)
            sample = lambda: rng.normal(size=d) * 3
        elif case == "box":
            reg, gen, cset = Zero(), Euclidean(), Box(-1, 1)
            z0 = rng.uniform(-1, 1, size=d)
            sample = lambda: rng.uniform(-1, 1, size=d)
        else:
            reg, cset = Zero(), Simplex()
            gen = Euclidean() if case == "simplex" else Entropy()
            z0 = rng.dirichlet(np.ones(d))
            sample = lambda: rng.dirichlet(np.ones(d))
        zs = reg.prox(v, theta, z0, gen, cset).point
        base = _exact_prox_objective(reg, gen, v, theta, z0, zs)
        for _ in range(100):
            x = sample()
            lhs = _exact_prox_objective(reg, gen, v, theta, z0, x)
            assert lhs >= base + theta * bregman_distance(gen, x, zs) - 1e-8


def test_entropy_prox_closed_form():
    z0 = np.array([0.25, 0.25, 0.5])
    v = np.array([1.0, 0.0, -1.0])
    p = prox_entropy_simplex(v, 2.0, z0).point
    expected = z0 * np.exp(-v / 2.0)
    np.testing.assert_allclose(p, expected / expected.sum(), rtol=1e-14)
    with pytest.raises(ValueError):
        prox_entropy_simplex(v, 2.0, np.array([0.0, 0.5, 0.5]))


# -- overlapping groups ------------------------------------------------------

def test_penalty_disjoint_groups():
    assert overlap_penalty_value(np.array([3.0, 4.0, 0.0, 0.0]), [[0, 1], [2, 3]]) == pytest.approx(5.0, abs=1e-12)


def test_penalty_single_group_support():
    val = overlap_penalty_value(np.array([0.0, 0.0, 1.0, 1.0, 0.0]), TWO_GROUPS)
    assert val == pytest.approx(math.sqrt(2), abs=1e-8)


def test_penalty_uncovered_coordinate_is_infinite():
    assert overlap_penalty_value(np.array([0.0, 0.0, 1.0]), [[0, 1]]) == math.inf
    assert overlap_penalty_value(np.array([1.0, 0.0, 0.0]), [[0, 1]]) == pytest.approx(1.0)


def brute_force_two_groups(x, n=200_001):
    # split the shared coordinate 2 as (t, x2 - t) and search t on a fine grid, then refine
    lo, hi = -abs(x[2]) - 1.0, abs(x[2]) + 1.0
    for _ in range(3):
        t = np.linspace(lo, hi, n)
        val = np.sqrt(x[0] ** 2 + x[1] ** 2 + t ** 2) + np.sqrt((x[2] - t) ** 2 + x[3] ** 2 + x[4] ** 2)
        k = int(np.argmin(val))
        span = (hi - lo) / (n - 1)
        lo, hi = t[k] - 2 * span, t[k] + 2 * span
    return float(val[k])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_penalty_matches_brute_force(seed):
    r = np.random.default_rng(seed)
    x = r.normal(size=5) * (r.random(5) < 0.8)
    assert overlap_penalty_value(x, TWO_GROUPS, tol=1e-10) == pytest.approx(brute_force_two_groups(x), abs=1e-8)


def test_penalty_bounds_bracket(rng):
    groups = chain_groups(30)
    for _ in range(50):
        x = rng.normal(size=30) * (rng.random(30) < 0.5)
        up, low = overlap_penalty_value(x, groups, tol=1e-9, return_bounds=True)
        assert low <= up + 1e-12 and up <= low + 1e-9
        # norm bounds: ||x||_2 <= Omega(x) <= ||x||_1
        assert np.linalg.norm(x) - 1e-9 <= up <= np.abs(x).sum() + 1e-9


def test_overlap_groups_validation():
    with pytest.raises(ValueError):
        OverlapGroups([[0, 5]], 3)
    with pytest.raises(ValueError):
        OverlapGroups([[]], 3)
    g = OverlapGroups(TWO_GROUPS, 5)
    assert g.shared.tolist() == [2]
    assert len(g.colour_blocks) == 2


def test_chain_groups_cover_and_tail():
    g = chain_groups(6)
    assert [grp.tolist() for grp in g.groups] == [[0, 1, 2], [2, 3, 4], [4, 5]]
    assert g.covered.all()
    assert [grp.tolist() for grp in chain_groups(5).groups] == [[0, 1, 2], [2, 3, 4]]
    assert [grp.tolist() for grp in chain_groups(1).groups] == [[0]]


def test_overlap_prox_disjoint_closed_form():
    w = np.array([3.0, 4.0, 0.0, 0.0])
    theta, lam = 2.0, 4.0
    res = prox_overlap_group(np.zeros(4), theta, w, lam, [[0, 1], [2, 3]], 1e-12)
    shrink = 1 - (lam / theta) / 5.0
    np.testing.assert_allclose(res.point, [3 * shrink, 4 * shrink, 0, 0], atol=1e-10)
    assert res.certified_gap <= 1e-12


def test_overlap_prox_single_group_support():
    w = np.array([0.0, 0.0, 0.0, 3.0, 4.0])
    res = prox_overlap_group(np.zeros(5), 1.0, w, 1.0, TWO_GROUPS, 1e-12)
    np.testing.assert_allclose(res.point, [0, 0, 0, 3 * 0.8, 4 * 0.8], atol=1e-8)


def _overlap_prox_objective(v, theta, z0, lam, groups, x):
    d = x - z0
    return float(v @ x) + lam * overlap_penalty_value(x, groups, tol=1e-12) + 0.5 * theta * float(d @ d)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_overlap_prox_against_self_referee(seed):
    r = np.random.default_rng(seed)
    v, z0 = r.normal(size=5) * 2, r.normal(size=5)
    theta, lam = float(r.uniform(0.5, 3)), float(r.uniform(0.1, 2))
    res = prox_overlap_group(v, theta, z0, lam, TWO_GROUPS, 1e-6)
    ref = prox_overlap_group(v, theta, z0, lam, TWO_GROUPS, 1e-12, max_iter=1_000_000)
    assert res.certified_gap <= 1e-6
    # theta-strong convexity: theta/2 ||x - x*||^2 <= certified gap, for both solves
    radius = math.sqrt(2 * res.certified_gap / theta) + math.sqrt(2 * ref.certified_gap / theta)
    assert np.linalg.norm(res.point - ref.point) <= radius + 1e-12
    # certificate soundness against the referee's value
    got = _overlap_prox_objective(v, theta, z0, lam, TWO_GROUPS, res.point)
    best = _overlap_prox_objective(v, theta, z0, lam, TWO_GROUPS, ref.point)
    assert got <= best + res.certified_gap + 1e-10


def test_overlap_prox_certificate_monotone(rng):
    groups = chain_groups(20)
    for _ in range(10):
        hist = []
        prox_overlap_group(rng.normal(size=20), 3.0, rng.normal(size=20), 0.5, groups, 1e-12, history=hist)
        assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_overlap_prox_budget_error(rng):
    with pytest.raises(ProxCertificationError) as info:
        prox_overlap_group(rng.normal(size=20), 1.0, rng.normal(size=20), 1.0, chain_groups(20), 1e-14, max_iter=1)
    assert info.value.best_gap > 1e-14


def test_overlap_prox_needs_positive_epsilon():
    with pytest.raises(ValueError):
        prox_overlap_group(np.zeros(5), 1.0, np.zeros(5), 1.0, TWO_GROUPS, 0.0)
    with pytest.raises(ValueError):
        OverlapGroupNorm(1.0, TWO_GROUPS, dim=5).prox(np.zeros(5), 1.0, np.zeros(5))


def test_overlap_prox_zero_weight_returns_target(rng):
    z0, v = rng.normal(size=5), rng.normal(size=5)
    res = prox_overlap_group(v, 2.0, z0, 0.0, TWO_GROUPS, 1e-6)
    np.testing.assert_array_equal(res.point, z0 - v / 2.0)


def test_overlap_prox_penalty_bound_scaled(rng):
    reg = OverlapGroupNorm(2.0, TWO_GROUPS, dim=5)
    res = reg.prox(rng.normal(size=5), 1.0, rng.normal(size=5), epsilon=1e-10)
    assert res.penalty_bound >= reg.value(res.point) - 1e-8


def test_overlap_prox_warm_start(rng):
    groups = chain_groups(20)
    reg = OverlapGroupNorm(0.5, groups)
    v, z0 = rng.normal(size=20), rng.normal(size=20)
    warm = {}
    cold = reg.prox(v, 2.0, z0, epsilon=1e-10, warm=warm)
    np.testing.assert_array_equal(warm["split"], cold.split)
    # a nearby problem started from the stored split is certified in fewer sweeps
    z1 = z0 + 1e-3 * rng.normal(size=20)
    hot = reg.prox(v, 2.0, z1, epsilon=1e-10, warm=warm)
    fresh = reg.prox(v, 2.0, z1, epsilon=1e-10)
    assert hot.certified_gap <= 1e-10 and hot.inner_iterations < fresh.inner_iterations
    assert np.linalg.norm(hot.point - fresh.point) <= 2 * math.sqrt(2e-10 / 2.0)
    with pytest.raises(ValueError, match="init_split"):
        prox_overlap_group(v, 2.0, z0, 0.5, groups, 1e-6, init_split=np.zeros(3))
