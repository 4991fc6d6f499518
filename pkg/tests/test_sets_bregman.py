import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from asmd.bregman import Entropy, Euclidean, bregman_distance, three_point_residual
from asmd.sets import Box, FullSpace, Simplex


def test_box_projection_clamps():
    np.testing.assert_array_equal(Box(0, 1).project(np.array([2.0, -1.0])), [1.0, 0.0])


def test_empty_box_rejected():
    with pytest.raises(ValueError):
        Box([0, 2], [1, 1])


def test_simplex_projection_symmetric_split():
    np.testing.assert_allclose(Simplex().project(np.array([0.6, 0.6])), [0.5, 0.5])


def test_projection_of_member_is_identity():
    x = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(Simplex().project(x), x, atol=1e-15)
    np.testing.assert_array_equal(Box(0, 1).project(x), x)
    np.testing.assert_array_equal(FullSpace().project(x), x)


def _simplex_projection_by_kkt(x, radius=1.0):
    # bisection on the threshold tau with sum(max(x - tau, 0)) = radius
    lo, hi = x.min() - radius, x.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.maximum(x - mid, 0).sum() > radius:
            lo = mid
        else:
            hi = mid
    return np.maximum(x - 0.5 * (lo + hi), 0)


@given(arrays(float, st.integers(1, 12), elements=st.floats(-50, 50)))
def test_simplex_projection_matches_bisection(x):
    p = Simplex().project(x)
    assert Simplex().contains(p, 1e-9)
    np.testing.assert_allclose(p, _simplex_projection_by_kkt(x), atol=1e-9)


def test_euclidean_distance_example():
    assert bregman_distance(Euclidean(), [1.0, 0.0], [0.0, 0.0]) == 0.5


def test_entropy_distance_examples():
    assert bregman_distance(Entropy(), [0.5, 0.5], [0.5, 0.5]) == 0.0
    assert bregman_distance(Entropy(), [1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)


def test_entropy_rejects_bad_points():
    with pytest.raises(ValueError):
        bregman_distance(Entropy(), [0.5, 0.5], [1.0, 0.0])
    with pytest.raises(ValueError):
        bregman_distance(Entropy(), [-0.1, 1.1], [0.5, 0.5])


def test_entropy_distance_matches_definition(rng):
    h = Entropy()
    for _ in range(100):
        x, y = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
        direct = h.value(x) - h.value(y) - h.grad(y) @ (x - y)
        assert bregman_distance(h, x, y) == pytest.approx(direct, abs=1e-12)


def test_three_point_identity_degenerate():
    x = np.array([0.2, 0.8])
    assert three_point_residual(Entropy(), x, x, x) == 0.0
    assert three_point_residual(Euclidean(), x, x, x) == 0.0


def test_smoothness_flags():
    assert Euclidean().smoothness == 1.0 and Euclidean().is_smooth
    assert not Entropy().is_smooth


@settings(max_examples=200)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_strong_convexity_lower_bound(d, seed):
    r = np.random.default_rng(seed)
    x, y = r.dirichlet(np.ones(d)), r.dirichlet(np.ones(d))
    for h in (Euclidean(), Entropy()):
        assert bregman_distance(h, x, y) >= 0.5 * float((x - y) @ (x - y)) - 1e-12


@settings(max_examples=200)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_three_point_identity_random(d, seed):
    r = np.random.default_rng(seed)
    x, y, z = (r.dirichlet(np.ones(d)) for _ in range(3))
    assert three_point_residual(Entropy(), x, y, z) <= 1e-10
    x, y, z = (r.normal(size=d) * 10 for _ in range(3))
    assert three_point_residual(Euclidean(), x, y, z) <= 1e-10
