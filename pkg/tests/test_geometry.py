import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from circlaw.geometry import (
    Subspace,
    VolumeTable,
    VolumeUnderflowWarning,
    ball_volume,
    dist_to_subspace,
    log_ball_volume,
    orthonormalize,
    proj_norm,
    random_subspace,
    unit_volume_sphere_radius,
)


def test_small_ball_volumes():
    assert ball_volume(1) == pytest.approx(2.0)
    assert ball_volume(2) == pytest.approx(math.pi)
    assert ball_volume(3) == pytest.approx(4 * math.pi / 3)
    assert ball_volume(3, 2.0) == pytest.approx(32 * math.pi / 3)
    assert ball_volume(0) == 1.0


def test_complex_convention():
    # unit ball of C^1 is the unit disk
    assert ball_volume(1, convention="complex") == pytest.approx(math.pi)
    assert ball_volume(2, convention="complex") == pytest.approx(math.pi**2 / 2)
    assert ball_volume(2, 3.0, "complex") == pytest.approx(math.pi**2 / 2 * 3.0**4)


def test_volume_underflow_warns():
    with pytest.warns(VolumeUnderflowWarning):
        assert ball_volume(2000, 0.5) == 0.0
    # log space stays finite
    assert np.isfinite(log_ball_volume(2000, 0.5))


def test_volume_rejects_bad_input():
    with pytest.raises(ValueError):
        ball_volume(-1)
    with pytest.raises(ValueError):
        ball_volume(2, -1.0)
    with pytest.raises(ValueError):
        ball_volume(2, convention="quaternion")


@given(st.integers(1, 400))
def test_log_volume_matches_gamma(m):
    expected = 0.5 * m * math.log(math.pi) - special.gammaln(0.5 * m + 1)
    assert log_ball_volume(m) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_volume_recursion():
    # V_m = 2 pi / m * V_{m-2}
    for m in range(3, 40):
        assert ball_volume(m) == pytest.approx(2 * math.pi / m * ball_volume(m - 2), rel=1e-12)


@pytest.mark.parametrize("m", [2, 3, 5, 10])
def test_unit_sphere_radius_real(m):
    r = unit_volume_sphere_radius(m)
    assert m * ball_volume(m) * r ** (m - 1) == pytest.approx(1.0)


@pytest.mark.parametrize("m", [1, 2, 4])
def test_unit_sphere_radius_complex(m):
    r = unit_volume_sphere_radius(m, "complex")
    assert 2 * m * ball_volume(m, convention="complex") * r ** (2 * m - 1) == pytest.approx(1.0)


def test_volume_table_caches():
    t = VolumeTable()
    assert t[2] == pytest.approx(math.pi)
    assert t.volume(3, 2.0) == pytest.approx(ball_volume(3, 2.0))
    assert 2 in t._cache


def test_orthonormalize_detects_rank():
    v = np.array([[1.0, 0, 0], [2.0, 0, 0], [0, 1.0, 1.0]])
    V = orthonormalize(v)
    assert V.dim == 2
    np.testing.assert_allclose(V.basis @ V.basis.T, np.eye(2), atol=1e-12)
    assert V.contains(np.array([3.0, 1.0, 1.0]))
    assert not V.contains(np.array([0.0, 1.0, 0.0]))


def test_orthonormalize_rank_is_scale_relative():
    v = 1e-12 * np.array([[1.0, 0.0], [0.0, 1.0]])
    assert orthonormalize(v).dim == 2


def test_empty_and_zero_inputs():
    assert orthonormalize(np.zeros((0, 4)), 4).dim == 0
    assert orthonormalize(np.zeros((2, 4))).dim == 0
    assert Subspace(3, np.zeros((0, 3))).complement().dim == 3


def test_dimension_mismatch_raises():
    V = orthonormalize(np.eye(3)[:2])
    with pytest.raises(ValueError):
        dist_to_subspace(np.ones(4), V)
    with pytest.raises(ValueError):
        proj_norm(np.ones(2), V)


def test_subspace_is_read_only():
    V = orthonormalize(np.eye(3)[:2])
    with pytest.raises(ValueError):
        V.basis[0, 0] = 5.0


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 12), st.data())
def test_projection_pythagoras(n, data):
    dim = data.draw(st.integers(0, n))
    seed = data.draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    V = random_subspace(n, dim, rng)
    x = rng.standard_normal((5, n))
    total = np.linalg.norm(x, axis=1) ** 2
    np.testing.assert_allclose(dist_to_subspace(x, V) ** 2 + proj_norm(x, V) ** 2, total, rtol=1e-10)
    C = V.complement()
    assert C.dim == n - dim
    np.testing.assert_allclose(proj_norm(x, C), dist_to_subspace(x, V), rtol=1e-9, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_projection_idempotent(seed):
    rng = np.random.default_rng(seed)
    V = random_subspace(7, 3, rng)
    x = rng.standard_normal(7)
    p = V.project(x)
    np.testing.assert_allclose(V.project(p), p, atol=1e-12)
    assert dist_to_subspace(p, V) == pytest.approx(0.0, abs=1e-12)


def test_random_subspace_is_rotation_invariant_in_law():
    # E |proj_W e_1|^2 = dim / n for Haar W
    rng = np.random.default_rng(0)
    e1 = np.eye(6)[0]
    vals = [proj_norm(e1, random_subspace(6, 2, rng)) ** 2 for _ in range(4000)]
    assert np.mean(vals) == pytest.approx(2 / 6, abs=0.02)


def test_no_warning_for_ordinary_volumes():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ball_volume(170, 1.0)
