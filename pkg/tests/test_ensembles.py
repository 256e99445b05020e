import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from circlaw.ensembles import (
    KINDS,
    SIGN_SYMMETRIC,
    EnsembleSpec,
    covariance_oracle,
    mean_oracle,
    radial_example_sampler,
    radial_fibre_radius,
    row_stream,
    sample_matrix,
    sample_rows,
    stream,
    whitening_matrix,
)


def _spec(kind, **kw):
    if kind in ("radial_example", "slab"):
        kw.setdefault("d", 1)
    if kind.startswith("correlated"):
        kw.setdefault("rho", 0.3)
    return EnsembleSpec(kind, **kw)


@pytest.mark.parametrize("kind", KINDS)
def test_matrix_is_deterministic(kind):
    s = _spec(kind, seed=7)
    a = sample_matrix(s, 12, trial=3).entries
    b = sample_matrix(s, 12, trial=3).entries
    assert a.shape == (12, 12)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, sample_matrix(s, 12, trial=4).entries)


def test_rows_regenerate_independently():
    s = EnsembleSpec("sphere_rows", seed=11)
    a = sample_matrix(s, 9, trial=2).entries
    row5 = sample_rows(s, 9, 1, row_stream(11, 2, 5))[0]
    np.testing.assert_array_equal(a[5], row5)


def test_rectangular_matrix():
    a = sample_matrix(EnsembleSpec("ginibre"), 4, 10).entries
    assert a.shape == (4, 10)


def test_stream_keys():
    a = stream(1, "x", 2).standard_normal(3)
    np.testing.assert_array_equal(a, stream(1, "x", 2).standard_normal(3))
    assert not np.array_equal(a, stream(1, "y", 2).standard_normal(3))


@pytest.mark.parametrize("bad", [
    dict(kind="nope"),
    dict(kind="bernoulli_pm", p=1.0),
    dict(kind="correlated_gaussian", rho=1.0),
    dict(kind="radial_example", alpha=0.0),
    dict(kind="slab", eps=0.0),
    dict(kind="ginibre", scale=0.0),
    dict(kind="ginibre", seed=-1),
    dict(kind="ginibre", structure="band"),
])
def test_invalid_specs(bad):
    with pytest.raises(ValueError):
        EnsembleSpec(**bad)


def test_equicorrelation_not_positive_definite():
    s = EnsembleSpec("correlated_gaussian", rho=-0.3, structure="equi")
    with pytest.raises(ValueError, match="positive definite"):
        s.validate_for(10)


def test_non_default_items_roundtrip():
    s = EnsembleSpec("correlated_gaussian", seed=4, rho=0.5)
    assert s.non_default_items() == {"kind": "correlated_gaussian", "seed": 4, "rho": 0.5}
    assert EnsembleSpec(**s.non_default_items()) == s


def test_sphere_and_ball_support():
    rng = np.random.default_rng(0)
    x = sample_rows(EnsembleSpec("sphere_rows"), 30, 50, rng)
    np.testing.assert_allclose(np.linalg.norm(x, axis=1), math.sqrt(30))
    y = sample_rows(EnsembleSpec("ball_rows"), 30, 500, rng)
    assert np.all(np.linalg.norm(y, axis=1) <= math.sqrt(32) + 1e-12)


@pytest.mark.parametrize("kind", ["ginibre", "uniform_entries", "bernoulli_pm", "sphere_rows", "ball_rows"])
def test_unit_second_moment(kind):
    x = sample_rows(EnsembleSpec(kind), 8, 40000, np.random.default_rng(1))
    np.testing.assert_allclose(x.mean(axis=0), 0.0, atol=0.03)
    np.testing.assert_allclose((x * x).mean(axis=0), 1.0, atol=0.05)


def test_bernoulli_pm_asymmetric_is_standardised():
    x = sample_rows(EnsembleSpec("bernoulli_pm", p=0.2), 5, 40000, np.random.default_rng(2))
    assert x.mean() == pytest.approx(0.0, abs=0.02)
    assert (x * x).mean() == pytest.approx(1.0, abs=0.02)


@pytest.mark.parametrize("spec", [
    EnsembleSpec("correlated_gaussian", rho=0.5),
    EnsembleSpec("correlated_gaussian", rho=0.2, structure="equi"),
    EnsembleSpec("correlated_bernoulli_pm", rho=0.4),
    EnsembleSpec("correlated_bernoulli_pm", rho=0.4, whiten=True),
    EnsembleSpec("bernoulli01", p=0.3),
    EnsembleSpec("ginibre", shift=0.5, scale=2.0),
])
def test_covariance_oracle_matches_samples(spec):
    n = 6
    x = sample_rows(spec, n, 60000, np.random.default_rng(3))
    emp = x.T @ x / len(x)
    np.testing.assert_allclose(emp, covariance_oracle(spec, n).matrix, atol=0.04)
    np.testing.assert_allclose(x.mean(axis=0), mean_oracle(spec, n), atol=0.03)


def test_correlated_bernoulli_values():
    x = sample_rows(EnsembleSpec("correlated_bernoulli_pm", rho=0.5), 4, 10, np.random.default_rng(0))
    assert set(np.unique(x)) <= {-1.0, 1.0}


def test_covariance_oracle_callable():
    f = covariance_oracle(EnsembleSpec("correlated_gaussian", rho=0.5), 5)
    assert f(0, 2) == pytest.approx(0.25)
    assert f(3, 3) == 1.0


@pytest.mark.parametrize("kind", SIGN_SYMMETRIC)
def test_sign_symmetric_kinds_have_identity_second_moment(kind):
    m = covariance_oracle(EnsembleSpec(kind), 7).matrix
    np.testing.assert_array_equal(m, np.eye(7))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.floats(-0.9, 0.9))
def test_whitening_identity(n, rho):
    idx = np.arange(n)
    C = rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)
    W = whitening_matrix(C)
    np.testing.assert_allclose(W.T @ W, np.linalg.inv(C), rtol=1e-7, atol=1e-7)
    np.testing.assert_allclose(W @ C @ W.T, np.eye(n), atol=1e-8)


def test_whitening_rejects_non_symmetric():
    with pytest.raises(ValueError):
        whitening_matrix(np.array([[1.0, 0.2], [0.0, 1.0]]))


def test_radial_example_fibre_constraint():
    n, d, alpha = 5, 2, 1.5
    x = radial_example_sampler(n, d, alpha, 5000, np.random.default_rng(4))
    r = np.linalg.norm(x[:, : n - d], axis=1)
    y = np.linalg.norm(x[:, n - d:], axis=1)
    assert np.all(y <= radial_fibre_radius(r, n, d, alpha) * (1 + 1e-12))
    # P(r <= 1) = alpha / (1 + alpha)
    assert np.mean(r <= 1) == pytest.approx(alpha / (1 + alpha), abs=0.02)


def test_duplicate_row():
    a = sample_matrix(EnsembleSpec("ginibre", duplicate_row=True), 6).entries
    np.testing.assert_array_equal(a[0], a[-1])


def test_scale_power():
    s = EnsembleSpec("bernoulli_pm", scale_power=0.25)
    a = sample_matrix(s, 16).entries
    np.testing.assert_allclose(np.abs(a), 2.0)
