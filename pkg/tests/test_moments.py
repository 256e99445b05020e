import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from circlaw.ensembles import EnsembleSpec
from circlaw.moments import (
    BudgetError,
    DeltaGraphClass,
    GammaTree,
    MomentPolynomial,
    brute_force_classes,
    brute_force_moment_polynomial,
    canonical_class,
    catalan,
    class_table,
    empirical_trace_moment,
    enumerate_delta_classes,
    gamma_tree_from_class,
    moment_polynomial,
    restricted_growth,
    xi_n_estimate,
    xi_tree_sum,
)
from circlaw.spectra import mp_density


def path_tree(edges):
    return GammaTree(edges + 1, tuple((v, v + 1) if v % 2 == 0 else (v + 1, v) for v in range(edges)))


def test_restricted_growth():
    assert restricted_growth([5, 5, 2, 5, 9]) == (0, 0, 1, 0, 2)
    assert restricted_growth("abca") == (0, 1, 2, 0)


def test_k1_classes():
    classes = enumerate_delta_classes(1)
    assert len(classes) == 2
    assert sorted(c.n_up for c in classes) == [0, 1]


@pytest.mark.parametrize("k, coeffs", [(1, (1, 1)), (2, (2, 4, 1)), (3, (5, 15, 9, 1))])
def test_small_polynomials(k, coeffs):
    assert moment_polynomial(k).coefficients == coeffs


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_enumeration_matches_brute_force(k):
    assert moment_polynomial(k) == brute_force_moment_polynomial(k)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_enumerated_classes_are_brute_force_classes(k):
    # every enumerated class is realised by some concrete pair
    assert set(enumerate_delta_classes(k)) <= set(brute_force_classes(k))


def test_mu_values():
    assert moment_polynomial(1)(0.25) == pytest.approx(1.25)
    assert moment_polynomial(2)(1.0) == 7
    assert moment_polynomial(2).at_z(0.5 + 0.5j) == pytest.approx(2 + 4 * 0.5 + 0.25)


@pytest.mark.parametrize("k", range(1, 7))
def test_zero_shift_catalan_and_mp_moments(k):
    c0 = moment_polynomial(k).coefficients[0]
    assert c0 == catalan(k)
    p = 1.0
    m, _ = integrate.quad(lambda x: x**k * mp_density(x, p), 0, 4, limit=200)
    assert c0 == pytest.approx(m, rel=1e-6)


@pytest.mark.parametrize("k", range(1, 7))
def test_class_invariants(k):
    poly = moment_polynomial(k)
    assert poly.coefficients[-1] == 1
    assert all(isinstance(c, int) and c >= 0 for c in poly.coefficients)
    for c in enumerate_delta_classes(k):
        assert 2 * c.n_up + c.n_skew == 2 * k
        assert c.n_up == c.n_down
        assert c.canonical() == c
    rows = class_table(k)
    assert sum(r[3] for r in rows) == sum(poly.coefficients)


def test_budget():
    with pytest.raises(BudgetError):
        enumerate_delta_classes(11)
    with pytest.raises(BudgetError):
        brute_force_moment_polynomial(5)


def test_polynomial_json():
    assert moment_polynomial(2).to_json() == {"k": 2, "coefficients": [2, 4, 1]}


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.data())
def test_canonicalisation_idempotent_and_relabel_invariant(k, data):
    i = data.draw(st.lists(st.integers(0, 2 * k - 1), min_size=k, max_size=k))
    j = data.draw(st.lists(st.integers(0, 2 * k - 1), min_size=k, max_size=k))
    c = canonical_class(i, j)
    assert c.canonical() == c
    # relabel both alphabets with one bijection of the shared index set
    perm = data.draw(st.permutations(list(range(2 * k))))
    assert canonical_class([perm[x] for x in i], [perm[x] for x in j]) == c


def test_canonical_class_validates():
    with pytest.raises(ValueError):
        canonical_class([0, 1], [0])


@pytest.mark.parametrize("k", range(1, 6))
def test_every_class_gives_a_valid_gamma_tree(k):
    for c in enumerate_delta_classes(k):
        T = gamma_tree_from_class(c)
        assert len(T.edges) == c.n_skew // 2


def test_gamma_tree_partition_of_ordinary_path():
    U, D = path_tree(3).partition()
    assert U == {0, 2} and D == {1, 3}


def test_gamma_tree_rejects_bad_orientation():
    with pytest.raises(ValueError, match="U to D"):
        GammaTree(2, ((1, 0),))
    with pytest.raises(ValueError):
        GammaTree(3, ((0, 1),))          # not connected
    # two adjacent specials (m = 1) must have a consistently oriented edge; a
    # path of length 2 needs opposite end orientations
    GammaTree(3, ((0, 1), (2, 1)), special={0, 2})
    with pytest.raises(ValueError, match="parity"):
        GammaTree(3, ((0, 1), (1, 2)), special={0, 2})


def test_gamma_tree_root_rule():
    # ordinary root at distance 1 from a special vertex needs root -> special
    GammaTree(2, ((0, 1),), special={1})
    with pytest.raises(ValueError, match="parity"):
        GammaTree(2, ((1, 0),), special={1})


def test_xi_single_vertex_is_one():
    T = GammaTree(1, ())
    A = np.random.default_rng(0).standard_normal((10, 10))
    assert xi_tree_sum(T, A) == pytest.approx(1.0)


def test_xi_tree_sum_brute_force():
    A = np.random.default_rng(1).standard_normal((5, 5))
    T = path_tree(3)
    X2 = A * A
    n = 5
    total = 0.0
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    total += X2[a, b] * X2[c, b] * X2[c, d]
    assert xi_tree_sum(T, A) == pytest.approx(total / n**4)


def test_xi_one_edge_mean():
    r = xi_n_estimate(path_tree(1), EnsembleSpec("ginibre"), 64, 30)
    assert abs(r["mean"] - 1.0) < 3 * r["se"] + 1e-12


def test_xi_budget():
    with pytest.raises(BudgetError):
        xi_n_estimate(path_tree(7), EnsembleSpec("ginibre"), 16, 2)


def test_empirical_trace_moment_k1():
    m, se = empirical_trace_moment(EnsembleSpec("ginibre"), 128, 1, 0.5, 10)
    assert m == pytest.approx(1.25, rel=0.03)


def test_moment_polynomial_call():
    p = MomentPolynomial(2, (2, 4, 1))
    assert p(2.0) == 2 + 8 + 4
