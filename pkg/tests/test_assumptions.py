import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from circlaw.assumptions import (
    a2_order1_value,
    check_a1,
    check_a2_order1,
    check_a2_order_k,
    check_a3,
    check_replacement_cond1,
    sigma_min_experiment,
    sigma_min_threshold,
    singleton_sum_order2,
    tail_companion,
    verdict_a1,
    verdict_a2_order1,
    verdict_a2_order_k,
    verdict_a3,
)
from circlaw.ensembles import SIGN_SYMMETRIC, EnsembleSpec


def test_a1_gaussian_fourth_moment_flat():
    # the max over 2n stratum means sits a little above E g^4 = 3
    r = check_a1(EnsembleSpec("ginibre"), 4, [32, 128], 40)
    assert r.verdict == "consistent-with-pass"
    assert all(2.7 < s < 4.0 for s in r.statistic)


def test_a1_bernoulli_exact():
    r = check_a1(EnsembleSpec("bernoulli_pm"), 6, [16, 64], 2)
    assert r.statistic == [1.0, 1.0]


def test_a1_flags_growing_scale():
    r = check_a1(EnsembleSpec("ginibre", scale_power=0.25), 4, [32, 512], 2)
    assert r.verdict == "flagged-fail"


@pytest.mark.parametrize("kind", SIGN_SYMMETRIC)
def test_a2_order1_exact_zero_for_sign_symmetric(kind):
    r = check_a2_order1(EnsembleSpec(kind), [16, 64, 256])
    assert r.statistic == [0.0, 0.0, 0.0]
    assert r.verdict == "consistent-with-pass"


def test_a2_order1_ar1_limit():
    r = check_a2_order1(EnsembleSpec("correlated_gaussian", rho=0.5), [64, 256, 1024])
    assert r.verdict == "flagged-fail"
    assert r.statistic[-1] == pytest.approx(2.0, abs=0.01)
    # exact finite-n value: sum_{j != l} 0.5^|j-l| = 2 (n - 2 + 2^(1-n))
    n = 64
    assert a2_order1_value(EnsembleSpec("correlated_gaussian", rho=0.5), n) == pytest.approx(
        n * 2 * (n - 2 + 2.0 ** (1 - n)))


def test_a2_order1_whitened_bernoulli_is_zero():
    spec = EnsembleSpec("correlated_bernoulli_pm", rho=0.4, whiten=True)
    assert abs(check_a2_order1(spec, [32]).statistic[0]) < 1e-10


def test_a2_order1_nonzero_mean_flagged():
    assert check_a2_order1(EnsembleSpec("bernoulli01"), [16, 64]).verdict == "flagged-fail"


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(1, 4))
def test_singleton_sum_matches_brute_force(seed, r, c):
    x = np.random.default_rng(seed).standard_normal((r, c)).ravel()
    m = x.size
    total = 0.0
    for a in range(m):
        for b in range(m):
            for cc in range(m):
                for d in range(m):
                    idx = (a, b, cc, d)
                    if any(idx.count(v) == 1 for v in idx):
                        total += x[a] * x[b] * x[cc] * x[d]
    assert singleton_sum_order2(x) == pytest.approx(total, rel=1e-9, abs=1e-9)


def test_a2_order2_null_and_shifted():
    for kind in ("ginibre", "sphere_rows"):
        r = check_a2_order_k(EnsembleSpec(kind), 32, trials=60)
        assert abs(r.statistic[0]) < 3 * r.se[0]
        assert r.verdict == "inconclusive"
    r = check_a2_order_k(EnsembleSpec("ginibre", shift=0.5), 32, trials=20)
    assert r.statistic[0] > 0 and r.verdict == "flagged-fail"
    with pytest.raises(ValueError):
        check_a2_order_k(EnsembleSpec("ginibre"), 8, k=3)


def test_a3_verdicts():
    g = check_a3(EnsembleSpec("ginibre"), [64, 256, 1024], 0.5, 2)
    assert g.verdict == "consistent-with-pass"
    assert g.extra["row"][1] == 0.0
    s = check_a3(EnsembleSpec("sphere_rows"), [64, 256], 0.1, 2)
    assert s.extra["row"] == [0.0, 0.0]
    bad = check_a3(EnsembleSpec("ginibre", scale=2.0), [64, 256], 0.5, 2)
    assert bad.verdict == "flagged-fail"
    assert bad.statistic == [1.0, 1.0]


def test_verdicts_are_pure_functions_of_statistics():
    r = check_a3(EnsembleSpec("ginibre", scale=2.0), [32, 64], 0.5, 2)
    assert verdict_a3(r.extra["row"], r.extra["column"]) == r.verdict
    a = check_a1(EnsembleSpec("ginibre"), 4, [16, 32], 3)
    assert verdict_a1(a.statistic, a.se) == a.verdict


def test_verdict_rules():
    assert verdict_a1([1.0, 1.1], [0.01, 0.01]) == "consistent-with-pass"
    assert verdict_a1([1.0, 5.0], [0.01, 0.01]) == "flagged-fail"
    assert verdict_a2_order1([0.0, 0.0]) == "consistent-with-pass"
    assert verdict_a2_order1([0.5, 0.2, 0.1]) == "inconclusive"
    assert verdict_a2_order1([1.9, 2.0]) == "flagged-fail"
    assert verdict_a2_order_k(10.0, 1.0) == "flagged-fail"
    assert verdict_a2_order_k(1.0, 1.0) == "inconclusive"
    assert verdict_a3([0.1, 0.2], [0.0, 0.0]) == "flagged-fail"
    assert verdict_a3([0.3, 0.1], [0.2, 0.1]) == "inconclusive"


def test_report_rows_and_json():
    r = check_a2_order1(EnsembleSpec("ginibre"), [8, 16])
    rows = r.rows()
    assert rows[0]["assumption"] == "A2.1" and rows[1]["n"] == 16
    assert r.to_json()["verdict"] == r.verdict


def test_replacement_condition():
    assert check_replacement_cond1(EnsembleSpec("bernoulli_pm"), 32, 3)["max"] == 1.0
    g = check_replacement_cond1(EnsembleSpec("ginibre"), 256, 20)
    assert g["mean"] == pytest.approx(1.0, abs=0.05)
    b = check_replacement_cond1(EnsembleSpec("ball_rows"), 32, 5)
    assert b["max"] <= 34 / 32


def test_sigma_min_small():
    r = sigma_min_experiment(EnsembleSpec("ginibre"), [32], 20, delta_grid=[1e-3, 1e-2])[0]
    assert r["violations"] == 0
    assert r["threshold"] == pytest.approx(sigma_min_threshold(32))
    assert r["bound_holds"]
    dup = sigma_min_experiment(EnsembleSpec("ginibre", duplicate_row=True), [16], 5, delta_grid=[1e-3])[0]
    assert dup["violations"] == 5


def test_tail_companion_below_reference():
    rows = tail_companion(EnsembleSpec("ginibre"), 32, ds=(1, 2), cs=(0.5,), trials=300)
    for r in rows:
        assert r["empirical"] <= r["reference"]
    assert math.isfinite(rows[0]["reference"])
