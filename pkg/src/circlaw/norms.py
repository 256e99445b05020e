"""Tube norms of row densities and the probability bounds built on them.

For a row density ``f`` on R^n, a subspace ``W`` of dimension ``n - d`` and a
radius ``delta``, the tube norm ``|f|_{W,delta,1}`` is the integral over ``W``
of the average of ``f`` over the ``delta``-ball of ``W^perp``.  Every
estimator here goes through the exact identity

    P(|proj_{W^perp} X| <= delta) = V_d delta^d |f|_{W,delta,1},

so a norm estimate is a hit fraction divided by ``V_d delta^d``.  Standard
errors are binomial, scaled by the same constant.

The radial bound ``|f|_{d,delta,2}`` needs the sup of ``f`` over spheres
centred at 0.  It is available for the kinds with a closed-form profile:
``ginibre``, ``ball_rows`` and ``radial_example``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .ensembles import EnsembleSpec, _amplitude, radial_example_normaliser, sample_rows, stream
from .geometry import Subspace, ball_volume, log_ball_volume, orthonormalize, random_subspace

__all__ = [
    "MODES",
    "NormEstimate",
    "DegenerateRowsError",
    "tube_volume",
    "estimate_norm_fixed_W",
    "radial_example_closed_form",
    "distinguished_subspace",
    "estimate_norm_d_delta",
    "estimate_norm_family",
    "RadialProfile",
    "radial_sup_profile",
    "norm_d_delta_2",
    "sup_density",
    "density_bound",
    "check_prop28",
    "check_small_eigenvalue_bound",
    "norm_bound_chain",
    "scan_family",
    "default_delta_grid",
]

logger = logging.getLogger(__name__)

MODES = ("fixed_W", "random_W_from_rows")

_BATCH = 1 << 16
_MAX_RESAMPLE = 100


class DegenerateRowsError(RuntimeError):
    """Sampled rows kept failing to span a subspace of the requested dimension."""


@dataclass
class NormEstimate:
    value: float
    standard_error: float
    trials_X: int
    trials_W: int
    d: int
    delta: float
    mode: str
    convention: str = "real"
    hits: int = 0
    per_W: np.ndarray | None = field(default=None, repr=False)

    @property
    def probability(self) -> float:
        """Hit probability ``V_d delta^d * value``."""
        return self.value * tube_volume(self.d, self.delta)

    def as_row(self, kind: str, n: int) -> dict:
        return {"kind": kind, "n": n, "d": self.d, "delta": self.delta, "mode": self.mode,
                "value": self.value, "se": self.standard_error,
                "trials_X": self.trials_X, "trials_W": self.trials_W}


def tube_volume(d: int, delta: float) -> float:
    """Volume ``V_d delta^d`` of the ``delta``-ball in R^d."""
    return ball_volume(d, delta)


def _check_args(d, delta, trials):
    if int(d) != d or d < 1:
        raise ValueError(f"codimension d must be a positive integer, got {d!r}")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")


def _count_hits(spec, n, complement: Subspace, delta, trials, key) -> int:
    hits = 0
    done = 0
    batch = 0
    while done < trials:
        m = min(_BATCH, trials - done)
        X = sample_rows(spec, n, m, stream(spec.seed, *key, batch))
        r = np.linalg.norm(X @ complement.basis.T, axis=1)
        hits += int(np.count_nonzero(r <= delta))
        done += m
        batch += 1
    return hits


def estimate_norm_fixed_W(spec: EnsembleSpec, W: Subspace, d: int, delta: float, trials: int,
                          key=("norm_fixed",)) -> NormEstimate:
    """Monte Carlo ``|f|_{W,delta,1}`` for a fixed ``(n-d)``-dimensional ``W``.

    Atomic kinds are allowed, but the estimate then blows up as ``delta -> 0``.
    """
    _check_args(d, delta, trials)
    n = W.ambient_dim
    if W.dim != n - d:
        raise ValueError(f"W has dimension {W.dim}, expected n - d = {n - d}")
    hits = _count_hits(spec, n, W.complement(), delta, trials, tuple(key))
    vol = tube_volume(d, delta)
    p = hits / trials
    return NormEstimate(value=p / vol, standard_error=math.sqrt(p * (1 - p) / trials) / vol,
                        trials_X=trials, trials_W=1, d=d, delta=float(delta), mode="fixed_W", hits=hits)


def distinguished_subspace(n: int, d: int) -> Subspace:
    """``W`` spanned by the first ``n - d`` coordinates, so ``W^perp`` holds the last ``d``."""
    return Subspace(n, np.eye(n)[: n - d])


def radial_example_closed_form(n: int, d: int, alpha: float, delta: float) -> float:
    """Exact ``V_d delta^d |f|_{W,delta,1}`` for the radial example with
    ``W^perp`` the fibre directions.

    >>> round(radial_example_closed_form(4, 1, 1.0, 0.1), 5)
    0.3749
    """
    if not 0 < delta < 1:
        raise ValueError(f"closed form needs 0 < delta < 1, got {delta}")
    if not n > d >= 1:
        raise ValueError(f"need n > d >= 1, got n={n}, d={d}")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    coef = (1 / alpha + 1 / (n - d)) / (1 / alpha + 1)
    return coef * delta ** (d * alpha / (n + alpha - d))


def _row_spanned_complement(spec, n, d, rng) -> tuple[Subspace, int]:
    failures = 0
    while True:
        rows = sample_rows(spec, n, n - d, rng)
        V = orthonormalize(rows, n)
        if V.dim == n - d:
            return V.complement(), failures
        failures += 1
        logger.debug("rank-deficient row sample (%d consecutive)", failures)
        if failures >= _MAX_RESAMPLE:
            raise DegenerateRowsError(
                f"{failures} consecutive samples of {n - d} rows were rank deficient; "
                f"the row law of {spec.kind!r} looks atomic")


def estimate_norm_d_delta(spec: EnsembleSpec, n: int, d: int, delta: float, trials_W: int, trials_X: int,
                          key=("norm_rows",)) -> NormEstimate:
    """Average of the fixed-``W`` estimate over ``W`` spanned by ``n - d`` fresh rows.

    The standard error is the spread of the per-``W`` values, which accounts
    for both sampling levels.  Rank-deficient row draws are redrawn; after
    100 in a row :class:`DegenerateRowsError` is raised.
    """
    _check_args(d, delta, trials_X)
    if trials_W < 1:
        raise ValueError(f"trials_W must be >= 1, got {trials_W}")
    if not n > d:
        raise ValueError(f"need n > d, got n={n}, d={d}")
    key = tuple(key)
    vol = tube_volume(d, delta)
    per_W = np.empty(trials_W)
    hits = 0
    resampled = 0
    for w in range(trials_W):
        comp, fails = _row_spanned_complement(spec, n, d, stream(spec.seed, *key, "W", w))
        resampled += fails
        h = _count_hits(spec, n, comp, delta, trials_X, key + ("X", w))
        hits += h
        per_W[w] = h / trials_X / vol
    if resampled:
        logger.info("resampled %d rank-deficient row sets", resampled)
    if trials_W > 1:
        se = float(per_W.std(ddof=1) / math.sqrt(trials_W))
    else:
        p = hits / trials_X
        se = math.sqrt(p * (1 - p) / trials_X) / vol
    return NormEstimate(value=float(per_W.mean()), standard_error=se, trials_X=trials_X, trials_W=trials_W,
                        d=d, delta=float(delta), mode="random_W_from_rows", hits=hits, per_W=per_W)


def estimate_norm_family(specs, n: int, d: int, delta: float, trials_W: int, trials_X: int,
                         n_perms: int = 32, seed: int = 0) -> dict:
    """Sup over rows ``i`` of the row-spanned estimate for a family of row laws.

    ``specs`` lists one law per row (cycled if shorter than ``n``).  If all
    rows share one law a single expectation gives the sup exactly.
    Otherwise each sampled permutation picks a row ``i`` to project and the
    ``n - d`` rows spanning ``W`` from the rest; the result is the max over
    ``n_perms`` permutations and is labelled approximate.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("need at least one spec")
    if len(set(specs)) == 1:
        est = estimate_norm_d_delta(specs[0], n, d, delta, trials_W, trials_X)
        return {"value": est.value, "se": est.standard_error, "approximate": False, "estimates": [est]}
    _check_args(d, delta, trials_X)
    laws = [specs[i % len(specs)] for i in range(n)]
    vol = tube_volume(d, delta)
    perm_rng = stream(seed, "norm_family_perm")
    estimates = []
    for p in range(n_perms):
        order = perm_rng.permutation(n)
        target, span = laws[order[0]], [laws[j] for j in order[1: n - d + 1]]
        vals = np.empty(trials_W)
        for w in range(trials_W):
            rows = np.vstack([sample_rows(s, n, 1, stream(s.seed, "norm_family", p, w, t))
                              for t, s in enumerate(span)])
            V = orthonormalize(rows, n)
            if V.dim != n - d:
                raise DegenerateRowsError("row-spanned subspace is rank deficient")
            h = _count_hits(target, n, V.complement(), delta, trials_X, ("norm_family_X", p, w))
            vals[w] = h / trials_X / vol
        se = float(vals.std(ddof=1) / math.sqrt(trials_W)) if trials_W > 1 else math.nan
        estimates.append((float(vals.mean()), se, int(order[0])))
    best = max(estimates, key=lambda e: e[0])
    return {"value": best[0], "se": best[1], "row": best[2], "approximate": True, "estimates": estimates}


# -- radial sup profiles and the radial bound -------------------------------

@dataclass(frozen=True)
class RadialProfile:
    """``sup_{|x| = t} f(x)`` for a row density, with its windowed form.

    ``decreasing`` profiles attain the sup over ``[t, t + delta]`` at ``t``;
    ``support`` is the radius beyond which the profile vanishes.
    """

    kind: str
    sup_at: object
    decreasing: bool = True
    support: float = math.inf

    def window_sup(self, t: float, delta: float) -> float:
        if t > self.support:
            return 0.0
        if self.decreasing:
            return float(self.sup_at(t))
        grid = np.linspace(t, min(t + delta, self.support), 33)
        return float(np.max(self.sup_at(grid)))


def radial_sup_profile(spec: EnsembleSpec, n: int) -> RadialProfile:
    """Closed-form radial sup profile, or ``ValueError`` for kinds without one."""
    if spec.shift:
        raise ValueError("no radial profile for shifted rows")
    amp = _amplitude(spec, n)
    if spec.kind == "ginibre":
        log_c = -0.5 * n * math.log(2 * math.pi * amp * amp)
        return RadialProfile("ginibre", lambda t: np.exp(log_c - 0.5 * (np.asarray(t) / amp) ** 2))
    if spec.kind == "ball_rows":
        R = amp * math.sqrt(n + 2)
        h = math.exp(-log_ball_volume(n, R))
        return RadialProfile("ball_rows", lambda t: np.where(np.asarray(t) <= R, h, 0.0), support=R)
    if spec.kind == "radial_example":
        if amp != 1.0:
            raise ValueError("radial example profile is only available unscaled")
        # y = 0 lies in the support on every sphere, so the sup is the density height
        c = radial_example_normaliser(n, spec.d, spec.alpha)
        return RadialProfile("radial_example", lambda t: np.full(np.shape(t), c) if np.ndim(t) else c)
    raise ValueError(f"no radial sup profile for kind {spec.kind!r}")


def norm_d_delta_2(spec: EnsembleSpec, n: int, d: int, delta: float) -> dict:
    """``|f|_{d,delta,2} = (n-d) V_{n-d} int_0^inf t^(n-d-1) sup_{[t,t+delta]} f dt``.

    The integral is taken over ``[0, T]`` for ``T = 10, 100, ..., 10^5``;
    if the last step still adds more than ``1e-8`` relative, the integral
    is reported as divergent with value ``inf``.
    """
    if not n > d >= 1:
        raise ValueError(f"need n > d >= 1, got n={n}, d={d}")
    prof = radial_sup_profile(spec, n)
    m = n - d
    log_pref = math.log(m) + log_ball_volume(m)

    def integrand(t):
        s = prof.window_sup(t, delta)
        if s <= 0.0:
            return 0.0
        return math.exp(log_pref + (m - 1) * math.log(t) + math.log(s)) if t > 0 else (math.exp(log_pref) * s if m == 1 else 0.0)

    partial = []
    lo, total = 0.0, 0.0
    for T in (10.0, 1e2, 1e3, 1e4, 1e5):
        hi = min(T, prof.support)
        if hi > lo:
            pts = [x for x in (prof.support,) if lo < x < hi] or None
            val, _ = integrate.quad(integrand, lo, hi, points=pts, limit=400, epsrel=1e-10)
            total += val
            lo = hi
        partial.append(total)
    divergent = partial[-1] - partial[-2] > 1e-8 * max(partial[-1], 1e-300)
    return {"value": math.inf if divergent else partial[-1], "divergent": divergent, "partial": partial}


_SUP_DENSITY = {
    "ginibre": 1.0 / math.sqrt(2 * math.pi),
    "uniform_entries": 1.0 / (2 * math.sqrt(3)),
}


def sup_density(spec: EnsembleSpec, n: int) -> float:
    """Max of the one-coordinate density for independent-entry kinds."""
    if spec.kind not in _SUP_DENSITY or spec.shift:
        raise ValueError(f"kind {spec.kind!r} has no bounded independent-entry density")
    return _SUP_DENSITY[spec.kind] / _amplitude(spec, n)


def density_bound(spec: EnsembleSpec, n: int, condition: str, d: int, delta: float = 0.0) -> dict:
    """Bound ``C`` on the tube norm from a sufficient condition.

    ``"sup_product"`` gives ``(sqrt(2) max |f_i|_inf)^d`` for independent
    entries; ``"radial_sup"`` gives ``|f|_{d,delta,2}`` by quadrature.
    """
    if condition == "sup_product":
        return {"C": (math.sqrt(2) * sup_density(spec, n)) ** d, "divergent": False}
    if condition == "radial_sup":
        r = norm_d_delta_2(spec, n, d, delta)
        return {"C": r["value"], "divergent": r["divergent"]}
    raise ValueError(f"unknown condition {condition!r}; expected 'sup_product' or 'radial_sup'")


def check_prop28(spec: EnsembleSpec, n: int, condition: str, d: int, delta_grid, n_W: int = 50,
                 trials_X: int = 20000, z_se: float = 3.0) -> dict:
    """Compare sampled ``|f|_{W,delta,1}`` (Haar ``W``) with the bound ``C``.

    An estimate counts as below ``C`` when ``value - z_se * se < C``.  The
    check fails outright when the bound diverges.
    """
    rows = []
    passed = True
    divergent = False
    for delta in delta_grid:
        b = density_bound(spec, n, condition, d, delta)
        C = b["C"]
        divergent |= b["divergent"]
        for w in range(n_W):
            W = random_subspace(n, n - d, stream(spec.seed, "density_W", w))
            est = estimate_norm_fixed_W(spec, W, d, delta, trials_X, key=("density_X", repr(float(delta)), w))
            ok = bool(math.isfinite(C) and est.value - z_se * est.standard_error < C)
            passed &= ok
            rows.append({"delta": float(delta), "W": w, "value": est.value, "se": est.standard_error,
                         "C": C, "below": ok})
    return {"condition": condition, "d": d, "n": n, "C": [r["C"] for r in rows[::n_W]],
            "passed": passed and not divergent, "divergent": divergent, "estimates": rows}


def check_small_eigenvalue_bound(spec: EnsembleSpec, n: int, d: int, delta: float, trials: int,
                                 W: Subspace | None = None, trials_W: int = 20, z_se: float = 3.0) -> dict:
    """Hit probability versus ``V_d delta^d`` times the norm estimate.

    With a fixed ``W`` both sides come from one counter and agree exactly.
    With ``W = None`` the left side is an independent two-level experiment
    (fresh spanning rows, fresh test rows) and the right side is
    :func:`estimate_norm_d_delta`.
    """
    vol = tube_volume(d, delta)
    if W is not None:
        est = estimate_norm_fixed_W(spec, W, d, delta, trials)
        lhs = est.hits / trials
        rhs = vol * est.value
        se = vol * est.standard_error
        return {"lhs": lhs, "rhs": rhs, "margin": rhs - lhs, "se": se, "ratio": lhs / rhs if rhs else math.nan,
                "holds": True}
    per_W = trials // trials_W or 1
    left = estimate_norm_d_delta(spec, n, d, delta, trials_W, per_W, key=("small_eig_lhs",))
    right = estimate_norm_d_delta(spec, n, d, delta, trials_W, per_W, key=("small_eig_rhs",))
    lhs, rhs = vol * left.value, vol * right.value
    se = vol * math.hypot(left.standard_error, right.standard_error)
    return {"lhs": lhs, "rhs": rhs, "margin": rhs - lhs, "se": se, "ratio": lhs / rhs if rhs else math.nan,
            "holds": bool(lhs <= rhs + z_se * se)}


def norm_bound_chain(estimate: NormEstimate, upper: float, z_se: float = 3.0) -> dict:
    """Check ``estimate <= upper`` and ``estimate <= 1/(V_d delta^d)`` within ``z_se`` SE."""
    cap = 1.0 / tube_volume(estimate.d, estimate.delta)
    slack = z_se * estimate.standard_error
    return {"estimate": estimate.value, "radial_bound": upper, "volume_bound": cap,
            "below_radial": bool(estimate.value - slack <= upper),
            "below_volume": bool(estimate.value - slack <= cap)}


def scan_family(make_spec, params, n: int, d: int, delta: float, trials_X: int,
                W: Subspace | None = None, slope_flag: float = -0.5) -> dict:
    """Norm estimates across a one-parameter family and a growth flag.

    ``make_spec(p)`` builds the law for parameter ``p``.  The fitted slope of
    ``log value`` against ``log p`` is compared with ``slope_flag * d``; a
    steeper negative slope marks the family as unbounded as ``p -> 0``.
    """
    params = [float(p) for p in params]
    W = W if W is not None else distinguished_subspace(n, d)
    vals = []
    for p in params:
        est = estimate_norm_fixed_W(make_spec(p), W, d, delta, trials_X, key=("scan", repr(p)))
        vals.append((p, est.value, est.standard_error))
    v = np.array([x[1] for x in vals])
    slope = math.nan
    if len(params) >= 2 and np.all(v > 0):
        slope = float(np.polyfit(np.log(params), np.log(v), 1)[0])
    return {"values": vals, "slope": slope, "unbounded": bool(slope < slope_flag * d)}


def default_delta_grid(n: int, beta: float = 0.01) -> np.ndarray:
    """Geometric grid from ``n^-3`` to ``n^-1`` plus the anchor points
    ``n^(-5/2)/log n``, ``n^(-5/2+beta)`` and ``n^(-3/2+beta)``."""
    grid = np.geomspace(float(n) ** -3, float(n) ** -1, 9)
    anchors = [n ** -2.5 / math.log(n), n ** (-2.5 + beta), n ** (-1.5 + beta)]
    return np.unique(np.concatenate([grid, anchors]))
