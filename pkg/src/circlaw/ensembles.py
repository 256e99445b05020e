"""Row distributions for random matrices with independent, internally dependent rows.

Every sampler draws whole rows.  Matrices are assembled row by row, each row
from its own random stream derived from ``(seed, trial, row_index)``, so a
given ``(spec, trial)`` always reproduces the same matrix bit for bit and any
subset of rows can be regenerated independently.

Kinds
-----
=========================  =====================================================
``ginibre``                iid N(0, 1) entries
``uniform_entries``        iid uniform on [-sqrt(3), sqrt(3)]
``bernoulli_pm``           iid +-1 with P(+1) = p, standardised to mean 0, var 1
``bernoulli01``            iid {0, 1} with mass p at 0 (not centred)
``sphere_rows``            uniform on the sphere of radius sqrt(n)
``ball_rows``              uniform in the ball of radius sqrt(n + 2)
``correlated_gaussian``    N(0, C), C unit diagonal (``rho``/``structure``)
``correlated_bernoulli_pm``  +-1 coordinates with pairwise covariance C
``radial_example``         the pole/fibre density with parameters ``d``, ``alpha``
``slab``                   Gaussian on R^(n-d) times uniform eps-ball in R^d
=========================  =====================================================

All kinds except ``bernoulli01``, ``radial_example`` and ``slab`` have mean 0
and unit variance per coordinate.  ``scale``, ``scale_power``, ``shift`` and
``duplicate_row`` build deliberately broken variants for the assumption audits.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, fields, replace
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_triangular

from .geometry import ball_volume

__all__ = [
    "KINDS",
    "KIND_DESCRIPTIONS",
    "SIGN_SYMMETRIC",
    "EnsembleSpec",
    "MatrixSample",
    "stream",
    "row_stream",
    "sample_rows",
    "sample_row",
    "sample_matrix",
    "mean_oracle",
    "covariance_oracle",
    "correlation_matrix",
    "whitening_matrix",
    "radial_example_sampler",
    "radial_example_normaliser",
    "radial_fibre_radius",
]

KIND_DESCRIPTIONS = {
    "ginibre": "iid standard Gaussian entries",
    "uniform_entries": "iid uniform entries on [-sqrt3, sqrt3]",
    "bernoulli_pm": "iid +-1 entries with P(+1)=p, standardised",
    "bernoulli01": "iid {0,1} entries with mass p at 0 (fails A2: nonzero mean)",
    "sphere_rows": "rows uniform on the sphere of radius sqrt(n)",
    "ball_rows": "rows uniform in the ball of radius sqrt(n+2)",
    "correlated_gaussian": "Gaussian rows with unit-diagonal covariance from rho/structure",
    "correlated_bernoulli_pm": "+-1 rows with pairwise covariance from rho/structure (dichotomised Gaussian)",
    "radial_example": "density C*1{|y| <= g(|x|)} on R^(n-d) x R^d with pole exponent alpha",
    "slab": "Gaussian on R^(n-d) times a uniform eps-ball in R^d",
}
KINDS = tuple(KIND_DESCRIPTIONS)

SIGN_SYMMETRIC = ("ginibre", "uniform_entries", "bernoulli_pm", "sphere_rows", "ball_rows")

_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class EnsembleSpec:
    """Declarative description of a row distribution.

    Only the parameters relevant to ``kind`` are read; the rest keep their
    defaults.  ``seed`` is the master seed from which every row stream is
    derived.
    """

    kind: str = "ginibre"
    seed: int = 0
    p: float = 0.5
    rho: float = 0.0
    structure: str = "ar1"
    whiten: bool = False
    d: int = 1
    alpha: float = 1.0
    eps: float = 0.01
    scale: float = 1.0
    scale_power: float = 0.0
    shift: float = 0.0
    duplicate_row: bool = False

    def __post_init__(self):
        if self.kind not in KIND_DESCRIPTIONS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}; known kinds: {', '.join(KINDS)}")
        if self.kind in ("bernoulli_pm", "bernoulli01") and not 0 < self.p < 1:
            raise ValueError(f"p must lie in (0, 1), got {self.p}")
        if self.structure not in ("ar1", "equi"):
            raise ValueError(f"structure must be 'ar1' or 'equi', got {self.structure!r}")
        if self.kind.startswith("correlated") and not -1 < self.rho < 1:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if self.kind == "radial_example" and self.alpha <= 0:
            raise ValueError(f"alpha must be positive (density not normalisable), got {self.alpha}")
        if self.kind in ("radial_example", "slab") and self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.kind == "slab" and self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")

    def validate_for(self, n: int) -> None:
        """Check that the spec can produce rows of length ``n``.

        Raises ``ValueError`` for a non-positive-definite covariance or a
        row length incompatible with ``d``.
        """
        if self.kind.startswith("correlated"):
            _chol_cached(n, float(self.rho), self.structure, self.kind == "correlated_bernoulli_pm")
        if self.kind in ("radial_example", "slab") and n <= self.d:
            raise ValueError(f"{self.kind} needs row length > d={self.d}, got {n}")

    def non_default_items(self) -> dict:
        """Fields that differ from the defaults (``kind`` and ``seed`` always included)."""
        out = {"kind": self.kind, "seed": self.seed}
        for f in fields(self):
            if f.name in out:
                continue
            v = getattr(self, f.name)
            if v != f.default:
                out[f.name] = v
        return out

    def with_seed(self, seed: int) -> "EnsembleSpec":
        return replace(self, seed=seed)

    @property
    def is_centred(self) -> bool:
        return self.kind not in ("bernoulli01", "radial_example", "slab") and self.shift == 0


@dataclass
class MatrixSample:
    entries: np.ndarray
    spec: EnsembleSpec
    trial: int
    seed: int


def _key_int(k) -> int:
    if isinstance(k, (int, np.integer)):
        return int(k)
    return zlib.crc32(str(k).encode("utf-8"))


def stream(seed: int, *key) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``; string keys are hashed with CRC32."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def row_stream(seed: int, trial: int, row: int) -> np.random.Generator:
    """Stream for one matrix row: seed tree ``seed -> trial -> row``."""
    return stream(seed, "matrix", trial, row)


@lru_cache(maxsize=64)
def _corr_cached(n: int, rho: float, structure: str) -> np.ndarray:
    idx = np.arange(n)
    if structure == "ar1":
        c = rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)
    else:
        c = np.full((n, n), rho)
        np.fill_diagonal(c, 1.0)
    c.setflags(write=False)
    return c


def correlation_matrix(spec: EnsembleSpec, n: int) -> np.ndarray:
    """Unit-diagonal within-row covariance used by the correlated kinds."""
    return _corr_cached(n, float(spec.rho), spec.structure)


@lru_cache(maxsize=64)
def _chol_cached(n: int, rho: float, structure: str, latent_arcsine: bool) -> np.ndarray:
    c = np.array(_corr_cached(n, rho, structure))
    if latent_arcsine:
        # dichotomised Gaussian: P(b_i = b_j = 1) = 1/4 + arcsin(R_ij) / (2 pi)
        c = np.sin(0.5 * np.pi * c)
    try:
        L = np.linalg.cholesky(c)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"covariance for rho={rho}, structure={structure}, n={n} is not positive definite") from exc
    L.setflags(write=False)
    return L


@lru_cache(maxsize=64)
def _whitener_cached(n: int, rho: float, structure: str) -> np.ndarray:
    w = whitening_matrix(np.array(_corr_cached(n, rho, structure)))
    w.setflags(write=False)
    return w


def whitening_matrix(C) -> np.ndarray:
    """Lower-triangular ``W`` with ``W.T @ W == inv(C)``.

    ``W`` is the inverse of the Cholesky factor of ``C``, so ``W @ x`` has
    identity covariance when ``x`` has covariance ``C``.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("C must be a square matrix")
    if not np.allclose(C, C.T, rtol=0, atol=1e-12 * max(1.0, np.abs(C).max())):
        raise ValueError("C must be symmetric")
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("C is not positive definite") from exc
    # inv(C) = inv(L).T @ inv(L), so W = inv(L) satisfies W.T W = inv(C) and W C W.T = I
    return solve_triangular(L, np.eye(C.shape[0]), lower=True)


# -- radial example ---------------------------------------------------------

def radial_fibre_radius(r, n: int, d: int, alpha: float):
    """Fibre radius g(r) with ``g(r)^d = r^(1+d-n) * min(1, r^(-1-alpha))``."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        log_gd = (1 + d - n) * np.log(r) + np.where(r > 1, (-1 - alpha) * np.log(r), 0.0)
    return np.exp(log_gd / d)


def radial_example_normaliser(n: int, d: int, alpha: float) -> float:
    """Density height C, with ``1/C = (n-d) V_{n-d} V_d (1 + 1/alpha)``."""
    return 1.0 / ((n - d) * ball_volume(n - d) * ball_volume(d) * (1.0 + 1.0 / alpha))


def _uniform_directions(rng, size, m):
    g = rng.standard_normal((size, m))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _uniform_ball(rng, size, m, radius):
    u = _uniform_directions(rng, size, m)
    rad = np.asarray(radius) * rng.random(size) ** (1.0 / m)
    return u * np.reshape(rad, (-1, 1))


def radial_example_sampler(n: int, d: int, alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` vectors from the radial example density.

    The first ``n - d`` coordinates are the radial part ``x``; the last ``d``
    are the fibre ``y`` with ``|y| <= g(|x|)``.  The law of ``r = |x|`` has
    density proportional to ``r^(n-d-1) g(r)^d``: uniform on (0, 1] with mass
    ``alpha / (1 + alpha)`` and a Pareto(alpha) tail on (1, inf).
    """
    if not n > d >= 1:
        raise ValueError(f"need n > d >= 1, got n={n}, d={d}")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    m = n - d
    inner = rng.random(size) < alpha / (1.0 + alpha)
    u = rng.random(size)
    # 1 - u lies in (0, 1] so the Pareto branch never divides by zero
    r = np.where(inner, 1.0 - u, (1.0 - u) ** (-1.0 / alpha))
    x = _uniform_directions(rng, size, m) * r[:, None]
    y = _uniform_ball(rng, size, d, radial_fibre_radius(r, n, d, alpha))
    return np.hstack([x, y])


# -- core sampler -----------------------------------------------------------

def _base_rows(spec: EnsembleSpec, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    kind = spec.kind
    if kind == "ginibre":
        return rng.standard_normal((size, n))
    if kind == "uniform_entries":
        return rng.uniform(-_SQRT3, _SQRT3, (size, n))
    if kind == "bernoulli_pm":
        p = spec.p
        b = np.where(rng.random((size, n)) < p, 1.0, -1.0)
        mean = 2 * p - 1
        return (b - mean) / (2 * math.sqrt(p * (1 - p)))
    if kind == "bernoulli01":
        # mass p at 0, 1 - p at 1
        return (rng.random((size, n)) >= spec.p).astype(float)
    if kind == "sphere_rows":
        return _uniform_directions(rng, size, n) * math.sqrt(n)
    if kind == "ball_rows":
        return _uniform_ball(rng, size, n, math.sqrt(n + 2))
    if kind == "correlated_gaussian":
        L = _chol_cached(n, float(spec.rho), spec.structure, False)
        return rng.standard_normal((size, n)) @ L.T
    if kind == "correlated_bernoulli_pm":
        L = _chol_cached(n, float(spec.rho), spec.structure, True)
        g = rng.standard_normal((size, n)) @ L.T
        x = np.where(g > 0, 1.0, -1.0)
        if spec.whiten:
            x = x @ _whitener_cached(n, float(spec.rho), spec.structure).T
        return x
    if kind == "radial_example":
        return radial_example_sampler(n, spec.d, spec.alpha, size, rng)
    if kind == "slab":
        if n <= spec.d:
            raise ValueError(f"slab needs n > d, got n={n}, d={spec.d}")
        g = rng.standard_normal((size, n - spec.d))
        y = _uniform_ball(rng, size, spec.d, spec.eps)
        return np.hstack([g, y])
    raise AssertionError(kind)


def _amplitude(spec: EnsembleSpec, n: int) -> float:
    return spec.scale * float(n) ** spec.scale_power


def sample_rows(spec: EnsembleSpec, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent rows of length ``n`` from one stream."""
    if n < 1:
        raise ValueError("row length must be >= 1")
    x = _base_rows(spec, n, size, rng)
    amp = _amplitude(spec, n)
    if amp != 1.0:
        x = x * amp
    if spec.shift:
        x = x + spec.shift
    return x


def sample_row(spec: EnsembleSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    return sample_rows(spec, n, 1, rng)[0]


def sample_matrix(spec: EnsembleSpec, n: int, N: int | None = None, trial: int = 0) -> MatrixSample:
    """``n x N`` matrix whose row ``i`` comes from ``row_stream(seed, trial, i)``."""
    N = n if N is None else N
    if n < 1 or N < 1:
        raise ValueError(f"matrix shape must be positive, got {n}x{N}")
    a = np.empty((n, N))
    for i in range(n):
        a[i] = sample_rows(spec, N, 1, row_stream(spec.seed, trial, i))[0]
    if spec.duplicate_row and n > 1:
        a[-1] = a[0]
    return MatrixSample(entries=a, spec=spec, trial=trial, seed=spec.seed)


# -- analytic moments -------------------------------------------------------

def mean_oracle(spec: EnsembleSpec, n: int) -> np.ndarray:
    """Exact ``E[x_j]`` for each coordinate of a length-``n`` row."""
    amp = _amplitude(spec, n)
    base = np.full(n, 1.0 - spec.p) if spec.kind == "bernoulli01" else np.zeros(n)
    return amp * base + spec.shift


def _second_moment_base(spec: EnsembleSpec, n: int) -> np.ndarray:
    kind = spec.kind
    if kind in ("ginibre", "uniform_entries", "bernoulli_pm", "sphere_rows", "ball_rows"):
        return np.eye(n)
    if kind == "correlated_gaussian":
        return np.array(correlation_matrix(spec, n))
    if kind == "correlated_bernoulli_pm":
        c = np.array(correlation_matrix(spec, n))
        if spec.whiten:
            w = _whitener_cached(n, float(spec.rho), spec.structure)
            c = w @ c @ w.T
        return c
    if kind == "bernoulli01":
        q = 1.0 - spec.p
        m = np.full((n, n), q * q)
        np.fill_diagonal(m, q)
        return m
    raise ValueError(f"no analytic within-row covariance for kind {kind!r}")


def covariance_oracle(spec: EnsembleSpec, n: int):
    """Return ``f(j, l) = E[x_j x_l]`` for a length-``n`` row (0-based indices).

    ``f.matrix`` holds the full ``n x n`` second-moment matrix.
    """
    amp = _amplitude(spec, n)
    base = _second_moment_base(spec, n)
    base_mean = mean_oracle(replace(spec, shift=0.0), n) / amp if amp else np.zeros(n)
    m2 = amp * amp * base
    if spec.shift:
        mu = amp * base_mean
        s = spec.shift
        m2 = m2 + s * (mu[:, None] + mu[None, :]) + s * s
    m2.setflags(write=False)

    def oracle(j: int, l: int) -> float:
        return float(m2[j, l])

    oracle.matrix = m2
    return oracle
