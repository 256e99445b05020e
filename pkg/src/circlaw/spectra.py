"""Dense spectral computations and distribution-level distances.

Covers the nonsymmetric eigenproblem for ``A / sqrt(n)``, the shifted Gram
matrix ``H_n(z)``, distances to the uniform disk law and the
Marchenko-Pastur law, log-determinants, and two exact matrix identities
(inverse-square distance sum and singular value interlacing).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .geometry import orthonormalize, dist_to_subspace

__all__ = [
    "EigenSolverError",
    "SpectralSample",
    "MPParams",
    "eigenvalues",
    "singular_values",
    "spectral_sample",
    "shifted_gram",
    "circular_law_distance",
    "polar_grid_discrepancy",
    "mp_density",
    "mp_cdf",
    "mp_ks",
    "esd_distance",
    "log_abs_det",
    "inverse_square_identity_check",
    "interlacing_check",
    "GRAM_THRESHOLD",
]

# use the Gram-matrix eigensolve for singular values from this size up
GRAM_THRESHOLD = 512


class EigenSolverError(RuntimeError):
    """The dense eigensolver failed to converge."""


@dataclass
class SpectralSample:
    eigenvalues: np.ndarray
    singular_values: np.ndarray | None
    residual: float
    n: int


def eigenvalues(M, check_residual: bool = True) -> SpectralSample:
    """Eigenvalues of a square matrix, with the backward residual.

    ``residual`` is ``max_j |M v_j - lambda_j v_j| / |M|_2`` over unit
    eigenvectors; it is ``nan`` when ``check_residual`` is false.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"need a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    n = M.shape[0]
    try:
        if check_residual:
            lam, vecs = np.linalg.eig(M)
        else:
            lam = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigensolver did not converge for {n}x{n} matrix: {exc}") from exc
    residual = math.nan
    if check_residual:
        scale = np.linalg.norm(M, 2) or 1.0
        vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
        residual = float(np.max(np.linalg.norm(M @ vecs - vecs * lam, axis=0)) / scale) if n else 0.0
    return SpectralSample(eigenvalues=lam, singular_values=None, residual=residual, n=n)


def singular_values(M, method: str = "auto") -> np.ndarray:
    """Singular values in descending order.

    ``method="gram"`` takes square roots of the eigenvalues of ``M M*``
    (faster, but small singular values lose relative accuracy);
    ``"svd"`` calls LAPACK directly; ``"auto"`` picks Gram from
    ``GRAM_THRESHOLD`` rows up.
    """
    M = np.asarray(M)
    if method == "auto":
        method = "gram" if min(M.shape) >= GRAM_THRESHOLD else "svd"
    if method == "svd":
        return np.linalg.svd(M, compute_uv=False)
    if method == "gram":
        g = M @ M.conj().T if M.shape[0] <= M.shape[1] else M.conj().T @ M
        ev = np.linalg.eigvalsh(g)[::-1]
        return np.sqrt(np.clip(ev, 0.0, None))
    raise ValueError(f"unknown method {method!r}")


def spectral_sample(A, scale: bool = True, check_residual: bool = True) -> SpectralSample:
    """Eigenvalues and singular values of ``A / sqrt(n)`` (or ``A`` if ``scale`` is false)."""
    A = np.asarray(A)
    M = A / math.sqrt(A.shape[0]) if scale else A
    s = eigenvalues(M, check_residual=check_residual)
    s.singular_values = singular_values(M)
    return s


def shifted_gram(A, z: complex = 0.0) -> np.ndarray:
    """``H_n(z) = (A/sqrt(n) - z I)(A/sqrt(n) - z I)^*``."""
    A = np.asarray(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"need a square matrix, got shape {A.shape}")
    W = A / math.sqrt(n) - z * np.eye(n)
    H = W @ W.conj().T
    # symmetrise away rounding asymmetry
    return 0.5 * (H + H.conj().T)


def circular_law_distance(eigs) -> dict:
    """KS distances of eigenvalues (of ``A/sqrt(n)``) to the uniform disk.

    The uniform disk law factorises into a radial part with CDF ``min(r^2, 1)``
    and an independent uniform angle, so the two one-dimensional KS statistics
    are reported separately.
    """
    eigs = np.asarray(eigs, dtype=complex)
    if eigs.size == 0:
        raise ValueError("no eigenvalues")
    r = np.abs(eigs)
    theta = np.mod(np.angle(eigs) / (2 * np.pi), 1.0)
    radial = stats.kstest(r, lambda t: np.clip(np.asarray(t) ** 2, 0.0, 1.0)).statistic
    angular = stats.kstest(theta, "uniform").statistic
    return {"radial_ks": float(radial), "angular_ks": float(angular)}


def polar_grid_discrepancy(eigs, bins: int = 16) -> float:
    """Max absolute difference between empirical and uniform-disk mass on a
    ``bins x bins`` equal-area polar grid (radius cut at r^2 quantiles)."""
    eigs = np.asarray(eigs, dtype=complex)
    r2 = np.abs(eigs) ** 2
    theta = np.mod(np.angle(eigs) / (2 * np.pi), 1.0)
    ri = np.minimum((r2 * bins).astype(int), bins - 1)
    ti = np.minimum((theta * bins).astype(int), bins - 1)
    counts = np.zeros((bins, bins))
    np.add.at(counts, (ri, ti), 1.0)
    # mass outside the unit disk is charged to the outermost ring
    return float(np.max(np.abs(counts / eigs.size - 1.0 / bins**2)))


# -- Marchenko-Pastur -------------------------------------------------------

@dataclass(frozen=True)
class MPParams:
    """Marchenko-Pastur law with aspect ratio ``y`` in (0, 1]."""

    y: float

    def __post_init__(self):
        if not 0 < self.y <= 1:
            raise ValueError(f"aspect ratio y must lie in (0, 1], got {self.y}")

    @property
    def a(self) -> float:
        return (1 - math.sqrt(self.y)) ** 2

    @property
    def b(self) -> float:
        return (1 + math.sqrt(self.y)) ** 2


def _as_params(params) -> MPParams:
    return params if isinstance(params, MPParams) else MPParams(float(params))


def mp_density(x, params) -> np.ndarray:
    """``sqrt((b - x)(x - a)) / (2 pi x y)`` on ``[a, b]``, zero elsewhere."""
    p = _as_params(params)
    x = np.asarray(x, dtype=float)
    inside = (x > p.a) & (x < p.b) & (x > 0)
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.sqrt((p.b - xi) * (xi - p.a)) / (2 * np.pi * xi * p.y)
    return out


def _mp_theta_integrand(theta, p: MPParams):
    # x = a + h (1 - cos theta) removes both square-root endpoint singularities;
    # the half-angle form avoids 0/0 at theta = 0 when a = 0
    h = 0.5 * (p.b - p.a)
    s2 = math.sin(0.5 * theta) ** 2
    c2 = 1.0 - s2
    if p.a == 0.0:
        return h * c2 / (math.pi * p.y)
    return 2.0 * h * h * s2 * c2 / (math.pi * p.y * (p.a + 2.0 * h * s2))


def mp_cdf(x, params, epsabs: float = 1e-13, epsrel: float = 1e-11):
    """CDF of the Marchenko-Pastur law by adaptive quadrature."""
    p = _as_params(params)
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    c, h = 0.5 * (p.a + p.b), 0.5 * (p.b - p.a)
    out = np.empty_like(xs)
    for i, xv in enumerate(xs):
        if xv <= p.a:
            out[i] = 0.0
        elif xv >= p.b:
            out[i] = 1.0
        else:
            theta = math.acos(min(1.0, max(-1.0, (c - xv) / h)))
            val, _ = integrate.quad(_mp_theta_integrand, 0.0, theta, args=(p,), epsabs=epsabs, epsrel=epsrel, limit=200)
            out[i] = min(1.0, max(0.0, val))
    return float(out[0]) if scalar else out


def mp_ks(spectrum, y) -> float:
    """KS distance between an empirical spectrum of ``(1/N) A A^*`` and the MP law."""
    p = _as_params(y)
    ev = np.sort(np.asarray(spectrum, dtype=float))
    return float(stats.kstest(ev, lambda t: mp_cdf(t, p)).statistic)


def esd_distance(spec1, spec2) -> float:
    """Two-sample KS distance between empirical spectral distributions."""
    a = np.asarray(spec1, dtype=float).ravel()
    b = np.asarray(spec2, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both spectra must be nonempty")
    return float(stats.ks_2samp(a, b).statistic)


# -- log-determinants and exact identities ----------------------------------

def log_abs_det(A, z: complex = 0.0, method: str = "svd") -> float:
    """``(1/n) sum_i log sigma_i(A/sqrt(n) - z I)``; ``-inf`` if singular.

    ``method="eig"`` uses eigenvalue moduli instead of singular values.
    """
    A = np.asarray(A)
    n = A.shape[0]
    W = A / math.sqrt(n) - z * np.eye(n)
    if method == "svd":
        vals = np.linalg.svd(W, compute_uv=False)
    elif method == "eig":
        vals = np.abs(np.linalg.eigvals(W))
    else:
        raise ValueError(f"unknown method {method!r}")
    if np.any(vals == 0):
        return -math.inf
    return float(np.sum(np.log(vals)) / n)


def inverse_square_identity_check(M) -> dict:
    """Compare ``sum sigma_j^-2`` with ``sum dist(X_j, W_j)^-2`` for a full-rank ``k x n`` matrix.

    ``W_j`` is the span of all rows except row ``j``.  The left side comes
    from an SVD, the right side from separate orthonormalisations of the
    row-deleted matrices.
    """
    M = np.asarray(M)
    k, n = M.shape
    if k > n:
        raise ValueError(f"need k <= n, got {k}x{n}")
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] <= s[0] * 1e-14 * max(k, n):
        raise ValueError("matrix is rank deficient")
    lhs = float(np.sum(s ** -2.0))
    dists = np.empty(k)
    for j in range(k):
        others = np.delete(M, j, axis=0)
        V = orthonormalize(others, n)
        if V.dim != k - 1:
            raise ValueError("matrix is rank deficient")
        dists[j] = dist_to_subspace(M[j], V)
    rhs = float(np.sum(dists ** -2.0))
    return {"lhs": lhs, "rhs": rhs, "rel_err": abs(lhs - rhs) / abs(lhs), "distances": dists}


def interlacing_check(A, k: int, atol: float = 1e-10) -> dict:
    """Check ``sigma_i(A) >= sigma_i(A') >= sigma_{i+k}(A)`` with ``A'`` the first ``n-k`` rows."""
    A = np.asarray(A)
    n = A.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    s = np.linalg.svd(A, compute_uv=False)
    sp = np.linalg.svd(A[: n - k], compute_uv=False)
    m = n - k
    upper = s[:m] - sp[:m]
    # sigma_{i+k}(A) exists only while i + k <= min(A.shape)
    tail = s[k:k + m]
    lower = sp[: tail.size] - tail
    worst = float(min(upper.min(), lower.min() if lower.size else np.inf))
    return {"passed": bool(worst >= -atol), "worst_slack": worst, "sigma": s, "sigma_sub": sp}
