"""Ball volumes, subspaces, projections and distances.

Two volume conventions are available:

``"real"``
    Lebesgue volume of the Euclidean unit ball in R^m,
    ``V_m(r) = pi^(m/2) r^m / Gamma(m/2 + 1)``.
``"complex"``
    Volume of the unit ball in complex m-space, ``omega_m = pi^m / m!``,
    scaled as ``omega_m r^(2m)``.

Every probability estimate in the package uses the real convention.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "CONVENTIONS",
    "RANK_RTOL",
    "VolumeUnderflowWarning",
    "VolumeTable",
    "Subspace",
    "log_ball_volume",
    "ball_volume",
    "unit_volume_sphere_radius",
    "orthonormalize",
    "random_subspace",
    "dist_to_subspace",
    "proj_norm",
]

CONVENTIONS = ("real", "complex")

# relative to the largest input vector norm
RANK_RTOL = 1e-10

_LOG_TINY = math.log(np.finfo(float).tiny)


class VolumeUnderflowWarning(RuntimeWarning):
    """Raised (as a warning) when a ball volume underflows to 0."""


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown volume convention {convention!r}; expected one of {CONVENTIONS}")


@lru_cache(maxsize=8192)
def _log_unit_volume(m: int, convention: str) -> float:
    if convention == "real":
        return 0.5 * m * math.log(math.pi) - math.lgamma(0.5 * m + 1.0)
    return m * math.log(math.pi) - math.lgamma(m + 1.0)


def log_ball_volume(m: int, r: float = 1.0, convention: str = "real") -> float:
    """Natural log of the ball volume; ``-inf`` for ``r == 0`` and ``m > 0``."""
    _check_convention(convention)
    if int(m) != m or m < 0:
        raise ValueError(f"dimension must be a non-negative integer, got {m!r}")
    if r < 0:
        raise ValueError(f"radius must be non-negative, got {r!r}")
    m = int(m)
    if m == 0:
        return 0.0
    if r == 0:
        return -math.inf
    power = m if convention == "real" else 2 * m
    return _log_unit_volume(m, convention) + power * math.log(r)


def ball_volume(m: int, r: float = 1.0, convention: str = "real") -> float:
    """Volume of the radius-``r`` ball of dimension ``m``.

    Returns 0.0 and emits :class:`VolumeUnderflowWarning` when the value is
    below the smallest positive double.

    >>> round(ball_volume(2, 1.0), 5)
    3.14159
    """
    lv = log_ball_volume(m, r, convention)
    if lv == -math.inf:
        return 0.0
    if lv < _LOG_TINY:
        warnings.warn(f"ball volume V_{m}({r}) underflows (log = {lv:.1f})", VolumeUnderflowWarning, stacklevel=2)
        return 0.0
    return math.exp(lv)


def unit_volume_sphere_radius(m: int, convention: str = "real") -> float:
    """Radius at which the sphere has unit surface measure.

    For the real convention ``m`` is the ambient dimension of R^m (m >= 2) and
    the sphere area is ``m V_m r^(m-1)``.  For the complex convention ``m``
    is the complex dimension (m >= 1) and the sphere S^(2m-1) has area
    ``2 m omega_m r^(2m-1)``.
    """
    _check_convention(convention)
    if int(m) != m:
        raise ValueError(f"dimension must be an integer, got {m!r}")
    m = int(m)
    if convention == "real":
        if m < 2:
            raise ValueError("real convention needs m >= 2")
        log_area = math.log(m) + _log_unit_volume(m, "real")
        return math.exp(-log_area / (m - 1))
    if m < 1:
        raise ValueError("complex convention needs m >= 1")
    log_area = math.log(2 * m) + _log_unit_volume(m, "complex")
    return math.exp(-log_area / (2 * m - 1))


@dataclass
class VolumeTable:
    """Cached log unit-ball volumes for one convention."""

    convention: str = "real"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        _check_convention(self.convention)

    def log_volume(self, m: int, r: float = 1.0) -> float:
        if r == 1.0 and m in self._cache:
            return self._cache[m]
        lv = log_ball_volume(m, r, self.convention)
        if r == 1.0:
            self._cache[m] = lv
        return lv

    def volume(self, m: int, r: float = 1.0) -> float:
        lv = self.log_volume(m, r)
        return 0.0 if lv < _LOG_TINY else math.exp(lv)

    def __getitem__(self, m: int) -> float:
        return self.volume(m)


@dataclass(frozen=True)
class Subspace:
    """Linear subspace of R^n (or C^n) held as an orthonormal basis.

    ``basis`` has shape ``(dim, ambient_dim)``; its rows are orthonormal.
    Instances are immutable and may be shared between workers.
    """

    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self):
        b = np.array(self.basis, copy=True)
        if b.ndim != 2 or b.shape[1] != self.ambient_dim:
            b = b.reshape(-1, self.ambient_dim)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def project(self, x: np.ndarray) -> np.ndarray:
        """Orthogonal projection of ``x`` (shape ``(n,)`` or ``(m, n)``) onto the subspace."""
        x = np.asarray(x)
        coeffs = x @ self.basis.conj().T
        return coeffs @ self.basis

    def residual(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        return x - self.project(x)

    def complement(self) -> "Subspace":
        """Orthogonal complement in the ambient space."""
        n = self.ambient_dim
        if self.dim == 0:
            return Subspace(n, np.eye(n))
        # the trailing right singular vectors span the null space of the basis
        _, _, vh = np.linalg.svd(self.basis, full_matrices=True)
        return Subspace(n, vh[self.dim:].conj())

    def contains(self, x: np.ndarray, atol: float = 1e-9) -> bool:
        return bool(np.linalg.norm(self.residual(x)) <= atol * max(1.0, np.linalg.norm(x)))


def orthonormalize(vectors, ambient_dim: int | None = None, rtol: float = RANK_RTOL) -> Subspace:
    """Subspace spanned by ``vectors`` (rows of an ``(m, n)`` array).

    Rank is detected by singular values above ``rtol`` times the largest
    input vector norm, so rank-deficient input gives a lower-dimensional
    result rather than an error.
    """
    v = np.asarray(vectors)
    if v.ndim == 1:
        v = v[None, :] if v.size else v.reshape(0, ambient_dim or 0)
    if ambient_dim is None:
        ambient_dim = v.shape[1]
    if ambient_dim < 1:
        raise ValueError("ambient dimension must be >= 1")
    if v.shape[1] != ambient_dim:
        raise ValueError(f"vectors have length {v.shape[1]}, expected {ambient_dim}")
    if v.shape[0] == 0:
        return Subspace(ambient_dim, np.zeros((0, ambient_dim), dtype=v.dtype))
    scale = np.max(np.linalg.norm(v, axis=1))
    if scale == 0:
        return Subspace(ambient_dim, np.zeros((0, ambient_dim), dtype=v.dtype))
    _, s, vh = np.linalg.svd(v / scale, full_matrices=False)
    rank = int(np.sum(s > rtol))
    return Subspace(ambient_dim, vh[:rank])


def random_subspace(n: int, dim: int, rng: np.random.Generator) -> Subspace:
    """Haar-distributed ``dim``-dimensional subspace of R^n."""
    if not 0 <= dim <= n:
        raise ValueError(f"need 0 <= dim <= n, got dim={dim}, n={n}")
    g = rng.standard_normal((dim, n))
    return orthonormalize(g, n)


def _check_dims(x: np.ndarray, V: Subspace) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] != V.ambient_dim:
        raise ValueError(f"vector length {x.shape[-1]} does not match ambient dimension {V.ambient_dim}")
    return x


def dist_to_subspace(x, V: Subspace):
    """Euclidean distance from ``x`` to ``V`` (vectorised over leading axes)."""
    x = _check_dims(x, V)
    return np.linalg.norm(V.residual(x), axis=-1)


def proj_norm(x, W: Subspace):
    """Norm of the orthogonal projection of ``x`` onto ``W``."""
    x = _check_dims(x, W)
    return np.linalg.norm(x @ W.basis.conj().T, axis=-1)
