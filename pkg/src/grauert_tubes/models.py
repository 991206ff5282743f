r"""Flat model manifolds: the circle (``m = 1``) and the flat torus
:math:`T^m = \mathbb{R}^m / 2\pi\mathbb{Z}^m`.

Everything here is exact ground truth. Laplace eigenfunctions are
:math:`\phi_k(x) = (2\pi)^{-m/2} e^{ik\cdot x}`, :math:`k \in \mathbb{Z}^m`, with
eigenvalue :math:`|k|`; their holomorphic extensions to the complexification
:math:`z = x + iy` are given by the same formula. The Grauert tube function is
:math:`\sqrt\rho(z) = |y|` and the tube boundary is
:math:`\partial M_\tau = T^m \times \{|y| = \tau\}`.

Boundary measure
----------------
The Liouville volume on the boundary is a constant multiple of
``dx (x) dsigma(omega)`` on :math:`T^m \times S^{m-1}`, with radius weight
:math:`\tau^m`. The absolute constant is fixed to 1; only diagonal-normalized
kernels are compared downstream, so it never matters.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import AccuracyError, BranchError, DegenerateGeometryError, DomainError

#: Flow orientation under which the Toeplitz spectrum is asymptotically positive
#: and the chart angle increases at rate ``2 tau`` (see ``grauert_geometry``).
REEB_ORIENTATION = -1

TWO_PI = 2.0 * np.pi


def wrap_angle(x):
    """Representative of ``x`` modulo ``2 pi`` in ``[-pi, pi)``."""
    return (np.asarray(x) + np.pi) % TWO_PI - np.pi


@dataclass(frozen=True)
class FlatModel:
    """Flat torus of dimension ``m`` with period ``2 pi`` in every coordinate.

    ``m = 1`` is the circle; ``which`` is a label only.
    """

    m: int
    which: str = "torus"

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        if self.which not in ("circle", "torus"):
            raise DomainError(f"unknown model {self.which!r}")
        if self.which == "circle" and self.m != 1:
            raise DomainError("the circle model has m = 1")

    @classmethod
    def circle(cls) -> "FlatModel":
        return cls(1, "circle")

    @classmethod
    def torus(cls, m: int) -> "FlatModel":
        return cls(m, "circle" if m == 1 else "torus")


@dataclass(frozen=True)
class LatticeMode:
    """Fourier mode ``k`` in ``Z^m``; its Laplace frequency is ``|k|``."""

    k: tuple

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(c) for c in np.atleast_1d(self.k)))

    @property
    def eigenvalue(self) -> float:
        return float(np.sqrt(sum(c * c for c in self.k)))

    def as_array(self) -> np.ndarray:
        return np.array(self.k, dtype=float)


@dataclass(frozen=True)
class TubePoint:
    """Point ``z = x + iy`` of the complexified torus."""

    z: np.ndarray

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=complex)).copy()
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def x(self) -> np.ndarray:
        return self.z.real

    @property
    def y(self) -> np.ndarray:
        return self.z.imag


@dataclass(frozen=True)
class BoundaryPoint:
    """Point ``(x, y)`` of the tube boundary, ``|y| = tau``.

    Via the imaginary-time exponential ``E(x, xi) = x + i xi``, this is the
    co-vector ``(x, xi = y)`` of length ``tau``.
    """

    x: np.ndarray
    y: np.ndarray
    tau: float = field(default=None)

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float)).copy()
        y = np.atleast_1d(np.asarray(self.y, dtype=float)).copy()
        if x.shape != y.shape:
            raise DomainError("x and y must have the same shape")
        norm = float(np.linalg.norm(y))
        tau = norm if self.tau is None else float(self.tau)
        if abs(norm - tau) > 1e-12 * max(1.0, tau):
            raise DomainError(f"|y| = {norm!r} is not on the boundary of radius {tau!r}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "tau", tau)

    @property
    def z(self) -> np.ndarray:
        return self.x + 1j * self.y

    def as_tube_point(self) -> TubePoint:
        return TubePoint(self.z)

    @classmethod
    def from_direction(cls, x, direction, tau) -> "BoundaryPoint":
        d = np.asarray(direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise DegenerateGeometryError("zero co-direction")
        return cls(x, tau * d / n, tau)


def _points(z) -> np.ndarray:
    if isinstance(z, (TubePoint, BoundaryPoint)):
        return z.z
    return np.asarray(z, dtype=complex)


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------

def lattice_shell(m: int, r_lo: float, r_hi: float) -> np.ndarray:
    """All ``k`` in ``Z^m`` with ``r_lo <= |k| <= r_hi``, lexicographically sorted.

    Returns an integer array of shape ``(n, m)``.
    """
    if r_hi < 0:
        return np.zeros((0, m), dtype=np.int64)
    r_lo = max(float(r_lo), 0.0)
    lo2, hi2 = r_lo * r_lo, float(r_hi) * float(r_hi)
    eps = 1e-9 * max(1.0, hi2)
    R = int(np.floor(np.sqrt(hi2 + eps)))
    if m == 1:
        k = np.arange(-R, R + 1)
        keep = (k * k >= lo2 - eps) & (k * k <= hi2 + eps)
        return k[keep].reshape(-1, 1).astype(np.int64)
    axes = [np.arange(-R, R + 1)] * (m - 1)
    head = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m - 1)
    s = np.sum(head.astype(float) ** 2, axis=1)
    head, s = head[s <= hi2 + eps], s[s <= hi2 + eps]
    t_hi = np.floor(np.sqrt(np.maximum(hi2 - s, 0.0) + eps)).astype(np.int64)
    need = np.maximum(lo2 - s, 0.0)
    t_lo = np.ceil(np.sqrt(need) - 1e-9).astype(np.int64)
    t_lo = np.where(need - eps <= 0, 0, t_lo)
    rows = []
    for h, a, b in zip(head, t_lo, t_hi):
        if a > b:
            continue
        last = np.arange(a, b + 1)
        last = np.concatenate([-last[::-1], last[1:] if a == 0 else last])
        block = np.empty((last.size, m), dtype=np.int64)
        block[:, :-1] = h
        block[:, -1] = last
        rows.append(block)
    if not rows:
        return np.zeros((0, m), dtype=np.int64)
    out = np.concatenate(rows)
    norms2 = np.sum(out.astype(float) ** 2, axis=1)
    out = out[(norms2 >= lo2 - eps) & (norms2 <= hi2 + eps)]
    order = np.lexsort(out.T[::-1])
    return out[order]


def enumerate_modes(model: FlatModel, cutoff: float) -> list[LatticeMode]:
    """Every mode with ``|k| <= cutoff``, in lexicographic order of ``k``."""
    if cutoff < 0:
        raise DomainError("cutoff must be nonnegative")
    return [LatticeMode(tuple(k)) for k in lattice_shell(model.m, 0.0, cutoff)]


def complexified_eigenfunction(mode, z) -> complex:
    """Holomorphic extension ``(2 pi)^(-m/2) exp(i k . z)`` of the eigenfunction."""
    k = mode.as_array() if isinstance(mode, LatticeMode) else np.asarray(mode, float)
    zz = _points(z)
    m = k.shape[-1]
    return (TWO_PI) ** (-m / 2) * np.exp(1j * (zz @ k))


def complexified_distance_sq(model: FlatModel, z, w) -> complex:
    r"""Holomorphic-antiholomorphic extension :math:`r^2_\mathbb{C}(z, \bar w)`.

    Equals :math:`\sum_j (z_j - \bar w_j)^2` on the near-diagonal branch, which
    requires ``|Re z_j - Re w_j| < pi`` for the representatives given. Points
    outside the branch raise :class:`BranchError`; no wrapping is applied.
    """
    zz, ww = _points(z), _points(w)
    if zz.shape[-1] != model.m or ww.shape[-1] != model.m:
        raise DomainError(f"points must have {model.m} coordinates")
    if np.any(np.abs(zz.real - ww.real) >= np.pi):
        raise BranchError("real parts differ by pi or more; outside the near-diagonal branch")
    return np.sum((zz - np.conj(ww)) ** 2, axis=-1)


def grauert_sqrt_rho(model: FlatModel, z):
    """Grauert tube function ``(1/2i) sqrt(r^2_C(z, conj z))``; equals ``|Im z|``."""
    r2 = np.asarray(complexified_distance_sq(model, z, z), dtype=complex)
    # r2 = -4|y|^2 <= 0, principal root is 2i|y|
    return np.real(np.sqrt(r2) / 2j)


def boundary_flow(model: FlatModel, t: float, p: BoundaryPoint,
                  orientation: int = REEB_ORIENTATION) -> BoundaryPoint:
    """Transferred geodesic flow on the tube boundary.

    Flat geodesics are straight lines and the co-direction is conserved, so the
    flow translates ``x`` by ``orientation * t * y / |y|``.
    """
    if orientation not in (1, -1):
        raise DomainError("orientation must be +1 or -1")
    norm = float(np.linalg.norm(p.y))
    if norm == 0.0:
        raise DegenerateGeometryError("flow direction undefined at |y| = 0")
    x = wrap_angle(p.x + orientation * t * p.y / norm)
    return BoundaryPoint(x, p.y, p.tau)


# ---------------------------------------------------------------------------
# spherical integrals
# ---------------------------------------------------------------------------

def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere ``S^n`` in ``R^(n+1)`` (``S^0`` has 2 points)."""
    return float(2.0 * np.exp(0.5 * (n + 1) * np.log(np.pi) - gammaln(0.5 * (n + 1))))


@lru_cache(maxsize=None)
def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    phi = 0.5 * np.pi * (x + 1.0)
    return phi, 0.5 * np.pi * w


def sphere_exponential_moments(m: int, a, rtol: float = 1e-10, n_start: int = 32,
                               n_max: int = 8192):
    r"""Scaled exponential moments over :math:`S^{m-1}`.

    Returns ``(s0, s1)`` with

    .. math::
        s_0(a) = e^{-a}\int_{S^{m-1}} e^{a\omega_1}\,d\sigma,\qquad
        s_1(a) = e^{-a}\int_{S^{m-1}} \omega_1 e^{a\omega_1}\,d\sigma,

    for ``a >= 0``. For ``m >= 2`` the integral is reduced to the polar angle and
    computed with Gauss-Legendre rules doubled until successive values agree to
    ``rtol``; ``m = 1`` uses the two points of ``S^0`` exactly.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise DomainError("moments are defined for a >= 0")
    if m == 1:
        em = np.exp(-2.0 * a)
        return 1.0 + em, 1.0 - em
    area = sphere_area(m - 2)
    flat = a.reshape(-1)
    s0 = np.empty_like(flat)
    s1 = np.empty_like(flat)
    for lo in range(0, flat.size, 2048):
        s0[lo:lo + 2048], s1[lo:lo + 2048] = _polar_moments(
            flat[lo:lo + 2048], m, area, rtol, n_start, n_max)
    return s0.reshape(a.shape), s1.reshape(a.shape)


def _polar_moments(a, m, area, rtol, n_start, n_max):
    def rule(n):
        phi, w = _gl(n)
        c = np.cos(phi)
        wt = w * np.sin(phi) ** (m - 2)
        e = np.exp(np.multiply.outer(a, c - 1.0))
        return area * (e @ wt), area * (e @ (wt * c))

    n = n_start
    s0, s1 = rule(n)
    while True:
        n *= 2
        t0, t1 = rule(n)
        err = max(
            float(np.max(np.abs(t0 - s0) / np.abs(t0), initial=0.0)),
            float(np.max(np.abs(t1 - s1) / np.abs(t0), initial=0.0)),
        )
        s0, s1 = t0, t1
        if err < rtol:
            return s0, s1
        if n >= n_max:
            raise AccuracyError("spherical quadrature did not converge", achieved=err)


def hardy_norm_sq_scaled(m: int, kabs, tau: float):
    r"""``exp(-2 tau |k|) * ||e^{ik.z}||^2`` in :math:`L^2(\partial M_\tau)`, vectorized in ``|k|``."""
    if not tau > 0:
        raise DomainError("tau must be positive")
    s0, _ = sphere_exponential_moments(m, 2.0 * tau * np.asarray(kabs, dtype=float))
    return tau ** m * TWO_PI ** m * s0


def hardy_norm_sq(model: FlatModel, k, tau: float) -> float:
    r"""Squared :math:`L^2(\partial M_\tau, d\mu_\tau)` norm of :math:`e^{ik\cdot z}`.

    .. math::
        \tau^m (2\pi)^m \int_{S^{m-1}} e^{-2\tau k\cdot\omega}\,d\sigma(\omega),

    which for ``m = 2`` equals :math:`\tau^2 (2\pi)^3 I_0(2\tau|k|)`. Depends on
    ``k`` only through ``|k|``.
    """
    kabs = k.eigenvalue if isinstance(k, LatticeMode) else float(np.linalg.norm(k))
    scaled = hardy_norm_sq_scaled(model.m, kabs, tau)
    return float(scaled * np.exp(2.0 * tau * kabs))
