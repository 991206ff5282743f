r"""Reduced Heisenberg group, its affine action on the Siegel domain, and the
level-one model Szegő kernel.

Conventions
-----------
A point of the reduced Heisenberg group of degree ``m - 1`` is a pair
``(theta, zeta)`` with ``theta`` real and ``zeta`` in :math:`\mathbb{C}^{m-1}`.
The group law uses the conjugated symplectic term

.. math::
    (\theta, \zeta)\cdot(\varphi, \eta)
        = (\theta + \varphi + 2\,\mathrm{Im}(\zeta\cdot\bar\eta), \zeta + \eta),

which is the form compatible with the affine action on
:math:`D_m = \{\mathrm{Im}\,\zeta_0 > \sum_{j\ge1}|\zeta_j|^2\}` and makes
``(-theta, -zeta)`` the inverse.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError

#: Absolute tolerance of the closed boundary band in :func:`siegel_classify`.
TOL_BOUNDARY = 1e-10


def _as_cvec(z) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    if arr.ndim != 1:
        raise DimensionError(f"expected a 1-d complex vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class HeisenbergPoint:
    """Point ``(theta, zeta)`` of the reduced Heisenberg group of degree ``m - 1``."""

    theta: float
    zeta: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta))
        zeta = np.asarray(self.zeta, dtype=complex).reshape(-1)
        zeta.setflags(write=False)
        object.__setattr__(self, "zeta", zeta)

    @property
    def degree(self) -> int:
        return self.zeta.shape[0]

    @property
    def m(self) -> int:
        return self.degree + 1

    def inverse(self) -> "HeisenbergPoint":
        return HeisenbergPoint(-self.theta, -self.zeta)

    @classmethod
    def identity(cls, m: int) -> "HeisenbergPoint":
        if m < 1:
            raise DomainError("m must be >= 1")
        return cls(0.0, np.zeros(m - 1, dtype=complex))


@dataclass(frozen=True)
class SiegelPoint:
    """Point ``(zeta_0, ..., zeta_{m-1})`` of the ambient space of the Siegel domain."""

    zeta: np.ndarray

    def __post_init__(self):
        zeta = _as_cvec(self.zeta).copy()
        if zeta.shape[0] < 1:
            raise DimensionError("a Siegel point needs at least the zeta_0 entry")
        zeta.setflags(write=False)
        object.__setattr__(self, "zeta", zeta)

    @property
    def m(self) -> int:
        return self.zeta.shape[0]

    def defect(self) -> float:
        """``Im zeta_0 - sum_{j>=1} |zeta_j|^2``; positive inside the domain."""
        return float(self.zeta[0].imag - np.sum(np.abs(self.zeta[1:]) ** 2))


class SiegelRegion(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


def _check_same_degree(a: HeisenbergPoint, b: HeisenbergPoint):
    if a.degree != b.degree:
        raise DimensionError(f"degree mismatch: {a.degree} vs {b.degree}")


def group_mul(a: HeisenbergPoint, b: HeisenbergPoint) -> HeisenbergPoint:
    """Multiply two points with the conjugated group law."""
    _check_same_degree(a, b)
    symplectic = 2.0 * np.imag(np.dot(a.zeta, np.conj(b.zeta)))
    return HeisenbergPoint(a.theta + b.theta + symplectic, a.zeta + b.zeta)


def model_szego_kernel(m: int, a: HeisenbergPoint, b: HeisenbergPoint) -> complex:
    r"""Level-one Szegő kernel of the reduced Heisenberg group.

    .. math::
        \Pi_1^{H}(a, b) = \pi^{-(m-1)} e^{i(\theta_a - \theta_b)}
            e^{\zeta_a\cdot\bar\zeta_b - |\zeta_a|^2/2 - |\zeta_b|^2/2}

    For ``m = 1`` the Gaussian factor is absent and the prefactor is 1.
    """
    if m < 1:
        raise DomainError("m must be >= 1")
    _check_same_degree(a, b)
    if a.degree != m - 1:
        raise DimensionError(f"points have degree {a.degree}, expected {m - 1}")
    za, zb = a.zeta, b.zeta
    expo = (
        1j * (a.theta - b.theta)
        + np.dot(za, np.conj(zb))
        - 0.5 * np.vdot(za, za).real
        - 0.5 * np.vdot(zb, zb).real
    )
    return complex(np.pi ** (-(m - 1)) * np.exp(expo))


def affine_action(h: HeisenbergPoint, p: SiegelPoint) -> SiegelPoint:
    """Holomorphic affine action of ``h`` on a point of :math:`\\mathbb{C}^m`."""
    if p.m != h.degree + 1:
        raise DimensionError(f"Siegel point has {p.m} entries, expected {h.degree + 1}")
    z = h.zeta
    rest = p.zeta[1:]
    zeta0 = (
        p.zeta[0]
        + h.theta
        + 1j * np.vdot(z, z).real
        + 2j * np.dot(rest, np.conj(z))
    )
    return SiegelPoint(np.concatenate([[zeta0], rest + z]))


def siegel_classify(p: SiegelPoint, tol: float = TOL_BOUNDARY) -> SiegelRegion:
    """Classify ``p`` against the boundary of the Siegel domain (closed band ``tol``)."""
    d = p.defect()
    if abs(d) <= tol:
        return SiegelRegion.BOUNDARY
    return SiegelRegion.INTERIOR if d > 0 else SiegelRegion.EXTERIOR


def theorem_leading_factor(m: int, tau: float, theta: float, phi: float, u=(), v=()) -> complex:
    r"""Leading shape factor of the scaled kernels at tube radius ``tau``.

    .. math::
        F = \exp\Big(\tfrac{1}{\tau}\big(\tfrac{i}{2}(\theta-\varphi)
             - \tfrac{|u|^2}{2} - \tfrac{|v|^2}{2} + u\cdot\bar v\big)\Big)

    The pairing ``u . conj(v)`` keeps ``F`` holomorphic in the first argument, so that
    ``F = pi^(m-1) * model_szego_kernel(m, (theta/2tau, u/sqrt(tau)), (phi/2tau, v/sqrt(tau)))``
    holds exactly. ``F`` equals 1 on the diagonal and ``|F| = exp(-|u - v|^2 / 2 tau)``.
    """
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    u = _as_cvec(u) if np.size(u) else np.zeros(0, dtype=complex)
    v = _as_cvec(v) if np.size(v) else np.zeros(0, dtype=complex)
    if u.shape != (m - 1,) or v.shape != (m - 1,):
        raise DimensionError(f"u, v must have length {m - 1}")
    expo = (
        0.5j * (theta - phi)
        - 0.5 * np.vdot(u, u).real
        - 0.5 * np.vdot(v, v).real
        + np.dot(u, np.conj(v))
    ) / tau
    return complex(np.exp(expo))


def theorem_leading_factor_batch(tau, theta, phi, u, v):
    """Vectorized :func:`theorem_leading_factor`.

    ``theta``, ``phi`` have shape ``(n,)``; ``u``, ``v`` have shape ``(n, m-1)``.
    """
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    expo = (
        0.5j * (np.asarray(theta) - np.asarray(phi))
        - 0.5 * np.sum(np.abs(u) ** 2, axis=-1)
        - 0.5 * np.sum(np.abs(v) ** 2, axis=-1)
        + np.sum(u * np.conj(v), axis=-1)
    ) / tau
    return np.exp(expo)
