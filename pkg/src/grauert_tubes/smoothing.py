r"""Smoothing function :math:`\chi` for spectral localization.

Fourier convention (used everywhere in the package):

.. math::
    \hat\chi(t) = \frac{1}{2\pi}\int \chi(s) e^{-ist}\,ds, \qquad
    \chi(s) = \int \hat\chi(t) e^{ist}\,dt .

Construction: with the smooth bump :math:`\beta(t) = e^{-1/(1-(2t/\epsilon)^2)}`
on :math:`(-\epsilon/2, \epsilon/2)`, set :math:`\hat\chi = c\,\beta\star\beta`
with :math:`c = 1/\int\beta^2`. Then :math:`\hat\chi` is supported in
:math:`[-\epsilon, \epsilon]`, :math:`\hat\chi(0) = 1`, and
:math:`\chi(s) = c\,B(s)^2 \ge 0` where :math:`B(s) = \int\beta(t)e^{ist}dt` is
real and even. ``chi`` is Schwartz, with stretched-exponential decay.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import IntegrationWarning, quad, trapezoid
from scipy.interpolate import CubicSpline

from .errors import DomainError

GRID_STEP = 0.01
_GL_NODES = 1200


def _bump(t, eps):
    t = np.asarray(t, dtype=float)
    x = 2.0 * t / eps
    inside = np.abs(x) < 1.0
    out = np.zeros_like(x)
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def _half_rule(eps: float, n: int = _GL_NODES):
    x, w = np.polynomial.legendre.leggauss(n)
    t = 0.25 * eps * (x + 1.0)
    return t, 0.25 * eps * w * _bump(t, eps)


def bump_transform(s, eps: float) -> np.ndarray:
    """``B(s) = int beta(t) exp(i s t) dt`` by a fixed Gauss-Legendre rule (vectorized)."""
    t, wb = _half_rule(float(eps))
    s = np.asarray(s, dtype=float)
    flat = np.abs(s).reshape(-1)
    out = np.empty_like(flat)
    for lo in range(0, flat.size, 4096):
        blk = flat[lo:lo + 4096]
        out[lo:lo + 4096] = 2.0 * (np.cos(np.multiply.outer(blk, t)) @ wb)
    return out.reshape(s.shape)


def bump_transform_adaptive(s: float, eps: float) -> float:
    """``B(s)`` by adaptive QUADPACK integration with a cosine weight."""
    f = lambda t: float(_bump(t, eps))
    if s == 0:
        val = quad(f, 0.0, eps / 2, epsabs=1e-15, epsrel=1e-13, limit=400)[0]
    else:
        val = quad(f, 0.0, eps / 2, weight="cos", wvar=abs(s), epsabs=1e-16,
                   epsrel=1e-13, limit=400)[0]
    return 2.0 * val


@dataclass(frozen=True, eq=False)
class SmoothingFunction:
    """Positive, even :math:`\\chi` with :math:`\\hat\\chi` supported in ``[-eps, eps]``.

    Values for ``|s| <= s_max`` come from a cubic spline on a grid of step
    :data:`GRID_STEP`; larger arguments are evaluated directly.

    Attributes
    ----------
    eps : float
        Half-width of the Fourier support.
    normalization : float
        ``c = 1 / int beta^2`` so that ``chi_hat(0) = 1``.
    s_max : float
        Extent of the cached grid.
    """

    eps: float
    normalization: float
    s_max: float
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    _spline: CubicSpline = field(repr=False)
    _envelope: np.ndarray = field(repr=False)

    def __call__(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        out = np.empty_like(s)
        inside = s <= self.s_max
        out[inside] = self._spline(s[inside])
        if np.any(~inside):
            out[~inside] = self.direct(s[~inside])
        return np.maximum(out, 0.0) if out.ndim else float(max(out, 0.0))

    def direct(self, s):
        """``chi(s)`` without interpolation (fixed high-order quadrature)."""
        b = bump_transform(s, self.eps)
        return self.normalization * b * b

    def direct_adaptive(self, s: float) -> float:
        """``chi(s)`` by adaptive quadrature; slow, used to validate the cache."""
        with warnings.catch_warnings():
            # QUADPACK flags roundoff once |B(s)| reaches ~1e-16
            warnings.simplefilter("ignore", IntegrationWarning)
            b = bump_transform_adaptive(float(s), self.eps)
        return self.normalization * b * b

    def hat(self, t):
        r"""``chi_hat(t) = c (beta * beta)(t)`` by quadrature over the bump support."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x, w = np.polynomial.legendre.leggauss(400)
        r = 0.25 * self.eps * (x + 1.0) * 2.0 - 0.5 * self.eps
        wr = 0.5 * self.eps * w * _bump(r, self.eps)
        conv = _bump(t[:, None] - r[None, :], self.eps) @ wr
        return self.normalization * conv

    def envelope(self, j):
        """Upper bound for ``sup_{|s| >= j} chi(s)``.

        Read from the cached grid for ``j <= s_max``; beyond it the fitted
        ``C_6 (1 + j)^-6`` decay bound is used.
        """
        j = np.abs(np.asarray(j, dtype=float))
        idx = np.minimum(np.floor(j / GRID_STEP).astype(np.int64), self._envelope.size - 1)
        # chi is band-limited to [-eps, eps]; a local peak between two nodes
        # exceeds the larger node value by roughly (h eps)^2 / 8 relative, so
        # (h eps)^2 is a generous margin
        near = self._envelope[idx] * (1.0 + (GRID_STEP * self.eps) ** 2)
        far = self.decay_constants(6)[6] * (1.0 + j) ** -6.0
        return np.where(j <= self.s_max, near, far)

    def decay_constants(self, n_max: int = 6) -> dict[int, float]:
        """Empirical ``C_N = sup_s chi(s) (1 + |s|)^N`` on the cached grid."""
        return {n: _decay_constant(self, n) for n in range(n_max + 1)}

    def mass(self) -> float:
        """``int chi`` (trapezoid on the cached grid); equals ``2 pi chi_hat(0)``."""
        return float(2.0 * trapezoid(self.values, self.grid))


@lru_cache(maxsize=None)
def _decay_constant(chi: SmoothingFunction, n: int) -> float:
    return float(np.max(chi.values * (1.0 + chi.grid) ** n))


@lru_cache(maxsize=16)
def make_chi(eps: float, s_max: float | None = None) -> SmoothingFunction:
    """Build (and cache) the smoothing function with Fourier support ``[-eps, eps]``."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    eps = float(eps)
    if s_max is None:
        # chi(s) ~ exp(-2 sqrt(eps s)) is at quadrature roundoff well before s_max;
        # the grid extent keeps the C_6 extrapolation beyond it negligible
        s_max = float(np.clip(2400.0 / eps, 100.0, 4000.0))
    t, wb = _half_rule(eps)
    beta_sq = 2.0 * float(np.sum(wb * _bump(t, eps)))
    c = 1.0 / beta_sq
    n = int(np.ceil(s_max / GRID_STEP))
    grid = np.linspace(0.0, n * GRID_STEP, n + 1)
    b = bump_transform(grid, eps)
    values = c * b * b
    spline = CubicSpline(
        np.concatenate([-grid[:0:-1][-3:], grid]),
        np.concatenate([values[1:4][::-1], values]),
    )
    envelope = np.maximum.accumulate(values[::-1])[::-1]
    for arr in (grid, values, envelope):
        arr.setflags(write=False)
    return SmoothingFunction(eps, c, float(grid[-1]), grid, values, spline, envelope)
