r"""Stationary-phase data of the reduced phase and a numerical oscillatory-integral oracle.

The reduced phase in the variables ``(t, sigma_1, sigma_2, Re w_0)`` is

.. math::
    \Psi(t, \sigma_1, \sigma_2, w) = -t - \frac{\sigma_2}{2} w
        + \frac{\sigma_1}{2}(w + 2\tau t),

a quadratic polynomial with the single critical point
``(0, 1/tau, 1/tau, 0)``, where it vanishes.
"""
from __future__ import annotations

import json
import string
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import AccuracyError, DomainError, UnsupportedPhaseError

VARIABLES = ("t", "sigma1", "sigma2", "w0_re")


@dataclass(frozen=True)
class ReducedPhasePoint:
    t: float
    sigma1: float
    sigma2: float
    w0_re: float

    def __post_init__(self):
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise DomainError("sigma1 and sigma2 must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.t, self.sigma1, self.sigma2, self.w0_re])


def reduced_phase(p, tau: float):
    """Reduced phase at a :class:`ReducedPhasePoint` or at an array ``(..., 4)``."""
    x = p.as_array() if isinstance(p, ReducedPhasePoint) else np.asarray(p, dtype=float)
    t, s1, s2, w = np.moveaxis(x, -1, 0)
    return -t - 0.5 * s2 * w + 0.5 * s1 * (w + 2.0 * tau * t)


def reduced_phase_gradient(x, tau: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    t, s1, s2, w = np.moveaxis(x, -1, 0)
    return np.stack([-1.0 + tau * s1, 0.5 * w + tau * t, -0.5 * w, 0.5 * (s1 - s2)], axis=-1)


def reduced_phase_hessian(tau: float) -> np.ndarray:
    return np.array([
        [0.0, tau, 0.0, 0.0],
        [tau, 0.0, 0.0, 0.5],
        [0.0, 0.0, 0.0, -0.5],
        [0.0, 0.5, -0.5, 0.0],
    ])


def claimed_inverse_hessian(tau: float) -> np.ndarray:
    return np.array([
        [0.0, 1.0 / tau, 1.0 / tau, 0.0],
        [1.0 / tau, 0.0, 0.0, 0.0],
        [1.0 / tau, 0.0, 0.0, -2.0],
        [0.0, 0.0, -2.0, 0.0],
    ])


def leading_coefficient(lam: float, tau: float, phase_value: float = 0.0) -> complex:
    r""":math:`e^{i\sqrt\lambda\Psi_C}\det(\sqrt\lambda\,\Psi''_C/2\pi i)^{-1/2}`.

    The square root is taken eigenvalue by eigenvalue on the principal branch.
    """
    h = reduced_phase_hessian(tau)
    eig = np.linalg.eigvals(np.sqrt(lam) * h / (2j * np.pi))
    return complex(np.exp(1j * np.sqrt(lam) * phase_value) / np.prod(np.sqrt(eig)))


@dataclass(frozen=True)
class PhaseReport:
    """Critical data of the reduced phase at tube radius ``tau``."""

    tau: float
    critical_point: list
    gradient_norm: float
    phase_value: float
    hessian: list
    inverse: list
    determinant: float
    signature: int
    gamma_times_lam_tau: float
    inverse_residual: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def phase_critical_data(tau: float, lam: float = 1.0) -> PhaseReport:
    """Critical point, Hessian, inverse, determinant, signature and ``gamma * lam * tau``."""
    if not tau > 0:
        raise DomainError("tau must be positive")
    crit = np.array([0.0, 1.0 / tau, 1.0 / tau, 0.0])
    h = reduced_phase_hessian(tau)
    inv = claimed_inverse_hessian(tau)
    eig = np.linalg.eigvalsh(h)
    gamma = leading_coefficient(lam, tau, float(reduced_phase(crit, tau)))
    return PhaseReport(
        tau=float(tau),
        critical_point=crit.tolist(),
        gradient_norm=float(np.linalg.norm(reduced_phase_gradient(crit, tau))),
        phase_value=float(reduced_phase(crit, tau)),
        hessian=h.tolist(),
        inverse=inv.tolist(),
        determinant=float(np.linalg.det(h)),
        signature=int(np.sum(eig > 0) - np.sum(eig < 0)),
        gamma_times_lam_tau=float(abs(gamma) * lam * tau),
        inverse_residual=float(np.max(np.abs(h @ inv - np.eye(4)))),
    )


@dataclass(frozen=True)
class GradientScan:
    """Result of :func:`gradient_scan`.

    Attributes
    ----------
    min_outside_ball : float
        Smallest ``|grad Psi|`` at grid points farther than ``exclude_radius``
        from the critical point.
    linear_bound : float
        ``sigma_min(Psi'') * exclude_radius``; the phase is quadratic, so
        ``min_outside_ball`` can never be smaller.
    min_sigma_region : float
        Smallest ``|grad Psi|`` where ``(s1/2 - s2/2)^2 + (tau s1 - 1)^2 >= 1/4``,
        the region on which the cutoff around the critical set vanishes.
    argmin_inside : np.ndarray
        Grid point of smallest gradient norm inside the ball.
    """

    min_outside_ball: float
    linear_bound: float
    min_sigma_region: float
    argmin_inside: np.ndarray


def gradient_scan(tau: float, step: float = 1e-2, exclude_radius: float = 0.25) -> GradientScan:
    """Grid scan of ``|grad Psi|`` on ``{|t| <= 1, sigma_i in [1/2tau, 2/tau], |w| <= 1}``.

    Both ``|grad Psi|^2`` and the squared distance to the critical point split
    into a ``(sigma1, sigma2)`` part plus a ``(t, w)`` part, so the constrained
    minima over the full 4-d grid are found by sorting the sigma-plane by
    distance and taking prefix and suffix minima.
    """
    t = np.arange(-1.0, 1.0 + step / 2, step)
    s = np.arange(0.5 / tau, 2.0 / tau + step / 2, step)
    c = 1.0 / tau
    s1, s2 = (a.ravel() for a in np.meshgrid(s, s, indexing="ij"))
    tt, ww = (a.ravel() for a in np.meshgrid(t, t, indexing="ij"))
    n_s = (tau * s1 - 1.0) ** 2 + 0.25 * (s1 - s2) ** 2
    d_s = (s1 - c) ** 2 + (s2 - c) ** 2
    n_tw = (0.5 * ww + tau * tt) ** 2 + 0.25 * ww ** 2
    d_tw = tt ** 2 + ww ** 2

    order = np.argsort(d_s, kind="stable")
    d_sorted, n_sorted = d_s[order], n_s[order]
    suffix = np.minimum.accumulate(n_sorted[::-1])[::-1]
    prefix_arg = np.zeros(n_sorted.size, dtype=np.int64)
    for k in range(1, n_sorted.size):
        prev = prefix_arg[k - 1]
        prefix_arg[k] = k if n_sorted[k] < n_sorted[prev] else prev

    cut = np.searchsorted(d_sorted, exclude_radius ** 2 - d_tw, side="right")
    has_out = cut < n_sorted.size
    out = suffix[np.minimum(cut, n_sorted.size - 1)] + n_tw
    best_out = float(np.sqrt(np.min(out[has_out]))) if np.any(has_out) else np.inf

    has_in = cut > 0
    arg_s = order[prefix_arg[np.maximum(cut - 1, 0)]]
    inner = np.where(has_in, n_s[arg_s] + n_tw, np.inf)
    j = int(np.argmin(inner))
    arg_in = np.array([tt[j], s1[arg_s[j]], s2[arg_s[j]], ww[j]])

    region = n_s >= 0.25
    best_region = float(np.sqrt(np.min(n_s[region]) + np.min(n_tw))) if np.any(region) else np.inf
    smin = float(np.linalg.svd(reduced_phase_hessian(tau), compute_uv=False).min())
    return GradientScan(best_out, smin * exclude_radius, best_region, arg_in)


# ---------------------------------------------------------------------------
# L operator
# ---------------------------------------------------------------------------

def _mixed_partial(f, x, i, j, h):
    ei = np.zeros(4)
    ej = np.zeros(4)
    ei[i] = h
    ej[j] = h
    return (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)


def _richardson(f, x, i, j, h):
    return (4.0 * _mixed_partial(f, x, i, j, h / 2) - _mixed_partial(f, x, i, j, h)) / 3.0


def apply_L_operator(f: Callable, tau: float, h: float = 1e-4, partials: dict | None = None,
                     domain: Callable | None = None) -> Callable:
    r"""Return ``x -> (2/tau) f_{s1 t} + (2/tau) f_{s2 t} - 4 f_{s2 w}``.

    Parameters
    ----------
    f : callable
        Function of a length-4 array ``(t, sigma1, sigma2, w0_re)``.
    partials : dict, optional
        Analytic mixed partials keyed by ``("sigma1", "t")``, ``("sigma2", "t")``
        and ``("sigma2", "w0_re")``. Missing entries use a central stencil of step
        ``h`` with one Richardson extrapolation.
    domain : callable, optional
        Predicate on points; a stencil point outside the domain raises
        :class:`DomainError`.
    """
    partials = partials or {}
    idx = {name: k for k, name in enumerate(VARIABLES)}
    terms = ((2.0 / tau, "sigma1", "t"), (2.0 / tau, "sigma2", "t"), (-4.0, "sigma2", "w0_re"))

    def lf(x):
        x = np.asarray(x, dtype=float)
        if domain is not None:
            for d in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                for a, b in ((idx["sigma1"], idx["t"]), (idx["sigma2"], idx["t"]),
                             (idx["sigma2"], idx["w0_re"])):
                    y = x.copy()
                    y[a] += d[0] * h
                    y[b] += d[1] * h
                    if not domain(y):
                        raise DomainError("finite-difference stencil leaves the domain")
        total = 0.0
        for coef, a, b in terms:
            key = (a, b)
            if key in partials:
                total += coef * partials[key](x)
            else:
                total += coef * _richardson(f, x, idx[a], idx[b], h)
        return total

    return lf


# ---------------------------------------------------------------------------
# Gaussian integral
# ---------------------------------------------------------------------------

def _gaussian_factor(tau, c, n):
    s, wts = np.polynomial.hermite.hermgauss(n)
    keep = np.abs(s) <= 8.0
    s, wts = s[keep], wts[keep]
    # z = sqrt(tau) (s_a + i s_b); weight exp(-s_a^2 - s_b^2) is the Gaussian part
    z = np.sqrt(tau) * (s[:, None] + 1j * s[None, :])
    return tau * np.sum(wts[:, None] * wts[None, :] * np.exp(z * c / tau))


def gaussian_integral_check(m: int, tau: float, c=(), n: int = 80, tol: float = 1e-10) -> complex:
    r"""Quadrature of :math:`\int_{\mathbb{C}^{m-1}} e^{(-|z|^2 + z\cdot c)/\tau}\,dz`.

    Tensor Gauss-Hermite in each real coordinate, nodes beyond ``8 sqrt(tau)``
    dropped. The integrand is a product over complex coordinates, so the tensor
    sum is evaluated as a product of two-dimensional sums. Convergence is
    checked against ``n + 10`` nodes.
    """
    if not tau > 0:
        raise DomainError("tau must be positive")
    c = np.atleast_1d(np.asarray(c, dtype=complex)) if np.size(c) else np.zeros(m - 1, complex)
    if c.shape != (m - 1,):
        raise DomainError(f"c must have length {m - 1}")
    vals = []
    for nn in (n, n + 10):
        vals.append(np.prod([_gaussian_factor(tau, cj, nn) for cj in c]) if m > 1 else 1.0 + 0j)
    err = abs(vals[1] - vals[0]) / max(abs(vals[1]), 1e-300)
    if err > tol:
        raise AccuracyError("Gauss-Hermite rule did not converge", achieved=err)
    return complex(vals[1])


# ---------------------------------------------------------------------------
# oscillatory integrals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticPhase:
    """``Phi(x) = x^T H x / 2 + g . x + c``."""

    hessian: np.ndarray
    gradient: np.ndarray
    constant: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.hessian, x) + x @ self.gradient + self.constant

    @property
    def dim(self) -> int:
        return self.hessian.shape[0]

    def critical_point(self) -> np.ndarray:
        h = np.asarray(self.hessian, dtype=float)
        if np.linalg.cond(h) > 1e10:
            raise UnsupportedPhaseError("degenerate critical point")
        return np.linalg.solve(h, -np.asarray(self.gradient, dtype=float))


def reduced_quadratic_phase(tau: float) -> QuadraticPhase:
    """The reduced phase written as a :class:`QuadraticPhase`."""
    return QuadraticPhase(reduced_phase_hessian(tau), np.array([-1.0, 0.0, 0.0, 0.0]), 0.0)


@dataclass(frozen=True)
class GaussianAmplitude:
    """``a(x) = exp(-(x - center)^T A (x - center) / 2)`` with ``A`` positive definite."""

    precision: np.ndarray
    center: np.ndarray

    def __call__(self, x):
        y = np.asarray(x, dtype=float) - self.center
        return np.exp(-0.5 * np.einsum("...i,ij,...j->...", y, self.precision, y))


@dataclass(frozen=True)
class BumpAmplitude:
    """Product of smooth bumps ``exp(-1/(1 - ((x_i - c_i)/r)^2))``, compactly supported."""

    center: np.ndarray
    radius: float

    def factor(self, i: int, x):
        y = (np.asarray(x, dtype=float) - self.center[i]) / self.radius
        out = np.zeros_like(y)
        inside = np.abs(y) < 1
        out[inside] = np.exp(-1.0 / (1.0 - y[inside] ** 2))
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.prod([self.factor(i, x[..., i]) for i in range(x.shape[-1])], axis=0)


@dataclass(frozen=True)
class OracleResult:
    value: complex
    prediction: complex
    relative_deviation: float
    quadrature_error: float
    nodes_per_axis: tuple


def _taper(x, lo, hi, frac=0.15):
    """1 on the inner part of ``[lo, hi]``, smoothly 0 at the ends."""
    width = frac * (hi - lo)
    out = np.ones_like(x)
    for edge, sgn in ((lo, 1.0), (hi, -1.0)):
        d = sgn * (x - edge) / width
        mid = (d > 0) & (d < 1)
        f = lambda s: np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
        out = np.where(d <= 0, 0.0, out)
        out = np.where(mid, out * f(d) / (f(d) + f(1 - d)), out)
    return out


def stationary_phase_prediction(phase: QuadraticPhase, amplitude: Callable, lam: float) -> complex:
    """Leading term ``a(C) e^{i lam Phi(C)} (2pi/lam)^{d/2} |det H|^{-1/2} e^{i pi sgn/4}``."""
    crit = phase.critical_point()
    h = np.asarray(phase.hessian, dtype=float)
    d = h.shape[0]
    eig = np.linalg.eigvalsh(h)
    sgn = int(np.sum(eig > 0) - np.sum(eig < 0))
    return complex(
        amplitude(crit) * np.exp(1j * lam * phase(crit)) * (2 * np.pi / lam) ** (d / 2)
        / np.sqrt(abs(np.prod(eig))) * np.exp(1j * np.pi * sgn / 4)
    )


def gaussian_exact(phase: QuadraticPhase, amplitude: GaussianAmplitude, lam: float) -> complex:
    r"""Closed form of :math:`\int e^{i\lambda\Phi}a` over :math:`\mathbb{R}^d` when ``a`` is
    Gaussian centred at the critical point: ``e^{i lam Phi(C)} (2pi)^{d/2} det(A - i lam H)^{-1/2}``."""
    crit = phase.critical_point()
    if not np.allclose(amplitude.center, crit, atol=1e-14):
        raise DomainError("closed form requires the amplitude centred at the critical point")
    mat = np.asarray(amplitude.precision) - 1j * lam * np.asarray(phase.hessian)
    eig = np.linalg.eigvals(mat)
    d = mat.shape[0]
    return complex(np.exp(1j * lam * phase(crit)) * (2 * np.pi) ** (d / 2) / np.prod(np.sqrt(eig)))


def _check_single_critical(phase, domain):
    crit = phase.critical_point()
    lo = np.array([a for a, _ in domain])
    hi = np.array([b for _, b in domain])
    if np.any(crit <= lo) or np.any(crit >= hi):
        raise UnsupportedPhaseError("critical point is not interior to the domain")
    return crit


def _structured_integral(phase: QuadraticPhase, amplitude, lam, grids, weights):
    """Trapezoid sum of ``e^{i lam Phi} a`` contracted pairwise along nonzero couplings."""
    d = phase.dim
    h = np.asarray(phase.hessian, dtype=float)
    quad = 1j * lam * h
    lin = 1j * lam * np.asarray(phase.gradient, dtype=float)
    if isinstance(amplitude, GaussianAmplitude):
        a = np.asarray(amplitude.precision, dtype=float)
        quad = quad - a
        lin = lin + a @ amplitude.center
        const = -0.5 * amplitude.center @ a @ amplitude.center
        factors = [np.ones_like(g) for g in grids]
    elif isinstance(amplitude, BumpAmplitude):
        const = 0.0
        factors = [amplitude.factor(i, g) for i, g in enumerate(grids)]
    else:
        raise UnsupportedPhaseError("structured quadrature needs a Gaussian or bump amplitude")
    letters = string.ascii_lowercase[:d]
    operands, subs = [], []
    for i, g in enumerate(grids):
        vec = weights[i] * factors[i] * np.exp(0.5 * quad[i, i] * g * g + lin[i] * g)
        operands.append(vec)
        subs.append(letters[i])
    for i in range(d):
        for j in range(i + 1, d):
            if quad[i, j] != 0:
                operands.append(np.exp(quad[i, j] * np.outer(grids[i], grids[j])))
                subs.append(letters[i] + letters[j])
    expr = ",".join(subs) + "->"
    total = np.einsum(expr, *operands, optimize="greedy")
    return complex(np.exp(1j * lam * phase.constant + const) * total)


def oscillatory_oracle(phase, amplitude, lam: float, domain: Sequence[tuple],
                       oversample: float = 2.0, bandwidth: float = 200.0,
                       taper: bool = True) -> OracleResult:
    r"""Numerical value of :math:`\int e^{i\lambda\Phi(x)}a(x)\,dx` over a box.

    The amplitude is multiplied by a smooth taper equal to 1 away from the
    box edges, so the box boundary contributes only rapidly decaying terms.
    The trapezoid rule with step below ``2 pi / (oversample * (lam max|dPhi| +
    bandwidth / span))`` then converges spectrally; the quadrature error is estimated by repeating with
    1.5 times the nodes. For quadratic phases the sum is contracted along the
    nonzero couplings of the Hessian, which is the same trapezoid sum at a
    fraction of the cost.

    Raises
    ------
    UnsupportedPhaseError
        If the critical point is degenerate or not interior to the box.
    """
    if lam < 20:
        raise DomainError("lam must be >= 20")
    if not isinstance(phase, QuadraticPhase):
        raise UnsupportedPhaseError("only quadratic phases are supported by the oracle")
    d = phase.dim
    if len(domain) != d:
        raise DomainError("domain must give one interval per variable")
    _check_single_critical(phase, domain)
    lo = np.array([a for a, _ in domain], dtype=float)
    hi = np.array([b for _, b in domain], dtype=float)
    corners = np.array(np.meshgrid(*[[a, b] for a, b in domain], indexing="ij")).reshape(d, -1).T
    grad_max = np.max(np.abs(corners @ np.asarray(phase.hessian).T + phase.gradient), axis=0)
    prediction = stationary_phase_prediction(phase, amplitude, lam)
    values, sizes = [], []
    for scale in (1.0, 1.5):
        grids, weights = [], []
        for i in range(d):
            span = hi[i] - lo[i]
            freq = lam * grad_max[i] + bandwidth / span
            n = int(np.ceil(scale * oversample * span * freq / (2 * np.pi))) + 1
            g = np.linspace(lo[i], hi[i], n)
            wt = np.full(n, span / (n - 1))
            wt[[0, -1]] *= 0.5
            if taper:
                wt = wt * _taper(g, lo[i], hi[i])
            grids.append(g)
            weights.append(wt)
        values.append(_structured_integral(phase, amplitude, lam, grids, weights))
        sizes.append(tuple(len(g) for g in grids))
    val = values[1]
    return OracleResult(
        value=val,
        prediction=prediction,
        # undefined when the amplitude vanishes at the critical point
        relative_deviation=float(abs(val / prediction - 1.0)) if prediction != 0 else float("inf"),
        quadrature_error=float(abs(values[1] - values[0])),
        nodes_per_axis=sizes[1],
    )
