r"""Defining function, polarized phase, diastasis, and Heisenberg charts on the
boundary of a flat Grauert tube.

A Heisenberg chart at a boundary point ``p`` is a holomorphic polynomial map of
degree two, ``w -> (z_0, u)``, normalized so that the defining function reads

.. math::
    \phi_\tau = -\mathrm{Im}\, z_0 + |u|^2
        + O(|z_0||u| + |z_0|^2 + |u|^3).

Only the quadratic terms in the transverse directions are absorbed into
``z_0``; quadratic terms involving the normal coordinate stay in the remainder,
where they are ``O(|z_0|^2)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (
    ChartValidityError,
    DegenerateGeometryError,
    DomainError,
    FitError,
)
from .models import (
    REEB_ORIENTATION,
    BoundaryPoint,
    FlatModel,
    boundary_flow,
    complexified_distance_sq,
    grauert_sqrt_rho,
    wrap_angle,
)

#: Chart validity radius as a fraction of ``tau`` (Euclidean norm of ``(z_0, u)``).
VALIDITY_FRACTION = 0.3


def defining_function(model: FlatModel, z, tau: float):
    """``rho(z) - tau^2``, negative inside the tube."""
    return grauert_sqrt_rho(model, z) ** 2 - tau ** 2


def polarized_phi(model: FlatModel, z, w, tau: float):
    r"""Sesqui-holomorphic extension :math:`-\tfrac14 r^2_\mathbb{C}(z,\bar w) - \tau^2`."""
    return -0.25 * complexified_distance_sq(model, z, w) - tau ** 2


def psi_phase(model: FlatModel, z, w, tau: float):
    """``polarized_phi / i``; satisfies ``psi(z, w) = -conj(psi(w, z))``."""
    return polarized_phi(model, z, w, tau) / 1j


def diastasis(model: FlatModel, z, w, tau: float):
    """Calabi diastasis of the polarized defining function (real)."""
    val = (
        polarized_phi(model, z, z, tau)
        + polarized_phi(model, w, w, tau)
        - polarized_phi(model, z, w, tau)
        - polarized_phi(model, w, z, tau)
    )
    return np.real(val)


@dataclass(frozen=True)
class DiastasisFit:
    constant: float
    n_pairs: int
    ratios_min: float
    ratios_max: float


def diastasis_lower_bound(model: FlatModel, tau: float, n_pairs: int = 1000,
                          max_sep: float = 0.5, seed: int = 0) -> DiastasisFit:
    """Fit ``c`` in ``D(z, w) >= c d(z, w)^2`` over random near-diagonal boundary pairs.

    ``d`` is the Euclidean distance between the two boundary points in ``(x, y)``.
    """
    rng = np.random.default_rng(seed)
    m = model.m
    dirs_a = rng.normal(size=(n_pairs, m))
    dirs_b = dirs_a + max_sep / tau * rng.uniform(-1, 1, size=(n_pairs, m))
    ya = tau * dirs_a / np.linalg.norm(dirs_a, axis=1, keepdims=True)
    yb = tau * dirs_b / np.linalg.norm(dirs_b, axis=1, keepdims=True)
    xa = rng.uniform(-np.pi, np.pi, size=(n_pairs, m))
    xb = xa + rng.uniform(-max_sep, max_sep, size=(n_pairs, m))
    d2 = np.sum((xa - xb) ** 2 + (ya - yb) ** 2, axis=1)
    keep = d2 > 0
    dval = diastasis(model, xa + 1j * ya, xb + 1j * yb, tau)
    ratios = dval[keep] / d2[keep]
    return DiastasisFit(float(ratios.min()), int(keep.sum()),
                        float(ratios.min()), float(ratios.max()))


# ---------------------------------------------------------------------------
# Heisenberg charts
# ---------------------------------------------------------------------------

def _rotation_to_last_axis(y: np.ndarray) -> np.ndarray:
    """Orthogonal ``R`` with ``R y = |y| e_m``, acting in the plane of ``y`` and ``e_m``.

    Antiparallel ``y`` is rotated by ``pi`` in the ``(e_1, e_m)`` plane; for
    ``m = 1`` the map is multiplication by the sign of ``y``.
    """
    m = y.shape[0]
    a = y / np.linalg.norm(y)
    e = np.zeros(m)
    e[-1] = 1.0
    if m == 1:
        return np.array([[np.sign(a[0])]])
    c = float(a @ e)
    if c > 1.0 - 1e-15:
        return np.eye(m)
    if c < -1.0 + 1e-15:
        r = np.eye(m)
        r[0, 0] = r[-1, -1] = -1.0
        return r
    v = a - c * e
    v /= np.linalg.norm(v)
    s = float(np.sqrt(max(0.0, 1.0 - c * c)))
    # rotation taking a to e in span{v, e}: a = c e + s v
    r = np.eye(m) - np.outer(v, v) - np.outer(e, e)
    r += c * (np.outer(e, e) + np.outer(v, v)) + s * (np.outer(e, v) - np.outer(v, e))
    return r


@dataclass(frozen=True, eq=False)
class HeisenbergChart:
    """Holomorphic quadratic chart ``w -> (z_0, u)`` centred at a boundary point.

    ``z_0 = (L h)_0 + u^T C u`` and ``u = (L h)_{1:}`` with ``h = w - p``,
    ``L = linear_map`` and ``C = quadratic_correction``.
    """

    base: BoundaryPoint
    linear_map: np.ndarray
    quadratic_correction: np.ndarray
    tau: float
    rotation: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.base.x.shape[0]

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.linear_map))

    def _offset(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        h = w - self.base.z
        return wrap_angle(h.real) + 1j * h.imag

    def forward(self, w):
        """Chart coordinates ``(z_0, u)`` of ambient point(s) ``w`` (shape ``(..., m)``)."""
        lh = self._offset(w) @ self.linear_map.T
        u = lh[..., 1:]
        z0 = lh[..., 0] + np.einsum("...i,ij,...j->...", u, self.quadratic_correction, u)
        return z0, u

    def inverse(self, z0, u):
        """Ambient point with chart coordinates ``(z_0, u)``; real parts near ``p``."""
        z0 = np.asarray(z0, dtype=complex)
        u = np.asarray(u, dtype=complex).reshape(z0.shape + (self.m - 1,))
        lin0 = z0 - np.einsum("...i,ij,...j->...", u, self.quadratic_correction, u)
        rhs = np.concatenate([lin0[..., None], u], axis=-1)
        h = np.linalg.solve(self.linear_map, rhs[..., None])[..., 0]
        return self.base.z + h

    def chart_norm(self, z0, u):
        return np.sqrt(np.abs(z0) ** 2 + np.sum(np.abs(np.asarray(u)) ** 2, axis=-1))

    def pushforward_phi(self, z0, u):
        """``phi_tau`` evaluated at ``chart^{-1}(z_0, u)``."""
        model = FlatModel.torus(self.m)
        return defining_function(model, self.inverse(z0, u), self.tau)

    def remainder(self, z0, u):
        """``phi_tau o chart^{-1} + Im z_0 - |u|^2``."""
        z0 = np.asarray(z0, dtype=complex)
        u = np.asarray(u, dtype=complex).reshape(z0.shape + (self.m - 1,))
        return self.pushforward_phi(z0, u) + z0.imag - np.sum(np.abs(u) ** 2, axis=-1)

    def to_dict(self) -> dict:
        def cm(a):
            # + 0.0 drops negative zeros so round trips are byte-identical
            return {"re": (np.real(a) + 0.0).tolist(), "im": (np.imag(a) + 0.0).tolist()}

        return {
            "base": {"x": self.base.x.tolist(), "y": self.base.y.tolist()},
            "tau": self.tau,
            "linear_map": cm(self.linear_map),
            "quadratic_correction": cm(self.quadratic_correction),
            "rotation": (self.rotation + 0.0).tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "HeisenbergChart":
        def cm(x):
            return np.asarray(x["re"]) + 1j * np.asarray(x["im"])

        return cls(
            BoundaryPoint(d["base"]["x"], d["base"]["y"], d["tau"]),
            cm(d["linear_map"]),
            cm(d["quadratic_correction"]),
            float(d["tau"]),
            np.asarray(d["rotation"], dtype=float),
        )

    @classmethod
    def from_json(cls, s: str) -> "HeisenbergChart":
        return cls.from_dict(json.loads(s))


def build_heisenberg_chart(model: FlatModel, p: BoundaryPoint, tau: float) -> HeisenbergChart:
    """Normalize the defining function at ``p`` into Heisenberg form.

    The construction uses only first and second derivatives of ``phi_tau`` at
    ``p``: the gradient fixes ``z_0``, the Levi form on the complex tangent
    fixes ``u`` (upper-triangular Cholesky factor, positive diagonal), and the
    holomorphic Hessian restricted to the complex tangent is absorbed into
    ``z_0``.
    """
    if not tau > 0:
        raise DomainError("tau must be positive")
    if p.x.shape[0] != model.m:
        raise DomainError(f"point has {p.x.shape[0]} coordinates, model has {model.m}")
    if abs(float(np.linalg.norm(p.y)) - tau) > 1e-10 * max(1.0, tau):
        raise DomainError("base point is not on the boundary of radius tau")
    m = model.m
    y = p.y
    grad = -1j * y                      # d phi / dw at p
    levi = 0.5 * np.eye(m)              # d^2 phi / dw dw-bar
    hess = -0.5 * np.eye(m)             # d^2 phi / dw dw

    rot = _rotation_to_last_axis(y)
    frame = rot[:-1].T                  # columns span the complex tangent
    levi_t = frame.T @ levi @ frame
    try:
        chol = np.linalg.cholesky(levi_t).conj().T if m > 1 else np.zeros((0, 0))
    except np.linalg.LinAlgError as exc:
        raise DegenerateGeometryError("Levi form is not positive definite") from exc
    if m > 1:
        phases = np.diag(chol) / np.abs(np.diag(chol))
        chol = chol / phases[:, None]
    z0_row = -2j * grad                 # d phi = -Im dz_0 at p
    lin = np.vstack([z0_row[None, :], (chol @ frame.T).astype(complex)])
    if m > 1:
        tinv = np.linalg.inv(chol)
        q = tinv.T @ (frame.T @ hess @ frame) @ tinv
        corr = -1j * q
    else:
        corr = np.zeros((0, 0), dtype=complex)
    if np.linalg.cond(lin) >= 1e6:
        raise DegenerateGeometryError("chart linear part is ill-conditioned")
    return HeisenbergChart(p, lin.astype(complex), corr.astype(complex), float(tau), rot)


# ---------------------------------------------------------------------------
# remainder fits, flow, ambient lift
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RemainderFit:
    """Fitted exponents of the chart remainder along three scaling directions.

    ``slopes`` maps ``"z0"``, ``"u"``, ``"mixed"`` to the least-squares slope of
    ``log sup|R|`` against ``log r``; directions absent for ``m = 1`` are omitted.
    A direction whose remainder is identically zero is reported at ``cap``.
    """

    radii: tuple
    slopes: dict
    residuals: dict
    cap: float


_REQUIRED = {"z0": 2.0, "u": 3.0, "mixed": 2.0}


def _fit_slope(r, res, cap, name):
    res = np.asarray(res, dtype=float)
    if np.all(res <= 1e-300):
        return cap
    if np.any(res <= 0) or np.any(np.diff(res) * np.sign(np.diff(r)) < 0):
        raise FitError(f"remainder along {name} is not monotone in r",
                       data={"radii": list(r), "residuals": res.tolist()})
    slope = float(np.polyfit(np.log(r), np.log(res), 1)[0])
    return min(slope, cap)


def chart_remainder_fit(chart: HeisenbergChart, radii=None, n_dirs: int = 8,
                        cap: float = 6.0) -> RemainderFit:
    """Fit the remainder exponents of ``phi_tau o chart^{-1}`` near the origin."""
    if radii is None:
        radii = chart.tau * np.geomspace(0.1, 0.005, 8)
    r = np.asarray(radii, dtype=float)
    if np.any(r <= 0) or np.any(r > VALIDITY_FRACTION * chart.tau):
        raise ChartValidityError("radii must lie in (0, validity radius]")
    m = chart.m
    phases = np.exp(2j * np.pi * (np.arange(n_dirs) + 0.5) / n_dirs)
    rng = np.random.default_rng(12345)
    if m > 1:
        g = rng.normal(size=(n_dirs, m - 1)) + 1j * rng.normal(size=(n_dirs, m - 1))
        udirs = g / np.linalg.norm(g, axis=1, keepdims=True)
    directions = {"z0": (phases, np.zeros((n_dirs, m - 1)))}
    if m > 1:
        directions["u"] = (np.zeros(n_dirs), udirs)
        directions["mixed"] = (phases / np.sqrt(2), udirs / np.sqrt(2))
    slopes, residuals = {}, {}
    for name, (dz, du) in directions.items():
        sup = [float(np.max(np.abs(chart.remainder(rr * dz, rr * du)))) for rr in r]
        residuals[name] = sup
        slopes[name] = _fit_slope(r, sup, cap, name)
    return RemainderFit(tuple(r.tolist()), slopes, residuals, cap)


def remainder_orders_ok(fit: RemainderFit, tol: float = 0.1) -> bool:
    return all(fit.slopes[k] >= _REQUIRED[k] - tol for k in fit.slopes)


@dataclass(frozen=True)
class FlowExpansion:
    """Defects of the boundary flow in chart coordinates.

    ``theta_defect = theta(G^t q) - theta(q) - 2 tau t`` and
    ``u_defect = u(G^t q) - u(q)``.
    """

    t: float
    theta_defect: float
    u_defect: np.ndarray


def flow_in_chart(chart: HeisenbergChart, t: float, point: BoundaryPoint | None = None,
                  orientation: int = REEB_ORIENTATION) -> FlowExpansion:
    """Flow a boundary point for time ``t`` and express the displacement in the chart."""
    if abs(t) > 0.1 * chart.tau:
        raise ChartValidityError("|t| must not exceed 0.1 tau")
    q = chart.base if point is None else point
    model = FlatModel.torus(chart.m)
    qt = boundary_flow(model, t, q, orientation)
    z0a, ua = chart.forward(q.z)
    z0b, ub = chart.forward(qt.z)
    for z0, u in ((z0a, ua), (z0b, ub)):
        if chart.chart_norm(z0, u) > VALIDITY_FRACTION * chart.tau:
            raise ChartValidityError("flowed point leaves the chart domain")
    return FlowExpansion(float(t), float(z0b.real - z0a.real - 2.0 * chart.tau * t),
                         np.asarray(ub - ua))


@dataclass(frozen=True)
class AmbientLift:
    """Boundary point ``(Theta, u)`` in chart coordinates above rescaled data.

    ``theta = Re Theta = theta_in / lam`` and ``u = u_in / sqrt(lam)``; ``im_theta``
    solves ``phi_tau(chart^{-1}(Theta, u)) = 0``.
    """

    theta: float
    u: np.ndarray
    im_theta: float
    lam: float

    @property
    def Theta(self) -> complex:
        return complex(self.theta, self.im_theta)


def ambient_lift(chart: HeisenbergChart, theta: float, u, lam: float,
                 xtol: float = 1e-15) -> AmbientLift:
    """Solve for ``Im Theta`` so that ``(theta/lam + i Im Theta, u/sqrt(lam))`` is on the boundary."""
    if lam < 1:
        raise DomainError("lam must be >= 1")
    us = np.asarray(u, dtype=complex).reshape(chart.m - 1) / np.sqrt(lam)
    re = theta / lam
    bound = VALIDITY_FRACTION * chart.tau
    if np.hypot(re, np.linalg.norm(us)) >= bound:
        raise ChartValidityError("rescaled point outside chart validity radius")

    def f(s):
        return float(chart.pushforward_phi(np.complex128(re + 1j * s), us))

    lo, hi = -bound, bound
    if f(lo) * f(hi) > 0:
        raise ChartValidityError("boundary root is not bracketed inside the chart")
    s = brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    return AmbientLift(float(re), us, float(s), float(lam))
