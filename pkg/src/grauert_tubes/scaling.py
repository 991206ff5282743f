"""Heisenberg-scaled comparison of the smoothed kernels with the model factor.

For a tuple ``(theta, u, phi, v)`` and a frequency ``lam`` the two kernel
arguments are the boundary points with chart coordinates
``(Theta(lam), u / sqrt(lam))`` and ``(Phi(lam), v / sqrt(lam))``, where
``Re Theta = theta / lam`` and ``Im Theta`` places the point on the boundary.
Kernels are compared after dividing by the geometric mean of their diagonal
values, which removes every overall constant.
"""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, FitError, GrauertError
from .geometry import HeisenbergChart, ambient_lift, build_heisenberg_chart
from .heisenberg import theorem_leading_factor_batch
from .kernels import auto_kernel_matrix
from .models import BoundaryPoint, FlatModel
from .smoothing import make_chi

DEFAULT_LAMBDAS = (50.0, 71.0, 100.0, 141.0, 200.0, 283.0, 400.0)
KERNEL_KINDS = {"P": "smoothed_projection", "Pi": "toeplitz_localization"}
#: Co-direction angle of the default base point; generic with respect to the lattice.
BASE_ANGLE = 1.0


def default_base_point(m: int, tau: float) -> BoundaryPoint:
    if m == 1:
        return BoundaryPoint([0.0], [tau], tau)
    y = np.zeros(m)
    y[0], y[1] = np.cos(BASE_ANGLE), np.sin(BASE_ANGLE)
    return BoundaryPoint.from_direction(np.zeros(m), y, tau)


@dataclass(frozen=True)
class ComparisonGrid:
    """Tuples ``(theta, u, phi, v)`` with ``|theta| + |phi| + |u| + |v| <= rho``.

    ``u`` and ``v`` run over the real and imaginary axes of the first transverse
    coordinate; the remaining transverse coordinates are zero.
    """

    m: int
    rho: float
    points: np.ndarray        # distinct half-points (theta, u) as complex rows
    pairs: np.ndarray         # index pairs (a, b) into points

    @property
    def tuples(self):
        for a, b in self.pairs:
            yield self.points[a], self.points[b]

    def __len__(self):
        return len(self.pairs)

    def diagonal_index(self) -> int:
        zero = np.flatnonzero(np.all(self.points == 0, axis=1))[0]
        return int(np.flatnonzero((self.pairs[:, 0] == zero) & (self.pairs[:, 1] == zero))[0])


def comparison_grid(m: int, rho: float = 0.8, n_axis: int = 5) -> ComparisonGrid:
    if rho <= 0:
        raise DomainError("rho must be positive")
    axis = np.linspace(-rho, rho, n_axis)
    if m == 1:
        halves = [np.array([t]) for t in axis]
    else:
        uvals = sorted(set(axis.tolist()))
        uvals = [complex(x) for x in uvals] + [1j * x for x in uvals if x != 0]
        halves = []
        for t in axis:
            for u in uvals:
                if abs(t) + abs(u) <= rho + 1e-12:
                    row = np.zeros(m, dtype=complex)
                    row[0], row[1] = t, u
                    halves.append(row)
    pts = np.array(halves, dtype=complex)
    size = np.abs(pts[:, 0].real) + np.sum(np.abs(pts[:, 1:]), axis=1)
    ia, ib = np.meshgrid(np.arange(len(pts)), np.arange(len(pts)), indexing="ij")
    keep = size[ia] + size[ib] <= rho + 1e-12
    pairs = np.stack([ia[keep], ib[keep]], axis=1)
    return ComparisonGrid(m, float(rho), pts, pairs)


def rescaled_point(chart: HeisenbergChart, theta: float, u, lam: float) -> BoundaryPoint:
    """Boundary point with chart coordinates ``(Theta(lam), u / sqrt(lam))``."""
    lift = ambient_lift(chart, theta, u, lam)
    w = np.asarray(chart.inverse(np.complex128(lift.Theta), lift.u), dtype=complex)
    y = w.imag
    resid = abs(float(y @ y) - chart.tau ** 2)
    if resid > 1e-12:
        raise GrauertError(f"lifted point misses the boundary by {resid:.2e}")
    y = chart.tau * y / np.linalg.norm(y)
    return BoundaryPoint(w.real, y, chart.tau)


def rescaled_pair(chart: HeisenbergChart, tup, lam: float):
    """Boundary points for ``(theta, u)`` and ``(phi, v)`` at frequency ``lam``."""
    theta, u, phi, v = tup
    return (rescaled_point(chart, theta, u, lam), rescaled_point(chart, phi, v, lam))


def normalized(k: np.ndarray) -> np.ndarray:
    d = np.real(np.diag(k))
    if np.any(d <= 0):
        raise GrauertError("kernel diagonal is not positive; normalization is degenerate")
    s = np.sqrt(d)
    out = k / s[:, None] / s[None, :]
    np.fill_diagonal(out, 1.0)  # identically 1; drop roundoff in the imaginary part
    return out


@dataclass
class LambdaResult:
    lam: float
    sup_error: float
    errors: np.ndarray
    window: float
    tail_bound: float
    normalized_kernel: np.ndarray = field(repr=False)


def _eval_lambda(kind, model, chi, chart, grid, lam, rel_tol):
    pts = [rescaled_point(chart, row[0].real, row[1:], lam).z for row in grid.points]
    k, tb, cfg = auto_kernel_matrix(kind, model, chi, lam, chart.tau, np.array(pts),
                                    rel_tol=rel_tol)
    kn = normalized(k)
    a, b = grid.pairs[:, 0], grid.pairs[:, 1]
    f = model_factor_matrix(chart.tau, grid)
    err = np.abs(kn[a, b] - f[a, b])
    return LambdaResult(lam, float(err.max()), err, cfg.window, tb, kn)


def model_factor_matrix(tau: float, grid: ComparisonGrid) -> np.ndarray:
    """Diagonal-normalized model factor between every two grid half-points."""
    p = grid.points
    n = len(p)
    ia, ib = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    f = theorem_leading_factor_batch(
        tau, p[ia, 0].real, p[ib, 0].real, p[ia][..., 1:], p[ib][..., 1:])
    return normalized(f)


def normalized_error(kind: str, chart: HeisenbergChart, grid: ComparisonGrid, lam: float,
                     eps: float = 4.0, rel_tol: float = 1e-8) -> LambdaResult:
    """Sup over the grid of ``|K / sqrt(K_aa K_bb) - F / sqrt(F_aa F_bb)|``."""
    if kind not in KERNEL_KINDS:
        raise DomainError(f"kernel must be one of {sorted(KERNEL_KINDS)}")
    model = FlatModel.torus(chart.m)
    return _eval_lambda(kind, model, make_chi(eps), chart, grid, lam, rel_tol)


# ---------------------------------------------------------------------------
# rate fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of ``log error`` on ``log lam`` with a jackknife interval."""

    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    jackknife_se: float
    floor_limited: bool
    non_convergent: bool


def fit_rate(lams, errors, z: float = 1.96, flat_tol: float = 0.05) -> RateFit:
    lams = np.asarray(lams, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if lams.size < 5:
        raise FitError("need at least 5 lambda values", data={"lams": lams.tolist()})
    if np.any(errors <= 0):
        return RateFit(float("nan"), float("nan"), float("nan"), float("nan"),
                       float("nan"), True, False)
    x, y = np.log(lams), np.log(errors)
    slope, intercept = np.polyfit(x, y, 1)
    n = x.size
    loo = np.array([np.polyfit(np.delete(x, i), np.delete(y, i), 1)[0] for i in range(n)])
    se = float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
    return RateFit(float(slope), float(intercept), float(slope - z * se), float(slope + z * se),
                   se, False, bool(slope > -flat_tol))


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------

@dataclass
class ScalingReport:
    kernel: str
    m: int
    tau: float
    eps: float
    rho: float
    lams: list
    sup_errors: list
    windows: list
    tail_bounds: list
    fit: RateFit
    diagonal_errors: list
    chart: dict
    tuples: list = field(repr=False)
    tuple_errors: list = field(repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fit"] = asdict(self.fit)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def rate_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lam", "log_lam", "sup_error", "log_error", "diagonal_error", "window",
                    "tail_bound"])
        for lam, e, de, win, tb in zip(self.lams, self.sup_errors, self.diagonal_errors,
                                       self.windows, self.tail_bounds):
            w.writerow([repr(lam), repr(float(np.log(lam))), repr(e),
                        repr(float(np.log(e))) if e > 0 else "", repr(de), repr(win), repr(tb)])
        return buf.getvalue()

    def tuple_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lam", "theta", "u_re", "u_im", "phi", "v_re", "v_im", "error"])
        for lam, errs in zip(self.lams, self.tuple_errors):
            for (theta, ure, uim, phi, vre, vim), e in zip(self.tuples, errs):
                w.writerow([repr(lam), repr(theta), repr(ure), repr(uim), repr(phi), repr(vre),
                            repr(vim), repr(e)])
        return buf.getvalue()


def _threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("THREADS", "0") or 0)
    return max(1, threads or (os.cpu_count() or 1))


def _run(kind, m, tau, lams, rho, eps, base, threads, rel_tol):
    model = FlatModel.torus(m)
    base = base or default_base_point(m, tau)
    chart = build_heisenberg_chart(model, base, tau)
    grid = comparison_grid(m, rho)
    chi = make_chi(eps)
    with ThreadPoolExecutor(max_workers=_threads(threads)) as pool:
        results = list(pool.map(
            lambda lam: _eval_lambda(kind, model, chi, chart, grid, float(lam), rel_tol), lams))
    return chart, grid, results


def _tuple_rows(grid: ComparisonGrid):
    rows = []
    for a, b in grid.tuples:
        u = a[1] if grid.m > 1 else 0j
        v = b[1] if grid.m > 1 else 0j
        rows.append((float(a[0].real), float(u.real), float(u.imag),
                     float(b[0].real), float(v.real), float(v.imag)))
    return rows


def scaling_study(kind: str, m: int, tau: float, lams=DEFAULT_LAMBDAS, rho: float = 0.8,
                  eps: float = 4.0, base: BoundaryPoint | None = None,
                  threads: int | None = None, rel_tol: float = 1e-8) -> ScalingReport:
    """Normalized-error study over a lambda grid, with a fitted convergence rate."""
    if kind not in KERNEL_KINDS:
        raise DomainError(f"kernel must be one of {sorted(KERNEL_KINDS)}")
    chart, grid, results = _run(kind, m, tau, lams, rho, eps, base, threads, rel_tol)
    sup = [r.sup_error for r in results]
    diag = grid.diagonal_index()
    return ScalingReport(
        kernel=kind, m=m, tau=float(tau), eps=float(eps), rho=float(rho),
        lams=[float(r.lam) for r in results],
        sup_errors=sup,
        windows=[r.window for r in results],
        tail_bounds=[r.tail_bound for r in results],
        fit=fit_rate([r.lam for r in results], sup),
        diagonal_errors=[float(r.errors[diag]) for r in results],
        chart=chart.to_dict(),
        tuples=_tuple_rows(grid),
        tuple_errors=[r.errors.tolist() for r in results],
    )


@dataclass(frozen=True)
class CrossReport:
    lams: list
    sup_differences: list
    fit: RateFit


def cross_consistency(m: int, tau: float, lams=DEFAULT_LAMBDAS, rho: float = 0.8,
                      eps: float = 4.0, threads: int | None = None,
                      rel_tol: float = 1e-8) -> CrossReport:
    """Sup over the grid of the difference between normalized ``Pi`` and ``P`` kernels."""
    _, grid, rp = _run("P", m, tau, lams, rho, eps, None, threads, rel_tol)
    _, _, rq = _run("Pi", m, tau, lams, rho, eps, None, threads, rel_tol)
    a, b = grid.pairs[:, 0], grid.pairs[:, 1]
    diffs = [float(np.max(np.abs(p.normalized_kernel[a, b] - q.normalized_kernel[a, b])))
             for p, q in zip(rp, rq)]
    return CrossReport([float(x) for x in lams], diffs, fit_rate(lams, diffs))


@dataclass(frozen=True)
class LocalizationReport:
    lams: list
    separations: list
    ratios: list
    model_ratios: list
    fit: RateFit


def localization_diagnostic(kind: str, m: int, tau: float, delta: float = 0.25,
                            lams=DEFAULT_LAMBDAS, c_sep: float = 0.5, eps: float = 4.0,
                            rel_tol: float = 1e-9) -> LocalizationReport:
    """``|K(p, q)| / sqrt(K(p,p) K(q,q))`` for ``q`` displaced from the base point ``p``.

    ``q`` is ``p`` translated by ``d = 2 C lam^(delta - 1/2)`` along a real
    direction orthogonal to ``Im p``, which stays on the boundary and is a
    transverse displacement. ``model_ratios`` give ``|F|`` for the same pair,
    ``exp(-lam d^2 / (4 tau))`` since the transverse chart coordinate is
    ``d / sqrt 2``.
    """
    if not 0 < delta < 0.5:
        raise DomainError("delta must lie in (0, 1/2)")
    if m < 2:
        raise DomainError("the transverse separation needs m >= 2")
    model = FlatModel.torus(m)
    base = default_base_point(m, tau)
    chart = build_heisenberg_chart(model, base, tau)
    direction = chart.rotation[0]
    chi = make_chi(eps)
    seps, ratios, model_ratios = [], [], []
    for lam in lams:
        sep = 2.0 * c_sep * lam ** (delta - 0.5)
        q = BoundaryPoint(base.x + sep * direction, base.y, tau)
        k, _, _ = auto_kernel_matrix(kind, model, chi, lam, tau, np.array([base.z, q.z]),
                                     rel_tol=rel_tol)
        seps.append(float(sep))
        ratios.append(float(abs(normalized(k)[0, 1])))
        model_ratios.append(float(np.exp(-lam * sep ** 2 / (4 * tau))))
    return LocalizationReport([float(x) for x in lams], seps, ratios, model_ratios,
                              fit_rate(lams, ratios))
