"""Acceptance criteria 1-12.

Each test records a one-line ``detail`` property; the terminal summary prints
``criterion N: PASS|FAIL  detail`` for every criterion that ran.
"""
import time

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.special import iv

from grauert_tubes.geometry import (
    build_heisenberg_chart,
    chart_remainder_fit,
    diastasis_lower_bound,
    flow_in_chart,
    remainder_orders_ok,
)
from grauert_tubes.heisenberg import HeisenbergPoint, group_mul, model_szego_kernel
from grauert_tubes.kernels import toeplitz_eigenvalue
from grauert_tubes.models import BoundaryPoint, FlatModel, boundary_flow
from grauert_tubes.scaling import (
    DEFAULT_LAMBDAS,
    cross_consistency,
    default_base_point,
    localization_diagnostic,
    scaling_study,
)
from grauert_tubes.stationary_phase import (
    claimed_inverse_hessian,
    gaussian_integral_check,
    phase_critical_data,
    reduced_phase_hessian,
)

RATE_BAND = (-0.7, -0.35)
TAUS = [0.25, 0.5, 1.0, 2.0]


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def hessian_display(tau):
    """The Hessian at the critical point written out entry by entry."""
    return np.array([
        [0.0, tau, 0.0, 0.0],
        [tau, 0.0, 0.0, 0.5],
        [0.0, 0.0, 0.0, -0.5],
        [0.0, 0.5, -0.5, 0.0],
    ])


def inverse_display(tau):
    return np.array([
        [0.0, 1 / tau, 1 / tau, 0.0],
        [1 / tau, 0.0, 0.0, 0.0],
        [1 / tau, 0.0, 0.0, -2.0],
        [0.0, 0.0, -2.0, 0.0],
    ])


def random_heisenberg(rng, m, scale=1.5):
    z = scale * (rng.normal(size=m - 1) + 1j * rng.normal(size=m - 1))
    return HeisenbergPoint(rng.uniform(-np.pi, np.pi), z)


def test_criterion_01_stationary_phase_exactness(record_property):
    with Timer() as t:
        rows = []
        for tau in TAUS:
            rep = phase_critical_data(tau, lam=100.0)
            h = np.array(rep.hessian)
            np.testing.assert_array_equal(h, reduced_phase_hessian(tau))
            np.testing.assert_array_equal(h, hessian_display(tau))
            np.testing.assert_array_equal(claimed_inverse_hessian(tau), inverse_display(tau))
            prod = h @ inverse_display(tau)
            assert np.max(np.abs(prod - np.eye(4))) <= 1e-14
            assert rep.determinant == pytest.approx(tau ** 2 / 4, rel=1e-12)
            assert rep.signature == 0
            assert rep.gamma_times_lam_tau == pytest.approx(8 * np.pi ** 2, rel=1e-12)
            rows.append(rep.inverse_residual)
    record_property("detail", f"max |H H^-1 - I| = {max(rows):.1e}, {t.elapsed:.2f} s")
    assert t.elapsed < 1.0


def test_criterion_02_gaussian_integral(record_property):
    rng = np.random.default_rng(2)
    worst = 0.0
    with Timer() as t:
        for m in (2, 3):
            for tau in (0.5, 1.0):
                for _ in range(10):
                    c = rng.uniform(-1, 1, m - 1) + 1j * rng.uniform(-1, 1, m - 1)
                    exact = (tau * np.pi) ** (m - 1)
                    worst = max(worst, abs(gaussian_integral_check(m, tau, c) / exact - 1))
    record_property("detail", f"max relative error {worst:.1e}, {t.elapsed:.2f} s")
    assert worst <= 1e-6
    assert t.elapsed < 10.0


def test_criterion_03_model_kernel_identities(record_property):
    rng = np.random.default_rng(3)
    worst = 0.0
    with Timer() as t:
        for i in range(1000):
            m = 2 + i % 2
            a, b, c = (random_heisenberg(rng, m) for _ in range(3))
            kab = model_szego_kernel(m, a, b)
            diag = model_szego_kernel(m, a, a)
            modulus = np.pi ** -(m - 1) * np.exp(-np.sum(np.abs(a.zeta - b.zeta) ** 2) / 2)
            left = group_mul(group_mul(a, b), c)
            right = group_mul(a, group_mul(b, c))
            worst = max(
                worst,
                abs(diag - np.pi ** -(m - 1)),
                abs(kab - np.conj(model_szego_kernel(m, b, a))),
                abs(abs(kab) - modulus),
                abs(left.theta - right.theta),
                np.max(np.abs(left.zeta - right.zeta)),
            )
    record_property("detail", f"max deviation {worst:.1e} over 1000 samples, {t.elapsed:.2f} s")
    assert worst <= 1e-12
    assert t.elapsed < 1.0


def test_criterion_04_heisenberg_chart(record_property):
    rng = np.random.default_rng(4)
    worst_linear, slopes = 0.0, []
    with Timer() as t:
        for m in (1, 2):
            model = FlatModel.torus(m)
            for tau in (0.5, 1.0):
                bases = [default_base_point(m, tau),
                         BoundaryPoint.from_direction(rng.uniform(-3, 3, m), rng.normal(size=m), tau)]
                for p in bases:
                    chart = build_heisenberg_chart(model, p, tau)
                    h = 1e-5
                    dirs = [(h, np.zeros(m - 1))]
                    for j in range(m - 1):
                        e = np.zeros(m - 1, complex)
                        e[j] = h
                        dirs += [(0.0, e), (0.0, 1j * e)]
                    for dz0, du in dirs:
                        d = (chart.pushforward_phi(dz0, du) - chart.pushforward_phi(-dz0, -du)) / (2 * h)
                        worst_linear = max(worst_linear, abs(d))
                    fit = chart_remainder_fit(chart)
                    assert remainder_orders_ok(fit, tol=0.1), fit.slopes
                    slopes.append(fit.slopes)
    low = {k: min(s[k] for s in slopes if k in s) for k in ("z0", "u", "mixed")}
    record_property("detail", f"linear coefficients <= {worst_linear:.1e}; min slopes "
                    + ", ".join(f"{k} {v:.2f}" for k, v in low.items()) + f"; {t.elapsed:.2f} s")
    assert worst_linear < 1e-10
    assert t.elapsed < 30.0


def test_criterion_05_reeb_flow_expansion(record_property):
    tau = 0.5
    with Timer() as t:
        ts = tau * np.geomspace(0.1, 0.001, 8)
        worst = 0.0
        for m in (1, 2, 3):
            chart = build_heisenberg_chart(FlatModel.torus(m), default_base_point(m, tau), tau)
            defects = np.array([abs(flow_in_chart(chart, s).theta_defect) for s in ts])
            if np.any(defects > 1e-13):
                slope = np.polyfit(np.log(ts), np.log(defects), 1)[0]
                assert slope >= 2.0
            # otherwise identically zero to rounding, so O(t^2) holds trivially
            worst = max(worst, float(defects.max()))
        circle = FlatModel.circle()
        rng = np.random.default_rng(5)
        shift = 0.0
        for _ in range(100):
            y = rng.choice([-tau, tau])
            p = BoundaryPoint([rng.uniform(-np.pi, np.pi)], [y], tau)
            s = rng.uniform(-3, 3)
            q = boundary_flow(circle, s, p)
            d = q.z[0] - (p.z[0] - s * np.sign(y))
            # x lives on R / 2 pi Z
            shift = max(shift, abs(np.angle(np.exp(1j * d.real))), abs(d.imag))
    record_property("detail", f"max theta-defect at base point {worst:.1e}; "
                    f"m=1 translation error {shift:.1e}; {t.elapsed:.2f} s")
    assert worst <= 1e-12
    assert shift <= 1e-12
    assert t.elapsed < 10.0


def test_criterion_06_diastasis_inequality(record_property):
    with Timer() as t:
        consts = {m: diastasis_lower_bound(FlatModel.torus(m), 0.5, n_pairs=1000).constant
                  for m in (1, 2)}
    record_property("detail", ", ".join(f"m={m}: c = {c:.3g}" for m, c in consts.items())
                    + f"; {t.elapsed:.2f} s")
    assert all(c > 0 for c in consts.values())
    assert t.elapsed < 10.0


@pytest.fixture(scope="module")
def studies():
    out = {}
    for kind in ("P", "Pi"):
        with Timer() as t:
            rep = scaling_study(kind, 2, 0.5, DEFAULT_LAMBDAS, rho=0.8)
        out[kind] = (rep, t.elapsed)
    return out


def check_shape(kind, studies, record_property, limit):
    rep, elapsed = studies[kind]
    errs = rep.sup_errors
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    record_property("detail", f"{kind}: sup errors {errs[0]:.2e} -> {errs[-1]:.2e}, "
                    f"decreasing {decreasing}, slope {rep.fit.slope:.3f} "
                    f"(band [{RATE_BAND[0]}, {RATE_BAND[1]}]); {elapsed:.0f} s")
    assert all(e == 0 for e in rep.diagonal_errors)
    assert decreasing
    assert elapsed < limit
    assert RATE_BAND[0] <= rep.fit.slope <= RATE_BAND[1]


@pytest.mark.slow
def test_criterion_07_smoothed_projection_shape(studies, record_property):
    check_shape("P", studies, record_property, 600.0)


@pytest.mark.slow
def test_criterion_08_toeplitz_localization_shape(studies, record_property):
    check_shape("Pi", studies, record_property, 900.0)


@pytest.mark.slow
def test_criterion_09_cross_consistency(record_property):
    rep = cross_consistency(2, 0.5)
    d = rep.sup_differences
    record_property("detail", f"sup |Pi - P| {d[0]:.2e} -> {d[-1]:.2e}, slope {rep.fit.slope:.3f}")
    assert rep.fit.slope <= -0.35


@pytest.mark.slow
def test_criterion_10_off_diagonal_localization(record_property):
    with Timer() as t:
        reps = {kind: localization_diagnostic(kind, 2, 0.5, delta=0.25) for kind in ("P", "Pi")}
    record_property("detail", ", ".join(f"{k}: slope {r.fit.slope:.2f}" for k, r in reps.items())
                    + f"; {t.elapsed:.0f} s")
    for rep in reps.values():
        assert rep.fit.slope <= -2.0
    assert t.elapsed < 300.0


def test_criterion_11_toeplitz_spectrum(record_property):
    t2 = FlatModel.torus(2)
    with Timer() as t:
        mu = toeplitz_eigenvalue(t2, (3, 4), 1.0)
        oracle = 5 * iv(1, 10) / iv(0, 10)
        radii = [5, 10, 20, 40, 80, 160]
        table = [(r, toeplitz_eigenvalue(t2, (r, 0), 1.0) / r - 1) for r in radii]
    print("\n|k|   mu_k/|k| - 1")
    for r, dev in table:
        print(f"{r:4d}  {dev: .3e}")
    record_property("detail", f"|mu - oracle| = {abs(mu - oracle):.1e}; deviations "
                    + " ".join(f"{d:.1e}" for _, d in table) + f"; {t.elapsed:.2f} s")
    assert abs(mu - oracle) <= 1e-8
    devs = np.abs([d for _, d in table])
    assert np.all(np.diff(devs) < 0)
    assert devs[-1] < 0.01
    assert t.elapsed < 10.0


def test_criterion_12_chi_contract(chi, record_property):
    rng = np.random.default_rng(12)
    with Timer() as t:
        s = rng.uniform(-200, 200, 10_000)
        positive = bool(np.all(chi(s) >= 0))
        s = rng.uniform(-80, 80, 10_000)
        even = float(np.max(np.abs(chi(s) - chi(-s))))

        def numeric_hat(x):
            return np.array([trapezoid(chi.values * np.cos(chi.grid * v), chi.grid) / np.pi
                             for v in np.atleast_1d(x)])

        grid = np.linspace(chi.eps, 10 * chi.eps, 1801)
        outside = 2 * trapezoid(np.abs(numeric_hat(grid)), grid)
        at_zero = numeric_hat(0.0)[0]
    record_property("detail", f"positive {positive}, evenness {even:.1e}, outside mass "
                    f"{outside:.1e}, |hat(0) - 1| {abs(at_zero - 1):.1e}; {t.elapsed:.2f} s")
    assert positive
    assert even <= 1e-10
    assert outside < 1e-8
    assert abs(at_zero - 1) <= 1e-10
    assert t.elapsed < 30.0
