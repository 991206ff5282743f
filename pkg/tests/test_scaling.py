import csv
import io
import json

import numpy as np
import pytest

from grauert_tubes.errors import DomainError, FitError, GrauertError
from grauert_tubes.geometry import build_heisenberg_chart
from grauert_tubes.heisenberg import theorem_leading_factor
from grauert_tubes.models import FlatModel, boundary_flow
from grauert_tubes.scaling import (
    DEFAULT_LAMBDAS,
    comparison_grid,
    default_base_point,
    fit_rate,
    localization_diagnostic,
    model_factor_matrix,
    normalized,
    normalized_error,
    rescaled_pair,
    scaling_study,
)


def chart_for(m, tau):
    return build_heisenberg_chart(FlatModel.torus(m), default_base_point(m, tau), tau)


def test_fit_rate_exact_power():
    lams = np.geomspace(50, 800, 7)
    fit = fit_rate(lams, lams ** -0.5)
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.jackknife_se < 1e-12
    assert not fit.non_convergent and not fit.floor_limited


def test_fit_rate_two_term():
    lams = np.geomspace(50, 800, 7)
    fit = fit_rate(lams, 1.0 * lams ** -0.5 + 3.0 * lams ** -1.0)
    assert -0.6 < fit.slope < -0.45
    assert fit.ci_low <= fit.slope <= fit.ci_high


def test_fit_rate_constant_and_floor():
    lams = np.geomspace(50, 800, 6)
    fit = fit_rate(lams, np.full(6, 0.3))
    assert fit.slope == pytest.approx(0.0, abs=1e-12)
    assert fit.non_convergent
    floor = fit_rate(lams, [1e-3, 1e-4, 0.0, 0.0, 0.0, 0.0])
    assert floor.floor_limited
    with pytest.raises(FitError):
        fit_rate([50, 100, 200, 400], [1, 1, 1, 1])


@pytest.mark.parametrize("m", [1, 2, 3])
def test_comparison_grid(m):
    grid = comparison_grid(m, rho=0.8)
    assert 0 < len(grid) <= 1000
    a, b = grid.points[grid.pairs[grid.diagonal_index()]]
    assert np.all(a == 0) and np.all(b == 0)
    for a, b in grid.tuples:
        size = abs(a[0].real) + abs(b[0].real) + np.sum(np.abs(a[1:])) + np.sum(np.abs(b[1:]))
        assert size <= 0.8 + 1e-12
    if m > 1:
        # transverse values on both the real and the imaginary axis
        u = grid.points[:, 1]
        assert np.any(u.real != 0) and np.any(u.imag != 0)
        assert np.all((u.real == 0) | (u.imag == 0))
    with pytest.raises(DomainError):
        comparison_grid(m, rho=0.0)


def test_rescaled_pair_diagonal_and_limit():
    tau = 0.5
    chart = chart_for(2, tau)
    p = chart.base
    a, b = rescaled_pair(chart, (0.0, np.zeros(1), 0.0, np.zeros(1)), 100.0)
    np.testing.assert_allclose(a.z, p.z, atol=1e-15)
    np.testing.assert_allclose(b.z, p.z, atol=1e-15)
    lams = np.array([50.0, 200.0, 800.0, 3200.0])
    dist = []
    for lam in lams:
        a, b = rescaled_pair(chart, (0.3, np.array([0.2j]), -0.1, np.array([0.3])), lam)
        dist.append(max(np.linalg.norm(a.z - p.z), np.linalg.norm(b.z - p.z)))
    slope = np.polyfit(np.log(lams), np.log(dist), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.05)


@pytest.mark.parametrize("m", [1, 2])
def test_theta_moves_along_flow(m):
    tau = 0.5
    chart = chart_for(m, tau)
    model = FlatModel.torus(m)
    for lam in (50.0, 400.0):
        a, _ = rescaled_pair(chart, (0.4, np.zeros(m - 1), 0.0, np.zeros(m - 1)), lam)
        b = boundary_flow(model, 0.4 / (2 * tau * lam), chart.base)
        np.testing.assert_allclose(a.z, b.z, atol=1e-12)


def test_normalized_rejects_nonpositive_diagonal():
    with pytest.raises(GrauertError):
        normalized(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_model_factor_matrix_matches_factor():
    tau = 0.5
    grid = comparison_grid(2)
    f = model_factor_matrix(tau, grid)
    i, j = 3, 17
    a, b = grid.points[i], grid.points[j]
    raw = theorem_leading_factor(2, tau, a[0].real, b[0].real, a[1:], b[1:])
    assert f[i, j] == pytest.approx(raw, rel=1e-12)
    np.testing.assert_array_equal(np.diag(f), 1.0)


@pytest.mark.parametrize("kind", ["P", "Pi"])
def test_diagonal_tuple_error_is_zero(kind):
    grid = comparison_grid(2)
    res = normalized_error(kind, chart_for(2, 0.5), grid, 50.0)
    assert res.errors[grid.diagonal_index()] == 0


def test_circle_phase_limit():
    tau = 0.5
    grid = comparison_grid(1)
    res = normalized_error("Pi", chart_for(1, tau), grid, 200.0)
    assert res.sup_error < 0.05
    a, b = grid.pairs[:, 0], grid.pairs[:, 1]
    theta = grid.points[:, 0].real
    expected = np.exp(1j * (theta[a] - theta[b]) / (2 * tau))
    np.testing.assert_allclose(res.normalized_kernel[a, b], expected, atol=0.05)


@pytest.mark.parametrize("kind", ["P", "Pi"])
def test_m2_error_decreases(kind):
    chart = chart_for(2, 0.5)
    grid = comparison_grid(2)
    errs = [normalized_error(kind, chart, grid, lam).sup_error for lam in (50.0, 100.0, 200.0, 400.0)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize("tau", [0.5, 1.0])
@pytest.mark.parametrize("kind", ["P", "Pi"])
def test_circle_monotone(kind, tau):
    rep = scaling_study(kind, 1, tau, threads=2)
    errs = rep.sup_errors
    assert all(b <= a * 1.1 for a, b in zip(errs, errs[1:]))


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["P", "Pi"])
def test_torus_monotone_tau_one(kind):
    rep = scaling_study(kind, 2, 1.0)
    errs = rep.sup_errors
    assert all(b <= a * 1.1 for a, b in zip(errs, errs[1:]))


def test_report_serialization():
    rep = scaling_study("P", 1, 0.5, threads=1)
    d = json.loads(rep.to_json())
    assert d["lams"] == list(DEFAULT_LAMBDAS)
    assert len(d["sup_errors"]) == len(DEFAULT_LAMBDAS)
    rates = list(csv.reader(io.StringIO(rep.rate_csv())))
    assert len(rates) == len(DEFAULT_LAMBDAS) + 1
    rows = list(csv.reader(io.StringIO(rep.tuple_csv())))
    assert len(rows) == 1 + len(DEFAULT_LAMBDAS) * len(comparison_grid(1))
    assert rep.to_json() == scaling_study("P", 1, 0.5, threads=3).to_json()


def test_localization_diagnostic_small():
    lams = (50.0, 71.0, 100.0, 141.0, 200.0)
    rep = localization_diagnostic("P", 2, 0.5, lams=lams)
    assert all(0 < r < 1 for r in rep.ratios)
    assert all(b < a for a, b in zip(rep.ratios, rep.ratios[1:]))
    # separations are 2 C lam^(delta - 1/2)
    np.testing.assert_allclose(rep.separations, np.array(lams) ** -0.25, rtol=1e-15)
    with pytest.raises(DomainError):
        localization_diagnostic("P", 2, 0.5, delta=0.6)
