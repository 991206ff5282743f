import csv
import io

import numpy as np
import pytest
from conftest import random_boundary
from scipy.special import iv

from grauert_tubes.errors import ConfigurationError
from grauert_tubes.kernels import (
    KernelSumConfig,
    auto_kernel_matrix,
    certified_config,
    kernel_matrix,
    kernel_rows_csv,
    real_projection_E,
    smoothed_projection,
    tempered_projection,
    toeplitz_eigenvalue,
    toeplitz_localization,
)
from grauert_tubes.models import (
    BoundaryPoint,
    FlatModel,
    boundary_flow,
    hardy_norm_sq_scaled,
    lattice_shell,
)

CIRCLE = FlatModel.circle()
T2 = FlatModel.torus(2)


def circle_oracle(kind, chi, lam, tau, z, w, n_max=1000):
    """Full-lattice sum on the circle from closed forms (no window)."""
    n = np.arange(-n_max, n_max + 1, dtype=float)
    a = np.abs(n)
    log_phase = 1j * n * (z - np.conj(w))
    if kind == "P":
        coef = chi(lam - a) / (2 * np.pi)
    else:
        mu = a * np.tanh(2 * tau * a)
        # 1 / ||e^{inz}||^2 = e^{-2 tau |n|} / (2 pi tau (1 + e^{-4 tau |n|}))
        coef = chi(lam - mu) / (2 * np.pi * tau * (1 + np.exp(-4 * tau * a)))
    return complex(np.sum(coef * np.exp(log_phase - 2 * tau * a)))


def test_real_projection_examples():
    assert real_projection_E(CIRCLE, 0.5, [0.3], [1.1]) == pytest.approx(1 / (2 * np.pi))
    assert real_projection_E(CIRCLE, 2.5, [0.4], [0.4]) == pytest.approx(5 / (2 * np.pi))
    vals = [real_projection_E(T2, lam, [0.1, 0.2], [0.1, 0.2]) for lam in np.linspace(0, 8, 33)]
    assert np.all(np.diff(vals) >= 0)


def test_tempered_projection_examples(rng):
    tau = 0.5
    z, w = random_boundary(rng, 2, tau, 2)
    assert tempered_projection(T2, 0.5, tau, z, w) == pytest.approx((2 * np.pi) ** -2)
    a = tempered_projection(T2, 6.0, tau, z, w)
    b = tempered_projection(T2, 6.0, tau, w, z)
    assert a == pytest.approx(np.conj(b), rel=1e-13)
    assert tempered_projection(T2, 6.0, tau, z, z).real > 0


@pytest.mark.parametrize("kind", ["P", "Pi"])
@pytest.mark.parametrize("lam", [20.0, 60.0])
def test_circle_closed_form(kind, lam, chi):
    tau = 0.5
    z = np.array([0.3 + 0.5j])
    for w in (z, np.array([0.25 + 0.5j]), np.array([-0.1 + 0.5j])):
        k, tb, _ = auto_kernel_matrix(kind, CIRCLE, chi, lam, tau, z, w, rel_tol=1e-9)
        expected = circle_oracle(kind, chi, lam, tau, z[0], w[0])
        assert abs(k[0, 0] - expected) <= tb + 1e-12 * abs(expected)


def test_circle_diagonal_from_negative_modes(chi):
    # on y = tau the negative modes carry unit weight for P
    lam, tau = 30.0, 0.5
    val = smoothed_projection(CIRCLE, chi, lam, tau, [0.2 + 0.5j], [0.2 + 0.5j]).value
    n = np.arange(1, 400)
    approx = np.sum(chi(lam - n)) / (2 * np.pi)
    assert val.real == pytest.approx(approx, rel=1e-6)


@pytest.mark.parametrize("kind", ["P", "Pi"])
def test_hermitian_and_positive_diagonal(kind, chi, rng):
    z = random_boundary(rng, 2, 0.5, 6)
    k, _, _ = auto_kernel_matrix(kind, T2, chi, 40.0, 0.5, z)
    np.testing.assert_allclose(k, k.conj().T, atol=1e-15 * np.abs(k).max())
    assert np.all(np.diag(k).real > 0)
    assert np.max(np.abs(np.diag(k).imag)) <= 1e-15 * np.abs(k).max()


@pytest.mark.parametrize("kind", ["P", "Pi"])
def test_flow_preserves_modulus(kind, chi, rng):
    # points over the same co-direction are translated by the same vector
    tau = 0.5
    y = np.array([0.3, -0.4])
    p = BoundaryPoint([0.2, 1.0], y, tau)
    q = BoundaryPoint([0.25, 0.9], y, tau)
    k0, _, _ = auto_kernel_matrix(kind, T2, chi, 30.0, tau, p.z, q.z)
    for t in (0.3, 1.7):
        pt, qt = boundary_flow(T2, t, p), boundary_flow(T2, t, q)
        kt, _, _ = auto_kernel_matrix(kind, T2, chi, 30.0, tau, pt.z, qt.z)
        assert abs(kt[0, 0]) == pytest.approx(abs(k0[0, 0]), rel=1e-10)


def test_flow_changes_modulus_across_fibres(chi):
    # with different co-directions the two points drift apart
    tau = 0.5
    p = BoundaryPoint([0.0, 0.0], [0.0, tau], tau)
    q = BoundaryPoint([0.05, 0.0], [tau, 0.0], tau)
    k0, _, _ = auto_kernel_matrix("P", T2, chi, 30.0, tau, p.z, q.z)
    pt, qt = boundary_flow(T2, 0.3, p), boundary_flow(T2, 0.3, q)
    kt, _, _ = auto_kernel_matrix("P", T2, chi, 30.0, tau, pt.z, qt.z)
    assert abs(abs(kt[0, 0]) - abs(k0[0, 0])) > 1e-3 * abs(k0[0, 0])


@pytest.mark.parametrize("kind", ["P", "Pi"])
def test_doubling_window_stays_within_tail(kind, chi, rng):
    tau, lam = 0.5, 50.0
    z = random_boundary(rng, 2, tau, 3)
    _, _, cfg = auto_kernel_matrix(kind, T2, chi, lam, tau, z)
    k1, tb = kernel_matrix(kind, T2, chi, cfg, z)
    wide = KernelSumConfig(lam, tau, 2 * cfg.window, cfg.tail_tol)
    k2, _ = kernel_matrix(kind, T2, chi, wide, z)
    assert np.max(np.abs(k1 - k2)) <= tb


def test_uncertifiable_tail_raises(chi):
    cfg = KernelSumConfig(50.0, 0.5, 1.0, 1e-30)
    with pytest.raises(ConfigurationError) as info:
        kernel_matrix("P", T2, chi, cfg, [0.5j, 0.0])
    assert info.value.smallest_certifiable > 1e-30
    with pytest.raises(ConfigurationError):
        certified_config("P", T2, chi, 50.0, 0.5, 1e-300, w_max=40)


def test_toeplitz_eigenvalue_examples():
    assert toeplitz_eigenvalue(T2, (0, 0), 0.5) == 0
    assert toeplitz_eigenvalue(T2, (3, 4), 1.0) == pytest.approx(5 * iv(1, 10) / iv(0, 10), rel=1e-12)
    assert toeplitz_eigenvalue(T2, (3, 4), 1.0) == pytest.approx(4.743, abs=1e-3)
    assert toeplitz_eigenvalue(T2, (3, 4), 1.0, orientation=1) < 0
    for n in (20, -20, 57):
        assert toeplitz_eigenvalue(CIRCLE, (n,), 0.5) == pytest.approx(abs(n), rel=1e-15)


@pytest.mark.parametrize("tau", [0.5, 1.0])
def test_toeplitz_asymptotics(tau):
    r = np.arange(20, 201, 9)
    mu = np.array([toeplitz_eigenvalue(T2, (k, 0), tau) for k in r])
    np.testing.assert_allclose(mu / r, 1.0, atol=1.0 / (4 * tau * 20) + 1e-3)
    dev = mu - r
    assert np.all(np.abs(dev) <= 1.0 / (4 * tau) + 0.01)
    # mu_k - |k| -> -1/(4 tau)
    assert dev[-1] == pytest.approx(-1 / (4 * tau), abs=2e-3)


def test_weight_sanity():
    # e^{-2 tau |k|} sup |e^{ik.z}|^2 / ||e^{ik.z}||^2 grows like |k|^{(m-1)/2}
    r = np.arange(20.0, 201.0, 10.0)
    w = 1.0 / hardy_norm_sq_scaled(2, r, 0.5)
    assert np.all(w * r ** -1 < w[0] * 20.0 ** -1 * 1.01)
    assert np.all(w * r >= w[0] * 20.0)
    ratio = w / np.sqrt(r)
    assert ratio.max() / ratio.min() < 1.1


def test_trace_identity(chi):
    # Pi(z, z) depends on y only; integrate over the sphere direction by trapezoid
    lam, tau, n = 4.0, 0.5, 64
    ang = 2 * np.pi * np.arange(n) / n
    pts = tau * np.stack([np.cos(ang), np.sin(ang)], 1) * 1j
    k, tb, _ = auto_kernel_matrix("Pi", T2, chi, lam, tau, pts, rel_tol=1e-8)
    measure = (2 * np.pi) ** 2 * tau ** 2 * 2 * np.pi
    integral = measure * np.mean(np.diag(k).real)
    ks = lattice_shell(2, 0.0, 60.0)
    mus = np.array([toeplitz_eigenvalue(T2, kk, tau) for kk in ks])
    assert abs(integral - np.sum(chi(lam - mus))) <= measure * tb + 1e-12


def test_single_value_wrappers(chi):
    z, w = [0.1 + 0.3j, 0.2 + 0.4j], [0.15 + 0.3j, 0.2 + 0.4j]
    p = smoothed_projection(T2, chi, 30.0, 0.5, z, w)
    q = toeplitz_localization(T2, chi, 30.0, 0.5, z, w)
    for val, kind in ((p, "P"), (q, "Pi")):
        k, tb, _ = auto_kernel_matrix(kind, T2, chi, 30.0, 0.5, z, w)
        assert val.value == k[0, 0]
        assert val.tail_bound == tb


def test_csv_rows():
    text = kernel_rows_csv([(10.0, 0.5, np.array([0.1 + 0.5j]), np.array([0.2 + 0.5j]), 1 + 2j, 1e-9)])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["lam", "tau", "z0_re", "z0_im", "w0_re", "w0_im", "re", "im", "tail"]
    assert [float(x) for x in rows[1]] == [10.0, 0.5, 0.1, 0.5, 0.2, 0.5, 1.0, 2.0, 1e-9]
