r"""Spectral kernels on flat Grauert tubes.

Two smoothed kernels are evaluated by direct mode summation:

``P`` (kind ``"P"``)
    :math:`\sum_k \chi(\lambda-|k|)\,e^{-2\tau|k|}\,\varphi_k(z)\overline{\varphi_k(w)}`,
    with :math:`\varphi_k = (2\pi)^{-m/2}e^{ik\cdot z}`.

``Pi`` (kind ``"Pi"``)
    :math:`\sum_k \chi(\lambda-\mu_k)\,\hat e_k(z)\overline{\hat e_k(w)}`, where
    :math:`\hat e_k` is :math:`e^{ik\cdot z}` normalized in :math:`L^2(\partial M_\tau)`
    and :math:`\mu_k` is the Toeplitz eigenvalue of the flow generator.

For points with :math:`|\mathrm{Im}\,z| \le \tau` every factor
``exp(i k.z - tau |k|)`` has modulus at most one, which is what the tail
certificates use.
"""
from __future__ import annotations

import csv
import io
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import ConfigurationError, DomainError
from .models import (
    REEB_ORIENTATION,
    TWO_PI,
    FlatModel,
    LatticeMode,
    _points,
    hardy_norm_sq_scaled,
    lattice_shell,
    sphere_exponential_moments,
)
from .smoothing import SmoothingFunction

KINDS = ("P", "Pi")
_MODE_CHUNK = 16384


@dataclass(frozen=True)
class KernelSumConfig:
    """Truncation of a smoothed kernel sum to ``|lambda_k - lam| <= window``."""

    lam: float
    tau: float
    window: float
    tail_tol: float

    def __post_init__(self):
        if not (self.lam > 0 and self.tau > 0 and self.window > 0 and self.tail_tol > 0):
            raise DomainError("lam, tau, window and tail_tol must be positive")


@dataclass(frozen=True)
class KernelValue:
    value: complex
    tail_bound: float


# ---------------------------------------------------------------------------
# per-|k| spectral data
# ---------------------------------------------------------------------------

class _PiTable:
    """Toeplitz eigenvalues and inverse scaled Hardy norms indexed by ``|k|^2``.

    Grown on demand and shared between threads.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._data: dict[tuple[int, float], tuple[np.ndarray, np.ndarray]] = {}

    def get(self, m: int, tau: float, k2: np.ndarray):
        k2 = np.asarray(k2, dtype=np.int64)
        need = int(k2.max(initial=0))
        key = (m, float(tau))
        with self._lock:
            mu, inv = self._data.get(key, (np.zeros(0), np.zeros(0)))
            if mu.size <= need:
                new = np.arange(mu.size, max(need + 1, 2 * mu.size))
                r = np.sqrt(new)
                s0, s1 = sphere_exponential_moments(m, 2.0 * tau * r)
                mu = np.concatenate([mu, -REEB_ORIENTATION * r * s1 / s0])
                inv = np.concatenate([inv, 1.0 / (tau ** m * TWO_PI ** m * s0)])
                self._data[key] = (mu, inv)
        return mu[k2], inv[k2]


_PI_TABLE = _PiTable()


def toeplitz_eigenvalue(model: FlatModel, k, tau: float,
                        orientation: int = REEB_ORIENTATION) -> float:
    r"""Eigenvalue of the compressed flow generator on :math:`e^{ik\cdot z}`.

    .. math::
        \mu_k = \mathrm{orientation}\cdot
            \frac{\int (k\cdot\omega)e^{-2\tau k\cdot\omega}d\sigma}
                 {\int e^{-2\tau k\cdot\omega}d\sigma}

    With the default orientation ``mu_k >= 0``; for ``m = 2`` this is
    ``|k| I_1(2 tau |k|) / I_0(2 tau |k|)``.
    """
    if not tau > 0:
        raise DomainError("tau must be positive")
    if orientation not in (1, -1):
        raise DomainError("orientation must be +1 or -1")
    kabs = k.eigenvalue if isinstance(k, LatticeMode) else float(np.linalg.norm(k))
    if kabs == 0:
        return 0.0
    s0, s1 = sphere_exponential_moments(model.m, 2.0 * tau * kabs)
    return float(-orientation * kabs * s1 / s0)


def _frequency(kind: str, m: int, tau: float, r):
    """Spectral parameter as a function of ``|k|`` (monotone increasing)."""
    r = np.asarray(r, dtype=float)
    if kind == "P":
        return r
    s0, s1 = sphere_exponential_moments(m, 2.0 * tau * r)
    return -REEB_ORIENTATION * r * s1 / s0


def _unit_weight(kind: str, m: int, tau: float, r):
    """Bound on ``|term| / chi`` for a mode with ``|k| = r`` (increasing in ``r``)."""
    r = np.asarray(r, dtype=float)
    if kind == "P":
        return np.full_like(r, TWO_PI ** -m)
    return 1.0 / hardy_norm_sq_scaled(m, r, tau)


def _check_kind(kind):
    if kind not in KINDS:
        raise DomainError(f"kind must be one of {KINDS}, got {kind!r}")


# ---------------------------------------------------------------------------
# windows and tail certificates
# ---------------------------------------------------------------------------

def window_modes(kind: str, m: int, lam: float, tau: float, window: float):
    """Lattice vectors with ``|lambda_k - lam| <= window``, with their frequencies and weights."""
    _check_kind(kind)
    r_lo = max(0.0, lam - window)
    r_hi = lam + window
    if kind == "Pi":
        # mu_k <= |k|; widen until the frequency clears the window
        step = 1.0 + (m - 1) / (4.0 * tau)
        while float(_frequency(kind, m, tau, r_hi)) <= lam + window:
            r_hi += step
    ks = lattice_shell(m, r_lo, r_hi)
    k2 = np.einsum("ij,ij->i", ks, ks)
    if kind == "P":
        freq = np.sqrt(k2.astype(float))
        weight = np.full(freq.shape, TWO_PI ** -m)
    else:
        freq, weight = _PI_TABLE.get(m, tau, k2)
    keep = np.abs(freq - lam) <= window
    return ks[keep], freq[keep], weight[keep]


def _ball_volume(m: int) -> float:
    return float(np.exp(0.5 * m * np.log(np.pi) - gammaln(0.5 * m + 1)))


@lru_cache(maxsize=64)
def _shell_table(kind: str, m: int, tau: float, n_max: int):
    """Frequency range and (count bound x weight bound) of each unit shell ``n <= |k| < n+1``."""
    n = np.arange(n_max + 1, dtype=float)
    f = _frequency(kind, m, tau, np.append(n, n_max + 1.0))
    half = 0.5 * np.sqrt(m)
    count = _ball_volume(m) * ((n + 1.0 + half) ** m - np.maximum(n - half, 0.0) ** m)
    cw = count * _unit_weight(kind, m, tau, n + 1.0)
    for arr in (f, cw):
        arr.setflags(write=False)
    return f[:-1], f[1:], cw


def tail_bound(kind: str, m: int, chi: SmoothingFunction, lam: float, tau: float,
               window: float) -> float:
    """Certified bound on the discarded part of a smoothed kernel sum.

    Valid for every pair of points with ``|Im z|, |Im w| <= tau``. Modes are
    grouped into unit shells ``n <= |k| < n + 1``; each shell contributes at
    most (lattice-count bound) x (weight bound) x (chi envelope at the
    shell's distance from ``lam``). Shells past the explicit range are bounded
    with the ``C_6`` decay constant.
    """
    _check_kind(kind)
    if m > 3:
        raise ConfigurationError("tail certificate implemented for m <= 3",
                                 smallest_certifiable=float("inf"))
    n_max = int(np.ceil(lam + window + 4.0 * chi.s_max + 1000.0))
    # round up so nearby windows share the cached shell table
    n_max = 512 * (n_max // 512 + 1)
    f_lo, f_hi, cw = _shell_table(kind, m, float(tau), n_max)
    dist = np.maximum.reduce([np.zeros_like(f_lo), f_lo - lam, lam - f_hi])
    outside = np.maximum(np.abs(f_lo - lam), np.abs(f_hi - lam)) > window
    shells = np.where(outside, cw * chi.envelope(np.maximum(dist, window)), 0.0)
    total = float(np.sum(shells))
    # analytic remainder: count * weight <= A n^q, chi <= C6 (1 + d)^-6
    q = (m - 1) + (0.5 * (m - 1) if kind == "Pi" else 0.0)
    big_n = float(n_max + 1)
    a_const = 2.0 * float(cw[-1]) / big_n ** q
    shift = lam + (m - 1) / (4.0 * tau) + 1.0
    x0 = big_n - 1.0
    ratio = x0 / (x0 - shift)
    c6 = chi.decay_constants(6)[6]
    total += a_const * c6 * ratio ** q * (x0 - shift) ** (q - 5.0) / (5.0 - q)
    return total


def certified_config(kind: str, model: FlatModel, chi: SmoothingFunction, lam: float,
                     tau: float, tail_tol: float, w_max: float = 400.0) -> KernelSumConfig:
    """Smallest window (in steps of 1) whose tail bound is below ``tail_tol``."""
    w = 1.0
    while True:
        tb = tail_bound(kind, model.m, chi, lam, tau, w)
        if tb <= tail_tol:
            return KernelSumConfig(lam, tau, w, tail_tol)
        if w >= w_max:
            raise ConfigurationError(
                f"tail bound {tb:.3e} exceeds tail_tol {tail_tol:.3e} at window {w_max}",
                smallest_certifiable=tb,
            )
        w = min(w_max, w + 1.0 if w < 20 else float(np.ceil(w * 1.25)))


# ---------------------------------------------------------------------------
# kernel evaluation
# ---------------------------------------------------------------------------

def _as_point_array(z, m: int) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(_points(z), dtype=complex))
    if arr.shape[-1] != m:
        raise DomainError(f"points must have {m} coordinates")
    return arr


def _mode_sum(ks, coef, za, zb, tau):
    """``sum_k coef_k a_k(za) conj(a_k(zb))`` with ``a_k(z) = exp(i k.z - tau |k|)``."""
    out = np.zeros((za.shape[0], zb.shape[0]), dtype=complex)
    same = zb is za
    for lo in range(0, ks.shape[0], _MODE_CHUNK):
        k = ks[lo:lo + _MODE_CHUNK].astype(float)
        damp = tau * np.sqrt(np.einsum("ij,ij->i", k, k))
        ea = np.exp(1j * (za @ k.T) - damp)
        eb = ea if same else np.exp(1j * (zb @ k.T) - damp)
        out += (ea * coef[lo:lo + _MODE_CHUNK]) @ eb.conj().T
    return out


def kernel_matrix(kind: str, model: FlatModel, chi: SmoothingFunction,
                  cfg: KernelSumConfig, za, zb=None):
    """Matrix of smoothed kernel values ``K[a, b]`` and the certified tail bound.

    Raises
    ------
    ConfigurationError
        If the window in ``cfg`` cannot certify ``cfg.tail_tol``.
    """
    _check_kind(kind)
    m = model.m
    tb = tail_bound(kind, m, chi, cfg.lam, cfg.tau, cfg.window)
    if tb > cfg.tail_tol:
        raise ConfigurationError(
            f"window {cfg.window} leaves a tail of up to {tb:.3e} > {cfg.tail_tol:.3e}",
            smallest_certifiable=tb,
        )
    za = _as_point_array(za, m)
    zb = za if zb is None else _as_point_array(zb, m)
    ks, freq, weight = window_modes(kind, m, cfg.lam, cfg.tau, cfg.window)
    coef = chi(cfg.lam - freq) * weight
    return _mode_sum(ks, coef, za, zb, cfg.tau), tb


def auto_kernel_matrix(kind: str, model: FlatModel, chi: SmoothingFunction, lam: float,
                       tau: float, za, zb=None, rel_tol: float = 1e-8):
    """Kernel matrix with a window certified to ``rel_tol`` times the smallest diagonal value.

    The diagonal is estimated, the window chosen, and the estimate re-checked.
    Returns ``(K, tail_bound, cfg)``.
    """
    m = model.m
    za = _as_point_array(za, m)
    pts = za if zb is None else np.vstack([za, _as_point_array(zb, m)])
    scale = _diag_estimate(kind, model, chi, lam, tau, pts)
    for _ in range(6):
        cfg = certified_config(kind, model, chi, lam, tau, rel_tol * scale)
        diag = np.real(np.diag(kernel_matrix(kind, model, chi, cfg, pts)[0]))
        if cfg.tail_tol <= rel_tol * diag.min():
            break
        scale = max(float(diag.min()), 1e-300)
    k, tb = kernel_matrix(kind, model, chi, cfg, za, zb)
    return k, tb, cfg


def _diag_estimate(kind, model, chi, lam, tau, pts):
    cfg = KernelSumConfig(lam, tau, min(8.0, lam), 1.0)
    ks, freq, weight = window_modes(kind, model.m, lam, tau, cfg.window)
    coef = chi(lam - freq) * weight
    vals = [np.real(_mode_sum(ks, coef, p[None], p[None], tau))[0, 0] for p in pts]
    return max(float(min(vals)), 1e-300)


def smoothed_projection(model: FlatModel, chi: SmoothingFunction, lam: float, tau: float,
                        z, w, cfg: KernelSumConfig | None = None,
                        rel_tol: float = 1e-8) -> KernelValue:
    """Smoothed tempered projection kernel ``P_{chi, lam}(z, w)`` with its tail bound."""
    return _single("P", model, chi, lam, tau, z, w, cfg, rel_tol)


def toeplitz_localization(model: FlatModel, chi: SmoothingFunction, lam: float, tau: float,
                          z, w, cfg: KernelSumConfig | None = None,
                          rel_tol: float = 1e-8) -> KernelValue:
    """Spectrally localized Szegő kernel ``Pi_{chi, lam}(z, w)`` with its tail bound."""
    return _single("Pi", model, chi, lam, tau, z, w, cfg, rel_tol)


def _single(kind, model, chi, lam, tau, z, w, cfg, rel_tol):
    if cfg is None:
        k, tb, _ = auto_kernel_matrix(kind, model, chi, lam, tau, z, w, rel_tol)
    else:
        k, tb = kernel_matrix(kind, model, chi, cfg, z, w)
    return KernelValue(complex(k[0, 0]), float(tb))


# ---------------------------------------------------------------------------
# sharp partial sums
# ---------------------------------------------------------------------------

def real_projection_E(model: FlatModel, lam: float, x, y) -> float:
    """Sharp spectral projection ``sum_{|k| <= lam} phi_k(x) conj(phi_k(y))`` on the torus."""
    if lam < 0:
        raise DomainError("lam must be nonnegative")
    ks = lattice_shell(model.m, 0.0, lam).astype(float)
    d = np.atleast_1d(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    # the sum over +-k is real
    return float(np.sum(np.cos(ks @ d)) * TWO_PI ** -model.m)


def tempered_projection(model: FlatModel, lam: float, tau: float, z, w) -> complex:
    """Sharp tempered sum ``sum_{|k| <= lam} e^{-2 tau |k|} phi_k(z) conj(phi_k(w))``."""
    if lam < 0 or not tau > 0:
        raise DomainError("need lam >= 0 and tau > 0")
    m = model.m
    ks = lattice_shell(m, 0.0, lam)
    coef = np.full(ks.shape[0], TWO_PI ** -m)
    za, zb = _as_point_array(z, m), _as_point_array(w, m)
    return complex(_mode_sum(ks, coef, za, zb, tau)[0, 0])


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def kernel_rows_csv(rows) -> str:
    """CSV text for kernel evaluations.

    Each row is ``(lam, tau, z, w, value, tail)`` with ``z``, ``w`` complex vectors.
    """
    rows = list(rows)
    m = len(np.atleast_1d(rows[0][2])) if rows else 0
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    head = ["lam", "tau"]
    for name in ("z", "w"):
        for j in range(m):
            head += [f"{name}{j}_re", f"{name}{j}_im"]
    writer.writerow(head + ["re", "im", "tail"])
    for lam, tau, z, w, val, tail in rows:
        line = [repr(float(lam)), repr(float(tau))]
        for pt in (z, w):
            for c in np.atleast_1d(np.asarray(pt, dtype=complex)):
                line += [repr(float(c.real)), repr(float(c.imag))]
        line += [repr(float(np.real(val))), repr(float(np.imag(val))), repr(float(tail))]
        writer.writerow(line)
    return buf.getvalue()
