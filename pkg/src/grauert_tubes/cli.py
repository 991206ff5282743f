"""Command-line front end: ``grauert-tubes <command> [options]``.

Options may also come from a ``key = value`` config file (``--config``);
explicit flags win. Structured results are JSON with sorted keys, tables are
CSV. A command exits 0 when every asserted check passes, otherwise it writes
``failures.json`` next to its outputs and exits 1.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import GrauertError
from .geometry import (
    build_heisenberg_chart,
    chart_remainder_fit,
    flow_in_chart,
    remainder_orders_ok,
)
from .kernels import auto_kernel_matrix, kernel_rows_csv, toeplitz_eigenvalue
from .models import FlatModel, hardy_norm_sq_scaled, lattice_shell
from .scaling import DEFAULT_LAMBDAS, default_base_point, scaling_study
from .smoothing import make_chi
from .stationary_phase import phase_critical_data

RATE_BAND = (-0.7, -0.35)
JITTER = 0.10

DEFAULTS = {
    "model": "torus",
    "dim": 2,
    "tau": 0.5,
    "eps": 4.0,
    "lambda_grid": ",".join(f"{x:g}" for x in DEFAULT_LAMBDAS),
    "rho": 0.8,
    "kernel": "both",
    "out": ".",
    "threads": None,
    "cutoff": 10.0,
    "lam": 100.0,
    "z": None,
    "w": None,
}


def load_config(path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise GrauertError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise GrauertError(f"{path}:{n}: unknown key {key!r}")
        out[key] = value
    return out


def _resolve(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(load_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if os.environ.get("THREADS") and getattr(args, "threads", None) is None:
        cfg["threads"] = os.environ["THREADS"]
    cfg["dim"] = int(cfg["dim"])
    cfg["tau"] = float(cfg["tau"])
    cfg["eps"] = float(cfg["eps"])
    cfg["rho"] = float(cfg["rho"])
    cfg["cutoff"] = float(cfg["cutoff"])
    cfg["lam"] = float(cfg["lam"])
    cfg["threads"] = int(cfg["threads"]) if cfg["threads"] not in (None, "") else None
    if cfg["model"] == "circle":
        cfg["dim"] = 1
    cfg["lambda_grid"] = [float(x) for x in str(cfg["lambda_grid"]).split(",") if x.strip()]
    return cfg


def _model(cfg) -> FlatModel:
    return FlatModel.circle() if cfg["model"] == "circle" else FlatModel.torus(cfg["dim"])


def _write(out: Path, name: str, text: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _finish(out: Path, command: str, failures: list) -> int:
    if failures:
        _write(out, "failures.json", _dump({"command": command, "failures": failures}))
        return 1
    return 0


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_spectrum(cfg) -> int:
    model = _model(cfg)
    m, tau = model.m, cfg["tau"]
    ks = lattice_shell(m, 0.0, cfg["cutoff"])
    kabs = np.sqrt(np.einsum("ij,ij->i", ks, ks).astype(float))
    log_norm = np.log(hardy_norm_sq_scaled(m, kabs, tau)) + 2.0 * tau * kabs
    lines = [",".join([f"k{j}" for j in range(m)] + ["abs_k", "mu_k", "log_hardy_norm_sq"])]
    for k, r, ln in zip(ks, kabs, log_norm):
        mu = toeplitz_eigenvalue(model, k, tau)
        lines.append(",".join([str(int(c)) for c in k] + [repr(float(r)), repr(mu), repr(float(ln))]))
    _write(Path(cfg["out"]), "spectrum.csv", "\n".join(lines) + "\n")
    return 0


def cmd_phase_report(cfg) -> int:
    rep = phase_critical_data(cfg["tau"], cfg["lam"])
    d = json.loads(rep.to_json())
    d["hessian_times_inverse_is_identity"] = rep.inverse_residual <= 1e-14
    out = Path(cfg["out"])
    _write(out, "phase_report.json", _dump(d))
    failures = []
    if not d["hessian_times_inverse_is_identity"]:
        failures.append({"check": "inverse", "value": rep.inverse_residual, "limit": 1e-14})
    if abs(rep.gamma_times_lam_tau - 8 * np.pi ** 2) > 1e-12 * 8 * np.pi ** 2:
        failures.append({"check": "gamma", "value": rep.gamma_times_lam_tau,
                         "expected": 8 * np.pi ** 2})
    if rep.signature != 0:
        failures.append({"check": "signature", "value": rep.signature, "expected": 0})
    return _finish(out, "phase-report", failures)


def _monotone(errors, jitter=JITTER) -> bool:
    return all(b <= a * (1 + jitter) for a, b in zip(errors, errors[1:]))


def cmd_scaling_study(cfg) -> int:
    kinds = ["P", "Pi"] if cfg["kernel"] == "both" else [cfg["kernel"]]
    out = Path(cfg["out"])
    failures = []
    for kind in kinds:
        rep = scaling_study(kind, _model(cfg).m, cfg["tau"], cfg["lambda_grid"], cfg["rho"],
                            cfg["eps"], threads=cfg["threads"])
        d = rep.to_dict()
        d["config"] = {k: cfg[k] for k in ("model", "dim", "tau", "eps", "lambda_grid", "rho")}
        _write(out, f"scaling_{kind}.json", _dump(d))
        _write(out, f"scaling_{kind}_rates.csv", rep.rate_csv())
        _write(out, f"scaling_{kind}_tuples.csv", rep.tuple_csv())
        if any(e != 0 for e in rep.diagonal_errors):
            failures.append({"kernel": kind, "check": "diagonal", "value": rep.diagonal_errors})
        if not _monotone(rep.sup_errors):
            failures.append({"kernel": kind, "check": "monotone", "value": rep.sup_errors})
        if rep.m >= 2 and not RATE_BAND[0] <= rep.fit.slope <= RATE_BAND[1]:
            failures.append({"kernel": kind, "check": "rate", "value": rep.fit.slope,
                             "band": list(RATE_BAND)})
    return _finish(out, "scaling-study", failures)


def cmd_chart_check(cfg) -> int:
    model = _model(cfg)
    base = default_base_point(model.m, cfg["tau"])
    chart = build_heisenberg_chart(model, base, cfg["tau"])
    fit = chart_remainder_fit(chart)
    ts = cfg["tau"] * np.geomspace(0.05, 0.005, 6)
    flow = [flow_in_chart(chart, t).theta_defect for t in ts]
    d = {
        "chart": chart.to_dict(),
        "condition_number": chart.condition_number,
        "remainder_slopes": fit.slopes,
        "remainder_residuals": fit.residuals,
        "flow_t": ts.tolist(),
        "flow_theta_defect": flow,
    }
    out = Path(cfg["out"])
    _write(out, "chart_check.json", _dump(d))
    failures = []
    if not remainder_orders_ok(fit):
        failures.append({"check": "remainder_orders", "value": fit.slopes})
    if max(abs(x) for x in flow) > 1e-12:
        failures.append({"check": "base_point_flow", "value": flow})
    return _finish(out, "chart-check", failures)


def _parse_points(text: str, m: int) -> np.ndarray:
    vals = [complex(s.strip().replace(" ", "")) for s in text.split(",") if s.strip()]
    if len(vals) % m:
        raise GrauertError(f"point list length {len(vals)} is not a multiple of m = {m}")
    return np.array(vals, dtype=complex).reshape(-1, m)


def cmd_kernel_eval(cfg) -> int:
    model = _model(cfg)
    if cfg["z"] is None:
        raise GrauertError("kernel-eval needs --z (and optionally --w)")
    za = _parse_points(cfg["z"], model.m)
    zb = za if cfg["w"] is None else _parse_points(cfg["w"], model.m)
    kinds = ["P", "Pi"] if cfg["kernel"] == "both" else [cfg["kernel"]]
    chi = make_chi(cfg["eps"])
    out = Path(cfg["out"])
    for kind in kinds:
        k, tb, _ = auto_kernel_matrix(kind, model, chi, cfg["lam"], cfg["tau"], za, zb)
        rows = [(cfg["lam"], cfg["tau"], za[i], zb[j], k[i, j], tb)
                for i in range(len(za)) for j in range(len(zb))]
        _write(out, f"kernel_{kind}.csv", kernel_rows_csv(rows))
    return 0


COMMANDS = {
    "spectrum": cmd_spectrum,
    "phase-report": cmd_phase_report,
    "scaling-study": cmd_scaling_study,
    "chart-check": cmd_chart_check,
    "kernel-eval": cmd_kernel_eval,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grauert-tubes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--model", choices=["circle", "torus"])
    common.add_argument("--dim", type=int)
    common.add_argument("--tau", type=float)
    common.add_argument("--eps", type=float, help="half-width of the support of chi-hat")
    common.add_argument("--lambda-grid", dest="lambda_grid", help="comma-separated values")
    common.add_argument("--rho", type=float)
    common.add_argument("--kernel", choices=["P", "Pi", "both"])
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common]).add_argument("--cutoff", type=float)
    sub.add_parser("phase-report", parents=[common]).add_argument("--lam", type=float)
    sub.add_parser("scaling-study", parents=[common])
    sub.add_parser("chart-check", parents=[common])
    ke = sub.add_parser("kernel-eval", parents=[common])
    ke.add_argument("--lam", type=float)
    ke.add_argument("--z", help="comma-separated complex coordinates, m per point")
    ke.add_argument("--w", help="as --z; defaults to --z")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](cfg)
    except GrauertError as exc:
        out = Path(getattr(args, "out", None) or ".")
        _write(out, "failures.json",
               _dump({"command": args.command, "error": type(exc).__name__, "message": str(exc)}))
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
