"""Command-line interface: ``evostab <command> --config FILE --out DIR``.

Exit codes: 0 success, 1 analysis negative (not certified, validation
failed, hypotheses violated), 2 usage or configuration error.
"""

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .certify import (
    CounterexampleError,
    GridSpec,
    certify_kappa,
    certify_scenario,
    estimate_growth_bound,
    resolvent_sup_grid,
    with_delay_constants,
)
from .kernels import (
    DiagExpSumKernel,
    ExpSumKernel,
    NotCertifiedError,
    SQRT_2PI,
    check_alabau,
    check_hypotheses,
    fourier_hat,
    g_lower_bound,
    kernel_est_constant,
    read_sampled_kernel_csv,
)
from .reformulation import build_Md
from .scenario import BumpSource, SampledSource, WaveScenario
from .spatial import dirichlet_1d, from_matrix, read_matrix_csv
from .timedomain import Trajectory, simulate, weighted_norm

__all__ = ["ConfigError", "Config", "load_config", "main"]

EXIT_OK, EXIT_NEGATIVE, EXIT_CONFIG = 0, 1, 2

CSV_HELP = """\
output files (written to --out):
  certificate.json   all certificate constants; summary.txt   human-readable
  simulation.json    decay fit, pointwise check, weighted-norm probes
  energy.csv         t, energy, norm_u, norm_du  (energy = |u'|^2 + |Cu|^2)
  displacement.csv   t, u_1, ..., u_n
  validation.json    certificate, fitted rate, resolvent grid sup, verdict
  kernel_check.json  hypotheses (a)-(f) and the kernel-estimate constant
  sweep_kappa.csv    kappa, certified, rho1, nu_hat, kappa0
                     (rho1 empty when not certified)

environment:
  EVOSTAB_THREADS    worker threads for sweep-kappa (default 1)
"""


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class Analysis:
    delta: float = None
    T: float = 60.0
    dt: float = 1e-3
    window: float = 2.0
    grid: GridSpec = field(default_factory=GridSpec)
    nu_probes: tuple = ()
    kappas: tuple = ()
    kappa_factors: tuple = ()
    csv_stride: int = 100
    growth_estimate: bool = True


@dataclass(frozen=True)
class Config:
    scenario: WaveScenario
    analysis: Analysis
    family: str
    raw: dict


def _num(section, key, default=None, positive=False, required=False):
    if key not in section or section[key] is None:
        if required:
            raise ConfigError(f"missing required field {key!r}")
        return default
    val = section[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"field {key!r} must be a finite number, got {val!r}")
    if positive and not val > 0:
        raise ConfigError(f"field {key!r} must be positive")
    return float(val)


def _resolve(base, path):
    p = Path(path)
    return p if p.is_absolute() else base / p


def _load_spatial(sec, base):
    kind = sec.get("type", "dirichlet_1d")
    if kind == "dirichlet_1d":
        n = sec.get("n", 31)
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ConfigError("spatial.n must be an integer >= 1")
        return dirichlet_1d(n)
    if kind == "matrix":
        if "path" not in sec:
            raise ConfigError("spatial.path is required for type 'matrix'")
        path = _resolve(base, sec["path"])
        try:
            return from_matrix(read_matrix_csv(path), provenance=f"matrix({Path(path).name})")
        except (OSError, ValueError) as exc:
            raise ConfigError(f"spatial matrix: {exc}") from exc
    raise ConfigError(f"unknown spatial type {kind!r}")


def _load_kernel(sec, alpha, base):
    if not isinstance(sec, dict):
        raise ConfigError("law.kernel must be an object")
    try:
        if "terms" in sec:
            terms = sec["terms"]
            if not terms or any(len(t) != 2 for t in terms):
                raise ConfigError("kernel.terms must be a non-empty list of [k, beta] pairs")
            return ExpSumKernel.from_terms([(float(k), float(b)) for k, b in terms], alpha)
        if "channels" in sec:
            chans = [[(float(k), float(b)) for k, b in ch] for ch in sec["channels"]]
            return DiagExpSumKernel(tuple(chans), alpha)
        if "csv" in sec:
            rate = _num(sec, "tail_rate", positive=True, required=True)
            return read_sampled_kernel_csv(_resolve(base, sec["csv"]), rate, alpha)
    except (TypeError, ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"kernel: {exc}") from exc
    raise ConfigError("kernel needs one of 'terms', 'channels' or 'csv'")


def _load_source(sec, n, base):
    kind = sec.get("type", "bump")
    if kind == "bump":
        try:
            return BumpSource(
                t0=_num(sec, "t0", 0.0),
                t1=_num(sec, "t1", 1.0),
                amplitude=_num(sec, "amplitude", 1.0),
                center=_num(sec, "center", 0.5),
                width=_num(sec, "width", 0.1, positive=True),
            )
        except ValueError as exc:
            raise ConfigError(f"source: {exc}") from exc
    if kind == "file":
        if "path" not in sec:
            raise ConfigError("source.path is required for type 'file'")
        try:
            data = np.loadtxt(_resolve(base, sec["path"]), delimiter=",", ndmin=2)
            src = SampledSource(data[:, 0], data[:, 1:])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"source file: {exc}") from exc
        if src.values.shape[1] != n:
            raise ConfigError(f"source file has {src.values.shape[1]} components, expected {n}")
        return src
    raise ConfigError(f"unknown source type {kind!r}")


def _load_analysis(sec):
    g = sec.get("grid", {}) or {}
    if not isinstance(g, dict):
        raise ConfigError("analysis.grid must be an object")
    try:
        grid = GridSpec(
            n_re=int(g.get("n_re", 9)),
            n_im=int(g.get("n_im", 241)),
            im_min=float(g.get("im_min", 1e-3)),
            t_max=None if g.get("t_max") is None else float(g["t_max"]),
            re_max=float(g.get("re_max", 2.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"analysis.grid: {exc}") from exc
    def floats(key):
        vals = sec.get(key, [])
        if not isinstance(vals, list):
            raise ConfigError(f"analysis.{key} must be a list of numbers")
        try:
            return tuple(float(v) for v in vals)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"analysis.{key}: {exc}") from exc

    an = Analysis(
        delta=_num(sec, "delta", None),
        T=_num(sec, "T", 60.0, positive=True),
        dt=_num(sec, "dt", 1e-3, positive=True),
        window=_num(sec, "window", 2.0, positive=True),
        grid=grid,
        nu_probes=floats("nu_probes"),
        kappas=floats("kappas"),
        kappa_factors=floats("kappa_factors"),
        csv_stride=int(_num(sec, "csv_stride", 100)),
        growth_estimate=bool(sec.get("growth_estimate", True)),
    )
    steps = an.T / an.dt
    if abs(steps - round(steps)) > 1e-9 * steps:
        raise ConfigError("analysis.dt must divide analysis.T")
    if an.csv_stride < 1:
        raise ConfigError("analysis.csv_stride must be >= 1")
    return an


def config_from_dict(raw, base=Path(".")):
    """Build a :class:`Config` from a parsed JSON object."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in ("spatial", "law", "source", "analysis"):
        if key in raw and not isinstance(raw[key], dict):
            raise ConfigError(f"section {key!r} must be an object")
    C = _load_spatial(raw.get("spatial", {}), base)
    law = raw.get("law")
    if not isinstance(law, dict) or "type" not in law:
        raise ConfigError("law section with a 'type' is required")
    family = law["type"]
    analysis = _load_analysis(raw.get("analysis", {}))
    source = _load_source(raw.get("source", {}), C.n, base)
    kw = {}
    if family == "damped_wave":
        kw["gamma"] = _num(law, "m1", 0.2)
        kw["r"] = _num(law, "r", 5.0, positive=True)
        if "kappa" in law:
            kw["kappa"] = _num(law, "kappa", 0.0)
            kw["h"] = _num(law, "h", 1.0, positive=True)
    elif family in ("integro", "integro_delay"):
        alpha = _num(law, "alpha", required=True, positive=True)
        if "kernel" not in law:
            raise ConfigError("integro laws need a kernel")
        kw["kernel"] = _load_kernel(law["kernel"], alpha, base)
        kw["gamma"] = _num(law, "gamma", 0.0)
        if analysis.delta is not None and not 0 < analysis.delta < alpha:
            raise ConfigError(f"analysis.delta must lie in (0, alpha={alpha})")
        if family == "integro_delay":
            kw["kappa"] = _num(law, "kappa", 0.0)
            kw["h"] = _num(law, "h", required=True, positive=True)
    else:
        raise ConfigError(f"unknown law type {family!r}")
    if "h" in kw:
        ratio = kw["h"] / analysis.dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
            raise ConfigError("analysis.dt must divide the delay h")
    try:
        scenario = WaveScenario(C, source=source, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return Config(scenario, analysis, family, raw)


def load_config(path):
    path = Path(path)
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    return config_from_dict(raw, path.parent)


# --------------------------------------------------------------------------
# report helpers


def _clean(obj):
    """Convert to plain JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(_clean(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def write_summary(path, title, rows):
    width = max(len(k) for k, _ in rows) if rows else 0
    with open(path, "w") as fh:
        fh.write(title + "\n")
        for k, v in rows:
            fh.write(f"  {k.ljust(width)}  {_fmt(v)}\n")


def _cert_rows(cert):
    return [
        ("certified", cert.certified),
        ("mode", cert.mode),
        ("reason", cert.reason),
        ("delta", cert.delta),
        ("rho0", cert.rho0),
        ("c", cert.c),
        ("K", cert.K),
        ("d0", cert.d0),
        ("rho1", cert.rho1),
        ("resolvent_bound", cert.resolvent_bound),
        ("growth_bound_estimate", cert.growth_bound_estimate),
        ("kappa0", cert.kappa0),
        ("perturbation_bound", cert.perturbation_bound),
    ]


def _certify(cfg, growth=False):
    cert = certify_scenario(cfg.scenario, delta=cfg.analysis.delta, grid=cfg.analysis.grid)
    if growth and cert.certified and cert.system is not None:
        full = build_Md(cfg.scenario.second_order_law(), cfg.scenario.C, cert.d0)
        est = estimate_growth_bound(full.law, full.A, n_re=21, n_im=201)
        cert = replace(cert, growth_bound_estimate=est)
    return cert


def _simulate(cfg, scenario=None):
    scenario = scenario or cfg.scenario
    return simulate(scenario, cfg.analysis.T, cfg.analysis.dt, window=cfg.analysis.window)


def _sim_report(res, cfg):
    fit = res.fit
    rep = {
        "T": cfg.analysis.T,
        "dt": cfg.analysis.dt,
        "nu_hat": fit.nu,
        "fit_residual": fit.residual,
        "window": cfg.analysis.window,
        "energy_final": float(res.energy[-1]),
        "energy_max": float(res.energy.max()),
    }
    if res.pointwise is not None:
        pw = res.pointwise
        rep["pointwise_bound"] = {
            "nu": pw.nu,
            "sup_exp_u": pw.lhs,
            "bound_with_factor": pw.rhs_scaled,
            "bound_without_factor": pw.rhs_plain,
            "holds_with_factor": pw.holds_scaled,
            "holds_without_factor": pw.holds_plain,
        }
    probes = []
    state = Trajectory(res.t, np.hstack([res.du, res.u @ cfg.scenario.C.C.T]))
    tail = state.t >= 0.9 * state.t[-1]
    for nu in cfg.analysis.nu_probes:
        total = weighted_norm(state, -nu)
        late = weighted_norm(Trajectory(state.t[tail], state.values[tail]), -nu) if tail.sum() > 1 else 0.0
        probes.append({"nu": nu, "weighted_norm": total,
                       "late_fraction": late / total if total > 0 else 0.0})
    rep["nu_probes"] = probes
    return rep


def _write_curves(out, res, stride):
    idx = np.arange(0, res.t.size, stride)
    with open(out / "energy.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "energy", "norm_u", "norm_du"])
        nu = np.linalg.norm(res.u, axis=1)
        ndu = np.linalg.norm(res.du, axis=1)
        for i in idx:
            w.writerow([f"{res.t[i]:.10g}", f"{res.energy[i]:.12e}", f"{nu[i]:.12e}", f"{ndu[i]:.12e}"])
    with open(out / "displacement.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"u_{j + 1}" for j in range(res.u.shape[1])])
        for i in idx:
            w.writerow([f"{res.t[i]:.10g}"] + [f"{v:.12e}" for v in res.u[i]])


# --------------------------------------------------------------------------
# commands


def cmd_certify(cfg, out):
    cert = _certify(cfg, growth=cfg.analysis.growth_estimate)
    write_json(out / "certificate.json", cert.as_dict())
    write_summary(out / "summary.txt", f"certify: {cfg.family}", _cert_rows(cert))
    return EXIT_OK if cert.certified else EXIT_NEGATIVE


def cmd_simulate(cfg, out):
    res = _simulate(cfg)
    rep = _sim_report(res, cfg)
    rep["scenario"] = cfg.scenario.describe()
    write_json(out / "simulation.json", rep)
    _write_curves(out, res, cfg.analysis.csv_stride)
    write_summary(out / "summary.txt", f"simulate: {cfg.family}",
                  [("nu_hat", rep["nu_hat"]), ("fit_residual", rep["fit_residual"])])
    return EXIT_OK


def validate_scenario(cfg, cert=None):
    """Certify, simulate and compare; returns ``(passed, report)``."""
    cert = cert or _certify(cfg)
    rep = {"certificate": cert.as_dict()}
    if not cert.certified:
        rep["verdict"] = "REFUSED"
        rep["reason"] = f"not certifiable: {cert.reason}"
        return False, rep
    scenario = cfg.scenario
    if scenario.has_delay:
        system = build_Md(scenario.second_order_law(), scenario.C, cert.d0)
        bound = cert.perturbation_bound
    else:
        system = cert.system
        bound = cert.resolvent_bound
    try:
        sup, arg = resolvent_sup_grid(system.law, system.A, cert.rho1, cfg.analysis.grid)
    except CounterexampleError as exc:
        rep["verdict"] = "FAIL"
        rep["reason"] = str(exc)
        return False, rep
    res = _simulate(cfg)
    nu_hat = res.fit.nu
    rate_ok = nu_hat >= cert.rho1 - 0.01
    grid_ok = sup <= bound * (1 + 1e-6)
    rep["simulation"] = _sim_report(res, cfg)
    rep["resolvent_grid_sup"] = sup
    rep["resolvent_grid_argmax"] = arg
    rep["resolvent_bound"] = bound
    rep["rate_check"] = rate_ok
    rep["grid_check"] = grid_ok
    passed = bool(rate_ok and grid_ok)
    rep["verdict"] = "PASS" if passed else "FAIL"
    return passed, rep


def cmd_validate(cfg, out):
    passed, rep = validate_scenario(cfg)
    write_json(out / "validation.json", rep)
    cert = rep["certificate"]
    rows = [("verdict", rep["verdict"]), ("rho1", cert.get("rho1"))]
    if "simulation" in rep:
        rows += [("nu_hat", rep["simulation"]["nu_hat"]),
                 ("resolvent_grid_sup", rep["resolvent_grid_sup"]),
                 ("resolvent_bound", rep["resolvent_bound"])]
    if "reason" in rep:
        rows.append(("reason", rep["reason"]))
    write_summary(out / "summary.txt", f"validate: {cfg.family}", rows)
    return EXIT_OK if passed else EXIT_NEGATIVE


def kernel_check(kernel, delta, n_grid=10_000):
    """Hypotheses (a)-(f) plus the kernel-estimate inequality on a grid."""
    rep = check_hypotheses(kernel).as_dict()
    passed = dict(rep["passed"])
    notes = dict(rep["notes"])
    try:
        rho_nodes = np.linspace(-0.9 * kernel.alpha, 2.0, 9)
        gs = [g_lower_bound(kernel, delta, r) for r in rho_nodes]
        passed["f"] = True
        notes["f"] = f"term-wise g > 0 at |t| > {delta:g}; min sampled g = {min(gs):.6g}"
        rep["g"] = {"delta": delta, "rho": rho_nodes.tolist(), "g": gs}
    except (NotCertifiedError, TypeError, ValueError) as exc:
        passed["f"] = False
        notes["f"] = str(exc)
    rep["passed"], rep["notes"] = passed, notes
    rep["all_passed"] = all(passed.values())
    if isinstance(kernel, ExpSumKernel) and kernel.nonnegative and not kernel.is_zero:
        est = {"alabau": check_alabau(kernel, kernel.min_rate)}
        try:
            c = kernel_est_constant(kernel, kernel.alpha)
            t = np.linspace(1e-3, 100.0, n_grid)
            lhs = np.imag(fourier_hat(kernel, t + 1j * kernel.alpha))
            rhs = -c * t / (1 + t**2)
            est.update(constant=c, constant_times_sqrt_2pi=c * SQRT_2PI,
                       inequality_holds=bool(np.all(lhs <= rhs + 1e-15)),
                       max_violation=float(np.max(lhs - rhs)), grid_points=n_grid)
        except (NotCertifiedError, ValueError) as exc:
            est["error"] = str(exc)
        rep["kernel_estimate"] = est
    return rep


def cmd_kernel_check(cfg, out):
    kern = cfg.scenario.kernel
    if kern is None:
        raise ConfigError("kernel-check needs a law with a kernel")
    delta = cfg.analysis.delta if cfg.analysis.delta is not None else kern.alpha / 2
    rep = kernel_check(kern, delta)
    write_json(out / "kernel_check.json", rep)
    rows = [(f"hypothesis ({k})", v) for k, v in sorted(rep["passed"].items())]
    if "kernel_estimate" in rep and "constant" in rep["kernel_estimate"]:
        rows.append(("kernel_est_constant", rep["kernel_estimate"]["constant"]))
    write_summary(out / "summary.txt", "kernel-check", rows)
    return EXIT_OK if rep["all_passed"] else EXIT_NEGATIVE


def _threads():
    try:
        return max(1, int(os.environ.get("EVOSTAB_THREADS", "1")))
    except ValueError:
        return 1


def sweep_kappa(cfg):
    """Rows ``(kappa, certified, rho1, nu_hat, kappa0)`` for the configured gains."""
    if cfg.family != "integro_delay":
        raise ConfigError("sweep-kappa needs an integro_delay scenario")
    base_scn = cfg.scenario.with_kappa(0.0)
    base = certify_scenario(base_scn, delta=cfg.analysis.delta, grid=cfg.analysis.grid)
    kappa0 = None
    if base.certified:
        base = with_delay_constants(base, cfg.scenario.kernel, cfg.scenario.h, cfg.analysis.grid)
        kappa0 = base.kappa0
    kappas = list(cfg.analysis.kappas)
    if kappa0 is not None:
        kappas += [f * kappa0 for f in cfg.analysis.kappa_factors]
    if not kappas:
        return [], kappa0

    def row(kappa):
        scn = cfg.scenario.with_kappa(kappa)
        if base.certified:
            cert = certify_kappa(base, scn)
            ok, rho1 = cert.certified, cert.rho1 if cert.certified else None
        else:
            ok, rho1 = False, None
        res = _simulate(cfg, scn)
        return {"kappa": kappa, "certified": ok, "rho1": rho1,
                "nu_hat": res.fit.nu, "kappa0": kappa0}

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(row, kappas))
    return rows, kappa0


SWEEP_COLUMNS = ["kappa", "certified", "rho1", "nu_hat", "kappa0"]


def cmd_sweep_kappa(cfg, out):
    rows, kappa0 = sweep_kappa(cfg)
    with open(out / "sweep_kappa.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow(["" if r[k] is None else (int(r[k]) if isinstance(r[k], bool) else f"{r[k]:.12g}")
                        for k in SWEEP_COLUMNS])
    write_summary(out / "summary.txt", "sweep-kappa",
                  [("kappa0", kappa0), ("rows", len(rows))])
    return EXIT_OK


COMMANDS = {
    "certify": cmd_certify,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "kernel-check": cmd_kernel_check,
    "sweep-kappa": cmd_sweep_kappa,
}


def build_parser():
    p = argparse.ArgumentParser(
        prog="evostab",
        description="Certify and validate exponential stability of wave-type evolutionary equations.",
        epilog=CSV_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON scenario file")
    p.add_argument("--out", default="evostab_out", help="output directory (created)")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"evostab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
