"""Command-line front end.

Every subcommand resolves a :class:`RunConfig` from ``--preset`` (default
``standard-a05``), then overlays ``--config`` and ``--seed``, and writes its
artifacts under ``--out`` (or ``$PIEZOHEAT_OUT``, else ``./piezoheat-out``).
JSON floats carry 17 significant digits and CSV floats 12; keys keep a fixed
order, so identical inputs give byte-identical files.  Wall-clock time goes
to a separate ``timing.json`` that is excluded from that guarantee.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .assembly import assemble_generator
from .config import PRESETS, ConfigError, RunConfig, initial_state, preset
from .fracdiff import (
    FractionalParams,
    QuadratureError,
    build_xi_quadrature,
    caputo_linear_exact,
    caputo_oracle,
    closed_form_integrals,
    diffusive_response,
    rule_integrals,
)
from .spectral import (
    DimensionError,
    compensated_slope,
    default_decay_window,
    fit_decay,
    resolvent_norm,
    resolvent_profile,
    spectrum,
    verify_stationary_kernel,
)
from .timestep import EnergyTrace, SimulationError, simulate

__all__ = ["main", "dumps", "resolve_config"]

DEFAULT_PRESET = "standard-a05"
OUT_ENV = "PIEZOHEAT_OUT"


# ---- deterministic serialization ----------------------------------------


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def dumps(obj, indent: int = 0) -> str:
    """JSON text with floats at 17 significant digits; NaN/inf become null."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(dumps(v, indent + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    return json.dumps(str(obj))


def _write_json(path: Path, obj) -> None:
    path.write_text(dumps(obj) + "\n", encoding="utf-8")


# ---- configuration --------------------------------------------------------


def resolve_config(args) -> RunConfig:
    cfg = preset(args.preset or DEFAULT_PRESET)
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = RunConfig.from_ini(text, source=str(path), base=cfg)
    if args.seed is not None:
        cfg = cfg.replace(seed=int(args.seed))
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "piezoheat-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---- commands ---------------------------------------------------------------


def _trace_summary(trace: EnergyTrace) -> dict:
    E = trace.totals
    res = np.asarray(trace.dissipation_residuals[1:])
    summary = {
        "samples": len(trace),
        "t_final": trace.times[-1],
        "initial_energy": float(E[0]),
        "final_energy": float(E[-1]),
        "energy_nonincreasing": bool(np.all(np.diff(E) <= 1e-12 * max(E[0], 1e-300))),
        "dissipation_residual_min": float(res.min()) if res.size else 0.0,
        "dissipation_residual_max": float(res.max()) if res.size else 0.0,
    }
    if trace.transmission:
        summary["transmission_residual_max"] = {
            "dirichlet": max(abs(r.r_dirichlet) for r in trace.transmission),
            "stress": max(abs(r.r_stress) for r in trace.transmission),
            "charge": max(abs(r.r_charge) for r in trace.transmission),
        }
    return summary


def run_simulation(cfg: RunConfig, out: Path) -> int:
    """Simulate and write ``trace.csv`` plus ``summary.json``; returns an exit code."""
    t0 = time.perf_counter()
    grid = cfg.build_grid()
    U0 = initial_state(cfg.sim.initial_condition, grid, cfg.seed, cfg.material)
    report = {"command": "simulate", "config": cfg.to_dict()}
    code = 0
    try:
        trace = simulate(cfg.sim, cfg.material, cfg.fractional, grid, U0)
        report["status"] = "ok"
    except SimulationError as exc:
        trace = exc.trace or EnergyTrace()
        report["status"] = "error"
        report["error"] = str(exc)
        code = 3
    with open(out / "trace.csv", "w", encoding="utf-8", newline="") as fh:
        trace.write_csv(fh)
    if len(trace):
        report.update(_trace_summary(trace))
    _write_json(out / "summary.json", report)
    _write_json(out / "timing.json", {"wall_time_s": time.perf_counter() - t0})
    return code


def cmd_simulate(cfg: RunConfig, out: Path, args) -> int:
    return run_simulation(cfg, out)


def cmd_spectrum(cfg: RunConfig, out: Path, args) -> int:
    grid = cfg.build_grid()
    A = assemble_generator(cfg.material, cfg.fractional, grid)
    rep = spectrum(A)
    report = {
        "command": "spectrum",
        "config": cfg.to_dict(),
        "dimension": A.dimension,
        "max_real_part": rep.max_real_part,
        "min_abs_real_part": rep.min_abs_real_part,
        "min_abs_eigenvalue": rep.min_abs_eigenvalue,
        "eigenvalues": [[float(z.real), float(z.imag)] for z in rep.eigenvalues],
    }
    if args.kernel_study:
        ks = verify_stationary_kernel(cfg.material, cfg.fractional, cfg.grid.n_heat, cfg.grid.n_beam)
        report["stationary_kernel"] = {
            "applicable": ks.applicable,
            "eta": ks.eta,
            "counts": ks.counts,
            "smallest_nodes": ks.smallest_nodes,
            "min_abs_eigenvalues": ks.min_abs_eigenvalues,
            "monotone_decreasing": ks.monotone_decreasing,
            "note": ks.note,
        }
    _write_json(out / "spectrum.json", report)
    return 0


def cmd_resolvent(cfg: RunConfig, out: Path, args) -> int:
    grid = cfg.build_grid()
    A = assemble_generator(cfg.material, cfg.fractional, grid)
    lam = cfg.spectral.lambda_
    report = {"command": "resolvent", "config": cfg.to_dict(), "dimension": A.dimension, "lambda": lam}
    try:
        report["norm"] = resolvent_norm(A, lam)
    except ZeroDivisionError as exc:
        report["norm"] = None
        report["error"] = str(exc)
    if not args.point_only:
        prof = resolvent_profile(A, cfg.spectral.lambdas())
        report.update(
            {
                "lambdas": prof.lambdas,
                "norms": prof.norms,
                "peak_frequencies": prof.peak_frequencies,
                "peak_norms": prof.peak_norms,
                "window": list(prof.window),
                "fitted_slope": prof.fitted_slope,
                "r_squared": prof.r_squared,
                "grid_slope": prof.grid_slope,
                "target_slope": 1.0 - cfg.fractional.alpha,
            }
        )
    _write_json(out / "resolvent.json", report)
    return 0 if report["norm"] is not None else 4


def cmd_decay_fit(cfg: RunConfig, out: Path, args) -> int:
    grid = cfg.build_grid()
    U0 = initial_state(cfg.sim.initial_condition, grid, cfg.seed, cfg.material)
    trace = simulate(cfg.sim, cfg.material, cfg.fractional, grid, U0, track_transmission=False)
    with open(out / "trace.csv", "w", encoding="utf-8", newline="") as fh:
        trace.write_csv(fh)
    target = -2.0 / (1.0 - cfg.fractional.alpha)
    report = {"command": "decay-fit", "config": cfg.to_dict(), "target_exponent": target}
    try:
        window = default_decay_window(trace)
        fit = fit_decay(trace, window)
        comp_slope = compensated_slope(trace, window, -target)
        report.update(
            {
                "window": list(window),
                "exponent": fit.exponent,
                "r_squared": fit.r_squared,
                "compensated_slope": comp_slope,
            }
        )
        code = 0
    except ValueError as exc:
        report["error"] = str(exc)
        code = 4
    _write_json(out / "decay_fit.json", report)
    return code


def verify_fractional_report(fp: FractionalParams, K: int, T: float = 10.0, dt: float = 1e-3) -> dict:
    """Closed-form integral suite plus diffusive-vs-convolution comparisons."""
    with warnings.catch_warnings():
        # the achieved error is part of the report
        warnings.simplefilter("ignore")
        rule = build_xi_quadrature(fp, K)
    pairs = []
    for a in np.logspace(-1, 4, 10):
        for eta in (0.0, 0.05):
            lam = a - eta
            ref = closed_form_integrals(FractionalParams(fp.alpha, eta), lam)
            got = rule_integrals(rule, FractionalParams(fp.alpha, eta), lam)
            pairs.append(
                {
                    "lambda": lam,
                    "eta": eta,
                    "J2_rel_error": abs(got.J2 - ref.J2) / ref.J2,
                    "J3_rel_error": abs(got.J3 - ref.J3) / ref.J3,
                }
            )
    ref = closed_form_integrals(fp, 0.0)
    got = rule_integrals(rule, fp, 0.0)
    t = np.arange(int(round(T / dt)) + 1) * dt
    f = np.sin(t)
    oracle = caputo_oracle(f, fp, dt)
    diff = diffusive_response(f, fp, rule, dt)
    rep_err = float(np.linalg.norm(diff - oracle) / np.linalg.norm(oracle))
    lin_fp = FractionalParams(fp.alpha, 0.0)
    lin_err = float(np.max(np.abs(caputo_oracle(t, lin_fp, dt)[1:] - caputo_linear_exact(t[1:], lin_fp))))
    return {
        "K": rule.count,
        "Xi": rule.truncation,
        "rule_error_C": rule.achieved_error,
        "C_reference": ref.C,
        "C_rule": got.C,
        "D_reference": ref.D,
        "D_rule": got.D,
        "closed_form_pairs": pairs,
        "J_max_rel_error": max(max(p["J2_rel_error"], p["J3_rel_error"]) for p in pairs),
        "sine_relative_l2_error": rep_err,
        "linear_caputo_max_error": lin_err,
    }


def cmd_verify_fractional(cfg: RunConfig, out: Path, args) -> int:
    report = {"command": "verify-fractional", "config": cfg.to_dict()}
    report.update(verify_fractional_report(cfg.fractional, args.nodes))
    _write_json(out / "verify_fractional.json", report)
    return 0


def _sweep_one(job) -> tuple[str, int]:
    ini, sub = job
    cfg = RunConfig.from_ini(ini)
    sub = Path(sub)
    sub.mkdir(parents=True, exist_ok=True)
    return sub.name, run_simulation(cfg, sub)


def cmd_sweep(cfg: RunConfig, out: Path, args) -> int:
    jobs = []
    for a in cfg.sweep.alphas:
        for eta in cfg.sweep.etas:
            run = cfg.replace(fractional=FractionalParams(a, eta))
            jobs.append((run.to_ini(), str(out / f"alpha{a!r}_eta{eta!r}")))
    workers = args.workers or min(len(jobs), os.cpu_count() or 1)
    if workers <= 1:
        results = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    index = {"command": "sweep", "config": cfg.to_dict(), "runs": [{"dir": d, "exit_code": c} for d, c in results]}
    _write_json(out / "sweep.json", index)
    return max(c for _, c in results)


COMMANDS = {
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
    "resolvent": cmd_resolvent,
    "decay-fit": cmd_decay_fit,
    "verify-fractional": cmd_verify_fractional,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file overlaid on the preset")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./piezoheat-out)")
    common.add_argument("--preset", choices=sorted(PRESETS), help=f"base configuration (default {DEFAULT_PRESET})")
    common.add_argument("--seed", type=int, help="override [run] seed")
    parser = argparse.ArgumentParser(prog="piezoheat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="time integration; trace.csv + summary.json")
    p = sub.add_parser("spectrum", parents=[common], help="dense eigenvalues of the generator")
    p.add_argument("--kernel-study", action="store_true", help="add the min |eigenvalue| vs xi-rule study")
    p = sub.add_parser("resolvent", parents=[common], help="resolvent norm at [spectral] lambda and its profile")
    p.add_argument("--point-only", action="store_true", help="skip the frequency profile")
    sub.add_parser("decay-fit", parents=[common], help="simulate and fit the energy decay exponent")
    p = sub.add_parser("verify-fractional", parents=[common], help="quadrature and oracle checks")
    p.add_argument("--nodes", type=int, default=256, help="xi-rule node count (default 256)")
    p = sub.add_parser("sweep", parents=[common], help="simulate over [sweep] alphas x etas")
    p.add_argument("--workers", type=int, default=0, help="process count (default: one per CPU)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        out = _out_dir(args)
        return COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"piezoheat: config error: {exc}", file=sys.stderr)
        return 2
    except (DimensionError, QuadratureError, SimulationError) as exc:
        print(f"piezoheat: {args.command} failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
