"""Command-line interface: ``hjbwaves {spec,profile,verify,simulate,sweep}``.

Options come from three layers, later ones winning: built-in defaults, a
``key = value`` file given by ``--config``, and explicit flags.  Reports are
JSON, tabular data is CSV with ``%.17g`` numbers.  Output goes to ``--output``
when given, else to ``$HJBWAVES_OUTPUT_DIR/<command>.<ext>`` when that
variable is set, else to stdout.

Exit codes: 0 success, 2 invalid input, 3 no traveling wave, 4 numerical
failure (including a failed verification check).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    ConsistencyError,
    DomainError,
    InvalidLimitsError,
    NoWaveError,
    PreconditionError,
    SchemeError,
)
from .model import ModelParams, Variant
from .montecarlo import (
    THETA_FLOOR,
    CARAUtility,
    PolicyField,
    SDEConfig,
    cara_constant_oracle,
    policy_from_wave,
    simulate,
)
from .pde import check_bounds, estimate_speed, residual_constant, run_wave
from .riccati import synth_terminal_utility
from .waves import StepControl, compute_wave_spec, find_phi_roots, integrate_profile, validate_connection

OUTPUT_ENV = "HJBWAVES_OUTPUT_DIR"
PROFILE_HEADER = ["xi", "z", "v", "theta"]
SWEEP_HEADER = [
    "variant", "omega", "alpha", "beta", "m",
    "v_left", "v_right", "c", "K0", "root_count", "wave_exists", "status",
]

EXIT_OK, EXIT_INVALID, EXIT_NO_WAVE, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    """Bad option value or config file entry."""


# --------------------------------------------------------------------------
# option handling


class _Options:
    """Collects option defaults so they can be layered under a config file."""

    def __init__(self):
        self.defaults: dict[str, dict] = {}
        self.types: dict[str, dict] = {}
        self.choices: dict[str, dict] = {}

    def add(self, parser, cmd, flag, default, help, type=float, **kw):
        dest = flag.lstrip("-").replace("-", "_")
        self.defaults.setdefault(cmd, {})[dest] = default
        self.types.setdefault(cmd, {})[dest] = type
        if "choices" in kw:
            self.choices.setdefault(cmd, {})[dest] = kw["choices"]
        shown = "none" if default is None else default
        parser.add_argument(
            flag, dest=dest, type=type, default=argparse.SUPPRESS, help=f"{help} (default: {shown})", **kw
        )


def _range_arg(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected lo:hi:n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if n < 1:
        raise argparse.ArgumentTypeError("n must be positive")
    return lo, hi, n


def _interval_arg(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    return float(parts[0]), float(parts[1])


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers: {exc}") from None


def _variant_arg(text: str) -> str:
    try:
        return Variant(text).value
    except ValueError:
        raise argparse.ArgumentTypeError(f"variant must be one of {[v.value for v in Variant]}") from None


def build_parser() -> tuple[argparse.ArgumentParser, _Options]:
    opts = _Options()
    parser = argparse.ArgumentParser(
        prog="hjbwaves",
        description="Traveling waves of the risk-aversion equation: construction, verification, simulation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, cmd, limits=True):
        p.add_argument("--config", default=None, help="key = value file; flags override its entries")
        p.add_argument("-o", "--output", default=None, help=f"output file (default: ${OUTPUT_ENV}/{cmd}.* or stdout)")
        opts.add(p, cmd, "--variant", "simple", "model variant: simple, quadratic or general", type=_variant_arg)
        opts.add(p, cmd, "--omega", 1.0, "model constant omega > 0")
        opts.add(p, cmd, "--alpha", 0.0, "general model: alpha")
        opts.add(p, cmd, "--beta", 0.0, "general model: beta")
        opts.add(p, cmd, "--m", 2.0, "general model: exponent m > 1")
        if limits:
            opts.add(p, cmd, "--v-left", 2.0, "limit of the profile as xi -> -inf")
            opts.add(p, cmd, "--v-right", 0.5, "limit of the profile as xi -> +inf")

    def profile_opts(p, cmd):
        opts.add(p, cmd, "--eps-trunc", 1e-8, "stop each leg this close to its limit")
        opts.add(p, cmd, "--xi-max", 200.0, "maximal |xi| of the integration")
        opts.add(p, cmd, "--max-step", 0.005, "maximal solver step, bounds the sample spacing")

    p = sub.add_parser("spec", help="wave speed, K0, roots of G and connection verdict (JSON)")
    common(p, "spec")
    opts.add(p, "spec", "--search", None, "root search interval lo:hi (default: limits widened 10x)", type=_interval_arg)

    p = sub.add_parser("profile", help="sampled wave profile (CSV: xi,z,v,theta)")
    common(p, "profile")
    profile_opts(p, "profile")

    p = sub.add_parser("verify", help="evolve the profile with the PDE scheme and check speed, identity and bounds (JSON)")
    common(p, "verify")
    profile_opts(p, "verify")
    opts.add(p, "verify", "--n-cells", 2048, "number of grid cells", type=int)
    opts.add(p, "verify", "--travel-widths", 10.0, "horizon as layer travel in transition widths")
    opts.add(p, "verify", "--pad-widths", 10.0, "domain padding on each side in transition widths")
    opts.add(p, "verify", "--cfl", 0.45, "fraction of the diffusive step limit")
    opts.add(p, "verify", "--level", None, "crossing level for the speed fit (default: mean of the limits)")
    opts.add(p, "verify", "--snapshots", 101, "number of stored time levels", type=int)

    p = sub.add_parser("simulate", help="Monte Carlo comparison of the wave policy with constant policies (JSON)")
    common(p, "simulate")
    profile_opts(p, "simulate")
    opts.add(p, "simulate", "--x0", 0.0, "initial state")
    opts.add(p, "simulate", "--t0", 0.0, "initial time")
    opts.add(p, "simulate", "--T", 1.0, "terminal time")
    opts.add(p, "simulate", "--n-steps", 1000, "Euler-Maruyama steps", type=int)
    opts.add(p, "simulate", "--n-paths", 100_000, "number of paths", type=int)
    opts.add(p, "simulate", "--seed", 0, "64-bit seed", type=int)
    opts.add(p, "simulate", "--threads", 1, "worker threads (results do not depend on it)", type=int)
    opts.add(p, "simulate", "--thetas", "0.25,0.5,0.75,1", "constant policies to compare", type=str)
    opts.add(p, "simulate", "--utility", "wave", "terminal utility: wave (synthesized from the profile) or cara",
             type=str, choices=["wave", "cara"])
    opts.add(p, "simulate", "--lam", 1.0, "risk aversion of the cara utility")

    p = sub.add_parser("sweep", help="root counts and wave existence over a parameter grid (CSV)")
    common(p, "sweep", limits=False)
    opts.add(p, "sweep", "--over", "ck", "grid type: ck (speed and K0) or limits (v_left and v_right)",
             type=str, choices=["ck", "limits"])
    opts.add(p, "sweep", "--c-range", "-0.12:-0.06:7", "speeds lo:hi:n; write --c-range=LO:HI:N when LO is negative", type=_range_arg)
    opts.add(p, "sweep", "--k0-range", "0.1:0.1:1", "K0 values lo:hi:n", type=_range_arg)
    opts.add(p, "sweep", "--v-left-range", "1.5:3:4", "left limits lo:hi:n", type=_range_arg)
    opts.add(p, "sweep", "--v-right-range", "0.2:0.8:4", "right limits lo:hi:n", type=_range_arg)
    opts.add(p, "sweep", "--search", "0.01:100", "root search interval lo:hi", type=_interval_arg)
    return parser, opts


def read_config(path: str) -> dict[str, str]:
    entries = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        entries[key.lstrip("-").replace("-", "_")] = value
    return entries


def resolve(args: argparse.Namespace, opts: _Options) -> dict:
    """Merge defaults, config file and explicit flags into one mapping."""
    cmd = args.command
    defaults, types = opts.defaults[cmd], opts.types[cmd]
    merged = {}
    for key, value in defaults.items():
        # string defaults of typed options go through the same converter
        merged[key] = types[key](value) if isinstance(value, str) and types[key] is not str else value
    if args.config:
        for key, value in read_config(args.config).items():
            if key not in defaults:
                raise UsageError(f"unknown config key {key!r} for command {cmd!r}")
            try:
                merged[key] = types[key](value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
            allowed = opts.choices.get(cmd, {}).get(key)
            if allowed is not None and merged[key] not in allowed:
                raise UsageError(f"config key {key!r} must be one of {allowed}")
    for key in defaults:
        if hasattr(args, key):
            merged[key] = getattr(args, key)
    return merged


def params_from(cfg: dict) -> ModelParams:
    variant = Variant(cfg["variant"])
    if variant is Variant.GENERAL:
        return ModelParams.general(cfg["omega"], cfg["m"], cfg["alpha"], cfg["beta"])
    if variant is Variant.QUADRATIC_DRIFT:
        return ModelParams.quadratic_drift(cfg["omega"])
    return ModelParams.simple(cfg["omega"])


# --------------------------------------------------------------------------
# commands


def _clean(obj):
    """Plain JSON types; non-finite numbers become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _spec_block(spec) -> dict:
    p = spec.params
    return {
        "variant": p.variant.value,
        "omega": p.omega,
        "alpha": p.alpha,
        "beta": p.beta,
        "m": p.m,
        "v_left": spec.v_left,
        "v_right": spec.v_right,
        "c": spec.c,
        "K0": spec.K0,
        "z_left": spec.z_left,
        "z_right": spec.z_right,
        "fprime_left": spec.fprime_left,
        "fprime_right": spec.fprime_right,
        "direction": spec.direction.value,
    }


def _wave(cfg: dict):
    spec = compute_wave_spec(params_from(cfg), cfg["v_left"], cfg["v_right"])
    ctl = StepControl(max_step=cfg["max_step"])
    profile = integrate_profile(spec, eps_trunc=cfg["eps_trunc"], xi_max=cfg["xi_max"], step_control=ctl)
    return spec, profile


def cmd_spec(cfg: dict) -> tuple[dict, int]:
    spec = compute_wave_spec(params_from(cfg), cfg["v_left"], cfg["v_right"], validate=False)
    lo, hi = sorted((spec.v_left, spec.v_right))
    search = cfg["search"] or (lo / 10.0, 10.0 * hi)
    roots = find_phi_roots(spec.params, spec.c, spec.K0, search)
    report = validate_connection(spec, raise_on_failure=False)
    out = _spec_block(spec)
    out["search_interval"] = list(search)
    out["roots"] = [{"v": r.v, "g_prime_sign": r.g_prime_sign} for r in roots]
    out["validation"] = {"valid": report.valid, "failures": report.failures}
    return out, EXIT_OK if report.valid else EXIT_NO_WAVE


def cmd_profile(cfg: dict) -> tuple[str, int]:
    _, profile = _wave(cfg)
    buf = io.StringIO()
    buf.write(",".join(PROFILE_HEADER) + "\n")
    for row in zip(profile.xi, profile.z, profile.v, profile.theta):
        buf.write(",".join("%.17g" % x for x in row) + "\n")
    return buf.getvalue(), EXIT_OK


def cmd_verify(cfg: dict) -> tuple[dict, int]:
    spec, profile = _wave(cfg)
    level = cfg["level"] if cfg["level"] is not None else 0.5 * (spec.v_left + spec.v_right)
    run = run_wave(
        profile,
        n_cells=cfg["n_cells"],
        travel_widths=cfg["travel_widths"],
        pad_widths=cfg["pad_widths"],
        cfl_safety=cfg["cfl"],
        n_snapshots=cfg["snapshots"],
    )
    ev = run.evolution
    c_meas, fit_resid = estimate_speed(ev, level)
    rel = abs(c_meas - spec.c) / abs(spec.c)
    resid = residual_constant(profile, spec)
    lo, hi = sorted((spec.v_left, spec.v_right))
    om = spec.params.omega
    bounds = check_bounds(ev, om * lo, om * hi, om)
    checks = {"speed": rel < 0.02, "identity": resid < 1e-6, "bounds": bounds.passed}
    out = {
        "spec": _spec_block(spec),
        "grid": {"x_lo": ev.grid.x_lo, "x_hi": ev.grid.x_hi, "n_cells": ev.grid.n_cells, "dx": ev.grid.dx},
        "horizon_tau": float(ev.tau[-1]),
        "transition_width": run.width,
        "n_steps": ev.n_steps,
        "cfl_used": ev.cfl_used,
        "upwind_used": ev.upwind_used,
        "level": level,
        "c_measured": c_meas,
        "c_relative_error": rel,
        "fit_residual": fit_resid,
        "max_error_vs_exact": run.max_error(),
        "residual_constant": resid,
        "bounds": {
            "passed": bounds.passed,
            "lower": bounds.lower,
            "upper": bounds.upper,
            "tol": bounds.tol,
            "observed_min": bounds.observed_min,
            "observed_max": bounds.observed_max,
        },
        "checks": checks,
        "passed": all(checks.values()),
    }
    return out, EXIT_OK if out["passed"] else EXIT_NUMERIC


def _result_block(res) -> dict:
    return {
        "policy": res.policy,
        "mean_utility": res.mean_utility,
        "std_error": res.std_error,
        "n_paths": res.n_paths,
        "flagged_paths": res.flagged_paths,
        "mean_terminal": res.mean_terminal,
        "var_terminal": res.var_terminal,
    }


def cmd_simulate(cfg: dict) -> tuple[dict, int]:
    spec, profile = _wave(cfg)
    thetas = _float_list(cfg["thetas"])
    sde = SDEConfig(
        spec.params,
        x0=cfg["x0"],
        T=cfg["T"],
        n_paths=cfg["n_paths"],
        t0=cfg["t0"],
        n_steps=cfg["n_steps"],
        seed=cfg["seed"],
    )
    if cfg["utility"] == "cara":
        utility = CARAUtility(cfg["lam"])
    else:
        utility = synth_terminal_utility(profile)
    threads = cfg["threads"]
    wave = simulate(sde, policy_from_wave(spec, profile, sde.T), utility, threads)
    results = [_result_block(wave)]
    comparisons = []
    for th in thetas:
        res = simulate(sde, PolicyField.constant(th), utility, threads)
        block = _result_block(res)
        block["theta"] = th
        if cfg["utility"] == "cara":
            exact = cara_constant_oracle(spec.params, th, cfg["lam"], sde.x0, sde.T - sde.t0)
            block["oracle"] = exact
            block["oracle_z"] = (res.mean_utility - exact) / res.std_error
        results.append(block)
        se = math.hypot(wave.std_error, res.std_error)
        comparisons.append(
            {
                "policy": res.policy,
                "difference": wave.mean_utility - res.mean_utility,
                "combined_std_error": se,
                "z": (wave.mean_utility - res.mean_utility) / se if se > 0 else None,
            }
        )
    out = {
        "spec": _spec_block(spec),
        "config": {
            "x0": sde.x0,
            "t0": sde.t0,
            "T": sde.T,
            "n_steps": sde.n_steps,
            "n_paths": sde.n_paths,
            "seed": sde.seed,
            "utility": cfg["utility"],
            "lam": cfg["lam"] if cfg["utility"] == "cara" else None,
        },
        "theta_floor": THETA_FLOOR,
        "results": results,
        "wave_vs_constant": comparisons,
    }
    return out, EXIT_OK


def _grid(r) -> np.ndarray:
    lo, hi, n = r
    return np.linspace(lo, hi, n)


def _sweep_row(params: ModelParams, **values) -> dict:
    row = {"variant": params.variant.value, "omega": params.omega, "alpha": params.alpha,
           "beta": params.beta, "m": params.m}
    row.update({"v_left": math.nan, "v_right": math.nan, "c": math.nan, "K0": math.nan,
                "root_count": "", "wave_exists": False, "status": "ok"})
    row.update(values)
    return row


def _connection_for(params: ModelParams, roots) -> tuple[float, float] | None:
    """First pair of adjacent roots straddling 1 that a wave connects."""
    vs = [r.v for r in roots]
    for a, b in zip(vs, vs[1:]):
        if not a <= 1.0 < b:
            continue
        for left, right in ((a, b), (b, a)):
            try:
                spec = compute_wave_spec(params, left, right, validate=False)
            except InvalidLimitsError:
                continue
            if validate_connection(spec, raise_on_failure=False).valid:
                return left, right
    return None


def cmd_sweep(cfg: dict) -> tuple[str, int]:
    params = params_from(cfg)
    rows = []
    if cfg["over"] == "ck":
        for K0 in _grid(cfg["k0_range"]):
            for c in _grid(cfg["c_range"]):
                try:
                    roots = find_phi_roots(params, c, K0, cfg["search"])
                except (PreconditionError, DomainError) as exc:
                    rows.append(_sweep_row(params, c=c, K0=K0, status=f"error: {exc}"))
                    continue
                except NoWaveError as exc:
                    rows.append(_sweep_row(params, c=c, K0=K0, status=f"degenerate: {exc}"))
                    continue
                conn = _connection_for(params, roots)
                extra = {"v_left": conn[0], "v_right": conn[1]} if conn else {}
                rows.append(_sweep_row(params, c=c, K0=K0, root_count=len(roots), wave_exists=conn is not None, **extra))
    else:
        for vl in _grid(cfg["v_left_range"]):
            for vr in _grid(cfg["v_right_range"]):
                try:
                    spec = compute_wave_spec(params, vl, vr, validate=False)
                except InvalidLimitsError as exc:
                    rows.append(_sweep_row(params, v_left=vl, v_right=vr, status=f"invalid: {exc}"))
                    continue
                lo, hi = sorted((vl, vr))
                try:
                    roots = find_phi_roots(params, spec.c, spec.K0, (lo / 10.0, 10.0 * hi))
                    valid = validate_connection(spec, raise_on_failure=False).valid
                except NoWaveError as exc:
                    rows.append(_sweep_row(params, v_left=vl, v_right=vr, c=spec.c, K0=spec.K0,
                                           status=f"degenerate: {exc}"))
                    continue
                rows.append(_sweep_row(params, v_left=vl, v_right=vr, c=spec.c, K0=spec.K0,
                                       root_count=len(roots), wave_exists=valid))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for row in rows:
        writer.writerow([_cell(row[k]) for k in SWEEP_HEADER])
    return buf.getvalue(), EXIT_OK


def _cell(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


COMMANDS = {
    "spec": (cmd_spec, "json"),
    "profile": (cmd_profile, "csv"),
    "verify": (cmd_verify, "json"),
    "simulate": (cmd_simulate, "json"),
    "sweep": (cmd_sweep, "csv"),
}


def _emit(text: str, command: str, ext: str, output: str | None):
    target = output
    if target is None and os.environ.get(OUTPUT_ENV):
        target = str(Path(os.environ[OUTPUT_ENV]) / f"{command}.{ext}")
    if target is None:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            # reader went away (e.g. piped into head); not an error for us
            sys.stdout = open(os.devnull, "w")
        return
    path = Path(target)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser, opts = build_parser()
    args = parser.parse_args(argv)
    fn, ext = COMMANDS[args.command]
    try:
        cfg = resolve(args, opts)
        result, code = fn(cfg)
    except (UsageError, InvalidLimitsError, PreconditionError, DomainError) as exc:
        print(f"hjbwaves {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NoWaveError as exc:
        print(f"hjbwaves {args.command}: no traveling wave: {exc}", file=sys.stderr)
        return EXIT_NO_WAVE
    except (SchemeError, ConsistencyError) as exc:
        print(f"hjbwaves {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = json.dumps(_clean(result), indent=2, allow_nan=False) + "\n" if ext == "json" else result
    _emit(text, args.command, ext, args.output)
    if code == EXIT_NO_WAVE:
        print(f"hjbwaves {args.command}: no traveling wave for these limits", file=sys.stderr)
    elif code == EXIT_NUMERIC:
        print(f"hjbwaves {args.command}: verification failed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
