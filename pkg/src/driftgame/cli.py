"""Command-line front end.

Commands: solve | symmetric | voi | path | mc | deviations | sweep.
Exit codes: 0 ok, 2 invalid input, 3 numerical failure, 4 verification
failure (any pass=false in the requested checks).

Configuration may come from a flat key=value file (--config); command-line
flags override file values.  Every output embeds the artifact version, the
effective parameters and the seed, and all numbers carry 17 significant
digits so outputs are byte-stable and round-trip binary floating point.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .equilibrium import BracketFailure, build_solution, check_qvi
from .model import DomainError, InvalidParameters, ModelParams, belief_to_ratio, \
    ratio_to_belief
from .simulate import Measure, SimConfig, write_trajectory_csv
from .sweeps import DEFAULT_SWEEP_POINTS, SWEEPABLE, SweepSpec, default_sweep_values, \
    run_sweep, sample_path_figure, write_path_csv, write_sweep_csv
from .symmetric import NoConvergence, solve_symmetric, value_of_information
from .verify import deviations_player1, deviations_player2, mc_oracle_suite

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_VERIFICATION = 4

# Hard defaults, applied after file values and flags.
_DEFAULTS = {
    "mu0": -1.0, "mu1": 1.0, "sigma": 0.5, "eps": 0.1, "x": 1.0,
    "seed": 0, "paths": 10_000, "dt": 1e-4, "horizon": 50.0,
    "format": None, "threads": None,
}
_DEFAULT_PI = 0.5
_DEFAULT_PI_PATH = 0.35

_FILE_KEY_TYPES = {
    "mu0": float, "mu1": float, "sigma": float, "eps": float,
    "pi": float, "phi": float, "x": float,
    "seed": int, "paths": int, "dt": float, "horizon": float,
    "threads": int, "format": str, "output": str,
}


class CliError(ValueError):
    pass


# -- 17-significant-digit JSON ----------------------------------------------

def _num(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    if math.isnan(f) or math.isinf(f):
        return "null"
    return f"{f:.17g}"


def dumps17(obj, indent: int = 0) -> str:
    pad = " " * indent
    pad_in = " " * (indent + 2)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (bool, int, float, np.integer, np.floating)):
        return _num(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad_in}{json.dumps(str(k))}: {dumps17(v, indent + 2)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = [f"{pad_in}{dumps17(v, indent + 2)}" for v in seq]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    raise TypeError(f"cannot serialise {type(obj)!r}")


# -- configuration plumbing ---------------------------------------------------

def read_config_file(path: str) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError(f"{path}:{ln}: expected key=value, got {line!r}")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in _FILE_KEY_TYPES:
                raise CliError(f"{path}:{ln}: unknown key {key!r}")
            try:
                values[key] = _FILE_KEY_TYPES[key](val)
            except ValueError as exc:
                raise CliError(f"{path}:{ln}: bad value for {key}: {exc}") from None
    return values


def _effective(args, key, file_vals):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in file_vals:
        return file_vals[key]
    return _DEFAULTS.get(key)


def _resolve(args, default_pi: float):
    """Merge file values and flags into (params, pi, phi, settings)."""
    file_vals = read_config_file(args.config) if args.config else {}
    get = lambda k: _effective(args, k, file_vals)

    pi_flag, phi_flag = getattr(args, "pi", None), getattr(args, "phi", None)
    if pi_flag is not None and phi_flag is not None:
        raise CliError("give exactly one of --pi and --phi, not both")
    if pi_flag is None and phi_flag is None:
        pi_flag, phi_flag = file_vals.get("pi"), file_vals.get("phi")
        if pi_flag is not None and phi_flag is not None:
            raise CliError("config file sets both pi and phi; give exactly one")
    if phi_flag is not None:
        phi = float(phi_flag)
        pi = ratio_to_belief(phi)
    else:
        pi = float(pi_flag) if pi_flag is not None else default_pi
        phi = belief_to_ratio(pi)

    params = ModelParams(mu0=get("mu0"), mu1=get("mu1"), sigma=get("sigma"),
                         eps=get("eps"), x0=get("x"), prior=pi)
    settings = {
        "seed": int(get("seed")),
        "paths": int(get("paths")),
        "dt": float(get("dt")),
        "horizon": float(get("horizon")),
        "threads": get("threads"),
        "format": get("format"),
        "output": getattr(args, "output", None) or file_vals.get("output"),
    }
    if settings["threads"] is None:
        settings["threads"] = os.cpu_count() or 1
    return params, pi, phi, settings


def _metadata(command: str, params: ModelParams, pi: float, phi: float,
              settings: dict, extra: dict | None = None) -> dict:
    meta = {
        "version": __version__,
        "command": command,
        "mu0": params.mu0, "mu1": params.mu1, "sigma": params.sigma,
        "eps": params.eps, "pi": pi, "phi": phi, "x": params.x0,
        "seed": settings["seed"],
    }
    meta.update(extra or {})
    return meta


def _emit(text: str, settings: dict) -> None:
    out = settings.get("output")
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows, metadata) -> str:
    buf = io.StringIO()
    for key, val in metadata.items():
        sval = f"{val:.17g}" if isinstance(val, float) else str(val)
        buf.write(f"# {key}={sval}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(
            f"{v:.17g}" if isinstance(v, float) else str(v) for v in row) + "\n")
    return buf.getvalue()


def _fmt_of(settings: dict, default: str) -> str:
    fmt = settings.get("format") or default
    if fmt not in ("json", "csv"):
        raise CliError(f"format={fmt!r} must be json or csv")
    return fmt


# -- commands -----------------------------------------------------------------

def _cmd_solve(args) -> int:
    params, pi, phi, settings = _resolve(args, _DEFAULT_PI)
    sol = build_solution(params)
    qvi = check_qvi(sol)
    meta = _metadata("solve", params, pi, phi, settings)
    fields = {
        "A": sol.A, "B": sol.B, "a": sol.a, "b": sol.b,
        "beta1": sol.exps.beta1, "beta2": sol.exps.beta2, "delta": sol.delta,
        "C1": sol.C1, "C2": sol.C2, "D1": sol.D1, "D2": sol.D2,
    }
    fmt = _fmt_of(settings, "json")
    if fmt == "json":
        text = dumps17({"metadata": meta, "solution": fields,
                        "qvi": qvi.as_dict()}) + "\n"
    else:
        header = ("mu0", "mu1", "sigma", "eps", "pi", "phi", "x",
                  *fields.keys(), "qvi_pass")
        row = (params.mu0, params.mu1, params.sigma, params.eps, pi, phi,
               params.x0, *fields.values(), qvi.all_pass)
        text = _csv_text(header, [row], {"version": __version__, "command": "solve",
                                         "seed": settings["seed"]})
    _emit(text, settings)
    return EXIT_OK if qvi.all_pass else EXIT_VERIFICATION


def _cmd_symmetric(args) -> int:
    params, pi, phi, settings = _resolve(args, _DEFAULT_PI)
    sym = solve_symmetric(params)
    meta = _metadata("symmetric", params, pi, phi, settings)
    fields = {"As": sym.As, "Bs": sym.Bs, "a": sym.a, "b": sym.b,
              "Dh1": sym.Dh1, "Dh2": sym.Dh2}
    fmt = _fmt_of(settings, "json")
    if fmt == "json":
        text = dumps17({"metadata": meta, "solution": fields}) + "\n"
    else:
        header = ("mu0", "mu1", "sigma", "eps", "pi", "phi", "x", *fields.keys())
        row = (params.mu0, params.mu1, params.sigma, params.eps, pi, phi,
               params.x0, *fields.values())
        text = _csv_text(header, [row], {"version": __version__,
                                         "command": "symmetric",
                                         "seed": settings["seed"]})
    _emit(text, settings)
    return EXIT_OK


def _cmd_voi(args) -> int:
    params, pi, phi, settings = _resolve(args, _DEFAULT_PI)
    n = args.grid
    if n < 1:
        raise CliError(f"--grid {n} must be >= 1")
    pis = np.arange(1, n + 1) / (n + 1)
    curve = value_of_information(params, pis)
    meta = _metadata("voi", params, pi, phi, settings,
                     {"grid": n, "orientation": curve.orientation})
    fmt = _fmt_of(settings, "csv")
    rows = zip(curve.pi.tolist(), curve.value_symmetric.tolist(),
               curve.value_asymmetric.tolist(), curve.difference.tolist())
    if fmt == "csv":
        text = _csv_text(("pi", "value_symmetric", "value_asymmetric",
                          "difference"), rows, meta)
    else:
        text = dumps17({"metadata": meta, "rows": [
            {"pi": a, "value_symmetric": b, "value_asymmetric": c,
             "difference": d} for a, b, c, d in rows]}) + "\n"
    _emit(text, settings)
    return EXIT_OK


def _cmd_path(args) -> int:
    params, pi, phi, settings = _resolve(args, _DEFAULT_PI_PATH)
    config = SimConfig(dt=settings["dt"], horizon=settings["horizon"], n_paths=1,
                       seed=settings["seed"], measure=Measure.PHYSICAL,
                       barrier=1.0)  # barrier replaced by the solve inside
    traj, info = sample_path_figure(params, settings["seed"], config,
                                    path_index=args.path_index)
    meta = _metadata("path", params, pi, phi, settings,
                     {"dt": settings["dt"], "horizon": settings["horizon"],
                      "path_index": args.path_index, "a": info["a"],
                      "b": info["b"], "censored": info["censored"],
                      "columns": args.columns})
    fmt = _fmt_of(settings, "csv")
    if fmt != "csv":
        raise CliError("path only supports --format csv")
    buf = io.StringIO()
    if args.columns == "figure":
        write_path_csv(traj, buf, metadata=meta)
    else:
        write_trajectory_csv(traj, buf, metadata=meta)
    _emit(buf.getvalue(), settings)
    return EXIT_OK


def _cmd_mc(args) -> int:
    params, pi, phi, settings = _resolve(args, _DEFAULT_PI)
    sol = build_solution(params)
    base = dict(dt=settings["dt"], horizon=settings["horizon"],
                n_paths=settings["paths"], seed=settings["seed"],
                barrier=sol.B, lower=sol.A)
    cfg0 = SimConfig(measure=Measure.TILTED0, **base)
    cfg1 = SimConfig(measure=Measure.TILTED1, **base)
    checks = mc_oracle_suite(sol, phi, cfg0, cfg1, threads=settings["threads"])
    meta = _metadata("mc", params, pi, phi, settings,
                     {"paths": settings["paths"], "dt": settings["dt"],
                      "horizon": settings["horizon"]})
    ok = all(c["pass"] for c in checks)
    fmt = _fmt_of(settings, "json")
    if fmt == "json":
        text = dumps17({"metadata": meta, "checks": checks,
                        "all_pass": ok}) + "\n"
    else:
        header = ("check", "phi", "estimate", "stderr", "oracle", "tolerance",
                  "bias_bound", "censored_fraction", "pass")
        rows = [(c["check"], c["phi"], c["estimate"], c["stderr"], c["oracle"],
                 c["tolerance"], c["bias_bound"], c["censored_fraction"],
                 c["pass"]) for c in checks]
        text = _csv_text(header, rows, meta)
    _emit(text, settings)
    return EXIT_OK if ok else EXIT_VERIFICATION


def _cmd_deviations(args) -> int:
    params, pi, phi, settings = _resolve(args, _DEFAULT_PI)
    sol = build_solution(params)
    aprime = np.linspace(0.0, sol.B, args.aprime_points + 2)[1:-1]
    phis = np.linspace(0.0, 2.0 * sol.B, args.phi_points + 1)[1:]
    p1 = deviations_player1(sol, aprime, phis)
    cfg1 = SimConfig(dt=settings["dt"], horizon=settings["horizon"],
                     n_paths=settings["paths"], seed=settings["seed"],
                     measure=Measure.TILTED1, barrier=sol.B, lower=sol.A)
    bprime = [m * sol.B for m in args.bprime_mults]
    p2 = deviations_player2(sol, bprime, phi, cfg1,
                            jump_probs=tuple(args.jump_probs),
                            threads=settings["threads"])
    ok = p1.all_pass and p2.all_pass
    meta = _metadata("deviations", params, pi, phi, settings,
                     {"paths": settings["paths"], "dt": settings["dt"],
                      "horizon": settings["horizon"],
                      "aprime_points": args.aprime_points,
                      "phi_points": args.phi_points,
                      "limitation": p2.limitation})
    fmt = _fmt_of(settings, "json")
    if fmt == "json":
        text = dumps17({"metadata": meta, "player1": p1.as_dicts(),
                        "player2": p2.as_dicts(), "all_pass": ok}) + "\n"
    else:
        header = ("kind", "parameter", "phi", "equilibrium", "deviation",
                  "stderr", "tolerance", "pass", "method")
        rows = [(r["kind"], r["parameter"], r["phi"], r["equilibrium"],
                 r["deviation"],
                 "" if r["stderr"] is None else r["stderr"],
                 r["tolerance"], r["pass"], r["method"])
                for r in p1.as_dicts() + p2.as_dicts()]
        text = _csv_text(header, rows, meta)
    _emit(text, settings)
    return EXIT_OK if ok else EXIT_VERIFICATION


def _cmd_sweep(args) -> int:
    params, pi, phi, settings = _resolve(args, _DEFAULT_PI)
    if args.from_ is not None or args.to is not None:
        if args.from_ is None or args.to is None:
            raise CliError("--from and --to must be given together")
        values = (np.geomspace(args.from_, args.to, args.points) if args.log
                  else np.linspace(args.from_, args.to, args.points))
    else:
        values = default_sweep_values(args.param, args.points)
    result = run_sweep(SweepSpec(parameter=args.param, values=values, base=params))
    meta = _metadata("sweep", params, pi, phi, settings,
                     {"param": args.param, "points": args.points})
    fmt = _fmt_of(settings, "csv")
    rows = [(r.parameter, r.value, r.A, r.B, r.a, r.b, r.status)
            for r in result.rows]
    if fmt == "csv":
        text = _csv_text(("param", "value", "A", "B", "a", "b", "status"),
                         rows, meta)
    else:
        text = dumps17({"metadata": meta, "rows": [
            {"param": p, "value": v, "A": A, "B": B, "a": a, "b": b,
             "status": s} for p, v, A, B, a, b, s in rows]}) + "\n"
    _emit(text, settings)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    g = shared.add_argument_group("model")
    g.add_argument("--mu0", type=float, help="low-regime drift (< 0)")
    g.add_argument("--mu1", type=float, help="high-regime drift (> 0)")
    g.add_argument("--sigma", type=float, help="volatility (> 0)")
    g.add_argument("--eps", type=float, help="stopping premium (> 0)")
    g.add_argument("--pi", type=float, help="prior probability of the high regime")
    g.add_argument("--phi", type=float, help="initial likelihood ratio (alternative to --pi)")
    g.add_argument("--x", type=float, help="initial asset level (> 0)")
    s = shared.add_argument_group("simulation")
    s.add_argument("--seed", type=int, help="64-bit master seed")
    s.add_argument("--paths", type=int, help="number of Monte Carlo paths")
    s.add_argument("--dt", type=float, help="time step")
    s.add_argument("--horizon", type=float, help="censoring horizon")
    o = shared.add_argument_group("output")
    o.add_argument("--config", help="flat key=value configuration file")
    o.add_argument("--output", help="write to this file instead of stdout")
    o.add_argument("--format", choices=("json", "csv"))
    o.add_argument("--threads", type=int,
                   help="worker-thread cap (default: available cores); "
                        "results do not depend on it")

    parser = argparse.ArgumentParser(
        prog="driftgame",
        description="Equilibrium solver and Monte Carlo verifier for the "
                    "asymmetric-information stopping game")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("solve", parents=[shared],
                   help="closed-form thresholds, coefficients and QVI check"
                   ).set_defaults(func=_cmd_solve)
    sub.add_parser("symmetric", parents=[shared],
                   help="benchmark game with symmetric incomplete information"
                   ).set_defaults(func=_cmd_symmetric)

    p = sub.add_parser("voi", parents=[shared], help="value-of-information curve")
    p.add_argument("--grid", type=int, default=99,
                   help="number of interior prior points (default 99)")
    p.set_defaults(func=_cmd_voi)

    p = sub.add_parser("path", parents=[shared],
                       help="one seeded sample path until the stop")
    p.add_argument("--path-index", type=int, default=0)
    p.add_argument("--columns", choices=("full", "figure"), default="full",
                   help="full trajectory columns or (t, PiStar, Gamma)")
    p.set_defaults(func=_cmd_path)

    p = sub.add_parser("mc", parents=[shared],
                       help="Monte Carlo payoffs against the closed forms")
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("deviations", parents=[shared],
                       help="Nash deviation suite for both players")
    p.add_argument("--aprime-points", type=int, default=25)
    p.add_argument("--phi-points", type=int, default=9)
    p.add_argument("--bprime-mults", type=float, nargs="+",
                   default=[0.5, 0.75, 1.25, 1.5, 2.0],
                   help="deviating reflection levels as multiples of B")
    p.add_argument("--jump-probs", type=float, nargs="+", default=[0.5, 1.0])
    p.set_defaults(func=_cmd_deviations)

    p = sub.add_parser("sweep", parents=[shared],
                       help="thresholds under a one-parameter sweep")
    p.add_argument("--param", choices=SWEEPABLE, required=True)
    p.add_argument("--from", dest="from_", type=float)
    p.add_argument("--to", type=float)
    p.add_argument("--points", type=int, default=DEFAULT_SWEEP_POINTS)
    p.add_argument("--log", action="store_true", help="log-spaced grid")
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    # numerical failures first: LinAlgError subclasses ValueError
    except (BracketFailure, NoConvergence, np.linalg.LinAlgError,
            ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidParameters, DomainError, CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
