"""Command-line driver: scale, modes, corrections, nonlinear, minimize, report, validate.

Exit codes: 0 success, 1 validation failure, 2 usage or config error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
from dataclasses import replace
from importlib import metadata

import numpy as np
import scipy

from .config import ConfigError, RunConfig, dumps, load_config, to_csv
from .coupled2d import (
    DEFAULT_COUPLED_FLOW,
    CondensateState,
    chemical_potential,
    default_mode_range,
    energy_F_omega,
    initial_state,
    linear_ground_states,
    minimize_full,
    mode_mass_spectrum,
    shared_grid,
)
from .diagnostics import DiagnosticsError, reconstruct_2d, radial_profile_rows, vortex_report
from .grid import RadialField, RadialGrid, build_grid
from .linear1d import (
    GridTooSmallError,
    ModeProblem,
    linear_sweep,
    mode_window,
    select_nstar,
)
from .nonlinear1d import FlowError, FlowParams, solve_ground_state
from .oscillator import SolvabilityError, asymptotic_gamma, corrections
from .params import ScaledParams, classify_regime
from .tridiag import EigenSolverError
from .validation import CHECKS, Context, run_validation

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
NUMERICAL_ERRORS = (FlowError, EigenSolverError, GridTooSmallError, SolvabilityError,
                    DiagnosticsError, ArithmeticError, RuntimeError)


class UsageError(Exception):
    pass


# -- plumbing ---------------------------------------------------------------

def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def resolve_config(args) -> RunConfig:
    values = load_config(args.config) if args.config else {}
    overrides = {
        "omega": getattr(args, "omega", None),
        "d_omega": getattr(args, "d", None),
        "g_coupling": getattr(args, "g", None),
        "modes_halfwidth": getattr(args, "modes_halfwidth", None),
        "flow_max_iter": getattr(args, "max_iter", None),
        "seed": args.seed,
        "threads": args.threads,
        "out": args.out,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_mapping(values)


class Output:
    """Collects files; everything is written by the coordinator at the end."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def flush(self, stdout_name: str | None = None):
        if self.cfg.out is None:
            if stdout_name is not None:
                sys.stdout.write(self.files[stdout_name])
            return
        os.makedirs(self.cfg.out, exist_ok=True)
        manifest = {
            "command": self.command,
            "config": self.cfg.as_dict(),
            "versions": {
                "artifact": _version(),
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "files": sorted(self.files),
        }
        self.files["manifest.json"] = dumps(manifest) + "\n"
        for name, text in self.files.items():
            path = os.path.join(self.cfg.out, name)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)


def _flow(cfg: RunConfig, base: FlowParams) -> FlowParams:
    changes = {}
    for key, attr in (("flow_dt", "dt"), ("flow_max_iter", "max_iter"),
                      ("flow_tol_energy", "tol_energy"), ("flow_tol_residual", "tol_residual")):
        if getattr(cfg, key) is not None:
            changes[attr] = getattr(cfg, key)
    return replace(base, seed=cfg.seed, **changes)


# -- subcommands --------------------------------------------------------------

def cmd_scale(args) -> int:
    cfg = resolve_config(args)
    s = cfg.scaled()
    out = Output(cfg, "scale")
    doc = {"scaled": s.as_dict(), "regime": classify_regime(s).as_dict()}
    out.add("scale.json", dumps(doc) + "\n")
    out.flush("scale.json")
    return EXIT_OK


def cmd_modes(args) -> int:
    cfg = resolve_config(args)
    s = cfg.scaled(need_g=False)
    rows, results, sel = linear_sweep(s.omega, s.D_Omega, cfg.a_constant, cfg.width_multiplier,
                                      cfg.points_per_width, cfg.threads)
    header = ["n", "R_n", "h_n", "lambda1", "lambda2", "lambda1_asym", "gap_over_sqrtVpp", "n_star"]
    table = [(r.n, r.R_n, r.h_n, r.lambda1, r.lambda2, r.lambda1_asym, r.gap_over_sqrtVpp,
              int(r.n == sel.n_star)) for r in rows]
    out = Output(cfg, "modes")
    out.add("modes.csv", to_csv(header, table))
    out.add("selection.json", dumps(sel.as_dict()) + "\n")
    if args.dump_fields:
        for n, e in results.items():
            out.add(f"fields/g1_{n}.csv", e.g1.to_csv())
            out.add(f"fields/g2_{n}.csv", e.g2.to_csv())
    out.flush("modes.csv")
    return EXIT_OK


def cmd_corrections(args) -> int:
    cfg = resolve_config(args)
    s = cfg.scaled()
    n = args.n if args.n is not None else round(s.omega)
    res = corrections(ModeProblem(n, s.omega, s.D_Omega), s.G)
    out = Output(cfg, "corrections")
    out.add("corrections.json", dumps(res.as_dict()) + "\n")
    out.flush("corrections.json")
    return EXIT_OK


def cmd_nonlinear(args) -> int:
    cfg = resolve_config(args)
    s = cfg.scaled()
    if args.n is not None and args.window:
        raise UsageError("--n and --window are mutually exclusive")
    window = mode_window(s.omega, cfg.a_constant)
    ns = [args.n] if args.n is not None else list(window)
    flow = _flow(cfg, FlowParams())
    rows, table = [], {}
    psi = {}
    for n in ns:
        m = ModeProblem(n, s.omega, s.D_Omega)
        r = solve_ground_state(m, s.G, build_grid(m, cfg.width_multiplier, cfg.points_per_width), flow)
        rows.append((n, r.gamma_n, asymptotic_gamma(m, s.G), r.multiplier, r.el_residual, r.iterations))
        table[n] = r.gamma_n
        psi[n] = r.Psi_n
    out = Output(cfg, "nonlinear")
    out.add("nonlinear.csv", to_csv(["n", "gamma", "gamma_asym", "multiplier", "residual", "iterations"], rows))
    if len(ns) > 1:
        out.add("selection.json", dumps(select_nstar(s.omega, s.D_Omega, window, table).as_dict()) + "\n")
    if args.dump_psi:
        for n, f in psi.items():
            out.add(f"fields/psi_{n}.csv", f.to_csv())
    out.flush("nonlinear.csv")
    return EXIT_OK


def _state_files(state: CondensateState, report, n_star: int) -> dict:
    energy, breakdown = energy_F_omega(state)
    masses, moment = mode_mass_spectrum(state, n_star)
    summary = {
        "I_omega": energy,
        "mu_omega": chemical_potential(state),
        "n_star": n_star,
        "per_mode_masses": {str(k): v for k, v in masses.items()},
        "moment": moment,
        "quartic": breakdown["quartic"],
        "breakdown": {
            "quadratic": breakdown["quadratic"],
            "quartic": breakdown["quartic"],
            "total": breakdown["total"],
            "per_mode": {str(k): v for k, v in breakdown["per_mode"].items()},
        },
        "flow": {
            "iterations": report.iterations,
            "residual": report.residual,
            "halvings": report.halvings,
            "boundary_mass": report.boundary_mass,
        },
        "global_optimality": "not certified (gradient flow); compare I_omega with gamma_n_star",
    }
    files = {
        "summary.json": dumps(summary) + "\n",
        "state.json": dumps({
            "params": state.params.as_dict(),
            "mode_range": list(state.mode_range),
            "grid": {"r_min": state.grid.r_min, "r_max": state.grid.r_max,
                     "n_points": state.grid.n_points},
        }) + "\n",
    }
    for n in state.ns:
        files[f"modes/mode_{int(n)}.csv"] = state.mode(int(n)).to_csv()
    return files


def cmd_minimize(args) -> int:
    cfg = resolve_config(args)
    s = cfg.scaled()
    half = cfg.modes_halfwidth
    mr = default_mode_range(s.omega, half)
    g = shared_grid(s.omega, s.D_Omega, mr, cfg.width_multiplier, cfg.points_per_width)
    et = linear_ground_states(s, mr, g)
    n_star = select_nstar(s.omega, s.D_Omega, mode_window(s.omega, cfg.a_constant),
                          {n: e.lambda1 for n, e in et.items()}).n_star
    init = initial_state(s, mr, g, seed=cfg.seed, eigen_table=et)
    state, report = minimize_full(init, _flow(cfg, DEFAULT_COUPLED_FLOW), eigen_table=et)
    out = Output(cfg, "minimize")
    for name, text in _state_files(state, report, n_star).items():
        out.add(name, text)
    out.flush("summary.json")
    return EXIT_OK


def load_state(directory: str) -> CondensateState:
    try:
        with open(os.path.join(directory, "state.json"), encoding="utf-8") as fh:
            meta = json.load(fh)
    except OSError as exc:
        raise UsageError(f"{directory} is not a minimizer directory: {exc.strerror}") from None
    grid = RadialGrid(float(meta["grid"]["r_min"]), float(meta["grid"]["r_max"]),
                      int(meta["grid"]["n_points"]))
    p = meta["params"]
    params = ScaledParams(float(p["omega"]), float(p["D_Omega"]), float(p["G"]))
    lo, hi = meta["mode_range"]
    modes = []
    for n in range(lo, hi + 1):
        with open(os.path.join(directory, "modes", f"mode_{n}.csv"), encoding="utf-8") as fh:
            f = RadialField.from_csv(fh.read())
        modes.append(f.values.astype(complex))
    return CondensateState(params, (lo, hi), grid, np.array(modes))


def cmd_report(args) -> int:
    cfg = resolve_config(args)
    if not args.input:
        raise UsageError("report needs --in <minimizer directory>")
    state = load_state(args.input)
    et = linear_ground_states(state.params, state.mode_range, state.grid)
    vr = vortex_report(state, et)
    samples = reconstruct_2d(state)
    out = Output(cfg, "report")
    out.add("vortex_report.json", dumps(vr.as_dict()) + "\n")
    out.add("profile.csv", to_csv(["r", "abs_max", "abs_min", "winding"], radial_profile_rows(samples)))
    out.flush("vortex_report.json")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = resolve_config(args)
    only = None
    if args.only:
        only = [x.strip() for item in args.only for x in item.split(",") if x.strip()]
        unknown = [x for x in only if x not in CHECKS]
        if unknown:
            raise UsageError(f"unknown check(s): {', '.join(unknown)}; known: {', '.join(CHECKS)}")
    D = cfg.d_omega if cfg.d_omega is not None else 0.5
    ctx = Context(D_Omega=D, seed=cfg.seed, threads=cfg.threads)
    report = run_validation(only, args.quick, ctx,
                            progress=lambda rec: print(rec.line(), file=sys.stderr, flush=True))
    out = Output(cfg, "validate")
    out.add("validation.json", dumps(report.as_dict()) + "\n")
    out.flush("validation.json")
    return EXIT_OK if report.passed else EXIT_FAIL


# -- parser -------------------------------------------------------------------

def _shared(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--out", help="output directory (default: main output to stdout)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--threads", type=int, help="worker threads for mode sweeps (default 1)")


def _params(p: argparse.ArgumentParser, g: bool = True):
    p.add_argument("--omega", type=float, help="effective rotation omega")
    p.add_argument("--d", type=float, help="D_Omega in (0, 1)")
    if g:
        p.add_argument("--g", type=float, help="coupling G")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="giant-vortex", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scale", help="echo the scaled parameters and regime")
    _shared(p)
    _params(p)
    p.set_defaults(func=cmd_scale)

    p = sub.add_parser("modes", help="linear mode sweep over the window")
    _shared(p)
    _params(p, g=False)
    p.add_argument("--dump-fields", action="store_true", help="write g1/g2 per mode")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("corrections", help="P_n, K'_n, J'_n and the asymptotic energies")
    _shared(p)
    _params(p)
    p.add_argument("--n", type=int, help="mode index (default round(omega))")
    p.set_defaults(func=cmd_corrections)

    p = sub.add_parser("nonlinear", help="per-mode nonlinear ground states")
    _shared(p)
    _params(p)
    p.add_argument("--n", type=int, help="single mode")
    p.add_argument("--window", action="store_true", help="every mode of the window (default)")
    p.add_argument("--dump-psi", action="store_true", help="write Psi_n per mode")
    p.set_defaults(func=cmd_nonlinear)

    p = sub.add_parser("minimize", help="full multi-mode minimization")
    _shared(p)
    _params(p)
    p.add_argument("--modes-halfwidth", type=float, help="mode range round(omega) +- ceil(c sqrt(omega))")
    p.add_argument("--max-iter", type=int, help="flow iteration cap")
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("report", help="giant-vortex diagnostics of a minimizer directory")
    _shared(p)
    p.add_argument("--in", dest="input", help="directory written by 'minimize --out'")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("validate", help="run the acceptance checks")
    _shared(p)
    p.add_argument("--only", action="append", help="comma-separated check names")
    p.add_argument("--quick", action="store_true", help="only the omega <= 100 checks")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
