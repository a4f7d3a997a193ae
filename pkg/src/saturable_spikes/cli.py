"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 domain error (for example
a point outside Omega), 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .autonomous import SCHEMA_VERSION, save_ground_state, solve_ground_state
from .config import PRESETS, load_config, preset
from .diagnostics import (concentration_report, write_reports_jsonl,
                          write_summary_csv)
from .epssolver import (continuation_sweep, initial_guess, penalization_active,
                        save_solution, solution_checks, solve_penalized)
from .errors import ConfigError, DomainError, NotInOmega, SolverError
from .sigma import (SigmaLandscape, grid_points, write_necessary_report,
                    write_sigma_map)

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_SOLVER = 0, 1, 2, 3


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _say(msg):
    print(msg, flush=True)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_groundstate(cfg, out: Path, args):
    y = cfg.point("groundstate", "y", np.zeros(cfg.dim))
    vy, sy = float(cfg.V.eval(y)), float(cfg.s.eval(y))
    if vy * sy >= 1.0:
        raise NotInOmega(y, vy, sy)
    gs = solve_ground_state(vy, sy, dim=cfg.dim, opts=cfg.gs_opts, y=y)
    save_ground_state(gs, out / "groundstate.csv", out / "groundstate.json")
    scale = gs.gradsq + gs.l2sq
    _say(f"V(y) = {vy:.10g}  s(y) = {sy:.10g}  u(0) = {gs.amplitude:.12g}")
    _say(f"energy = {gs.energy:.12g}  |Q|^2 = {gs.l2sq:.12g}  "
         f"|grad Q|^2 = {gs.gradsq:.12g}")
    _say(f"nehari = {gs.nehari:.3e} (relative {gs.nehari / scale:.3e})  "
         f"pohozaev = {gs.pohozaev_residual:.3e} "
         f"(relative {gs.pohozaev_residual / scale:.3e})")
    if args.check:
        fine = solve_ground_state(vy, sy, dim=cfg.dim,
                                  opts=cfg.gs_opts.refined(2), y=y)
        check = {"n_grid_fine": fine.profile.r.size - 1,
                 "energy_delta": fine.energy - gs.energy,
                 "l2sq_delta": fine.l2sq - gs.l2sq,
                 "amplitude_delta": fine.amplitude - gs.amplitude,
                 "pohozaev_fine": fine.pohozaev_residual}
        meta = gs.metadata()
        meta["check"] = check
        _dump(meta, out / "groundstate.json")
        _say(f"refinement: energy delta {check['energy_delta']:.3e}, "
             f"|Q|^2 delta {check['l2sq_delta']:.3e}")
    return EXIT_OK


def cmd_sigma_map(cfg, out: Path, args):
    sec = cfg.section("sigma_map")
    lower, upper = sec.vector("lower"), sec.vector("upper")
    counts = [int(c) for c in sec.vector("points")]
    if not len(lower) == len(upper) == len(counts) == cfg.dim:
        raise ConfigError(f"[sigma_map]: lower, upper and points need "
                          f"{cfg.dim} entries each")
    land = SigmaLandscape(cfg.V, cfg.s, cfg.gs_opts)
    pts = grid_points(lower, upper, counts)
    samples = land.sample_many(pts, threads=args.threads)
    write_sigma_map(samples, out / "sigma_map.csv")
    inside = [smp for smp in samples if smp.in_omega]
    _say(f"{len(samples)} points, {len(inside)} in Omega, "
         f"{land.cache_size()} distinct ground states")
    if not inside:
        raise DomainError("every sample point lies outside Omega = {V s < 1}")
    failed = [smp for smp in inside if smp.error]
    for smp in failed:
        _say(f"warning: y = {smp.y.tolist()}: {smp.error}")
    best = min((smp for smp in inside if not smp.error),
               key=lambda smp: smp.sigma, default=None)
    summary = {"schema_version": SCHEMA_VERSION,
               "grid_minimum": None if best is None else {
                   "y": best.y.tolist(), "sigma": best.sigma}}
    if sec.bool("search", False):
        seed = cfg.point("sigma_map", "seed",
                         best.y if best is not None else cfg.pen.z)
        res = land.find_sigma_minimum(seed, (cfg.pen.z, cfg.pen.r))
        summary["search"] = {"seed": np.asarray(seed).tolist(),
                             "point": res.point.tolist(), "sigma": res.sigma,
                             "grad": res.grad.tolist(),
                             "iterations": res.iterations,
                             "converged": res.converged,
                             "on_boundary": res.on_boundary,
                             "sigma_history": [h[1] for h in res.history]}
        _say(f"descent: {res.point.tolist()} sigma = {res.sigma:.12g} "
             f"after {res.iterations} steps")
    _dump(summary, out / "sigma_minimum.json")
    return EXIT_OK


def cmd_solve_eps(cfg, out: Path, args):
    prob = cfg.problem()
    gs = _limit_ground_state(cfg)
    grid = prob.build_grid()
    sol = solve_penalized(prob, initial_guess(prob, grid, ground_state=gs),
                          grid)
    save_solution(sol, out / "solution.csv", out / "solution.json")
    checks = solution_checks(sol)
    meta = json.loads((out / "solution.json").read_text())
    meta["checks"] = checks
    _dump(meta, out / "solution.json")
    _say(f"eps = {sol.eps:g}: {sol.iterations} iterations ({sol.method}), "
         f"residual {sol.residual:.2e}, max u = {sol.max_value:.10g}")
    _say(f"rescaled energy = {sol.rescaled_energy:.10g}, penalization "
         f"{'active' if penalization_active(sol) else 'inactive'}")
    return EXIT_OK


def _limit_ground_state(cfg):
    z = cfg.pen.z
    vz, sz = float(cfg.V.eval(z)), float(cfg.s.eval(z))
    if vz * sz >= 1.0:
        raise NotInOmega(np.asarray(z), vz, sz)
    return solve_ground_state(vz, sz, dim=cfg.dim, opts=cfg.gs_opts,
                              y=np.asarray(z))


def cmd_sweep(cfg, out: Path, args):
    template = cfg.problem(cfg.eps_list[0])
    for e in cfg.eps_list[1:]:
        cfg.problem(e)  # validate every member up front
    gs = _limit_ground_state(cfg)
    sweep = continuation_sweep(template, cfg.eps_list, ground_state=gs)
    if not sweep.solutions:
        raise SolverError(f"sweep failed at the first eps: {sweep.failure}")
    rows, trends = concentration_report(sweep, cfg.pen.z, gs.energy)
    write_reports_jsonl(rows, out / "reports.jsonl")
    write_summary_csv(rows, out / "sweep_summary.csv")
    summary = {"schema_version": SCHEMA_VERSION,
               "z": list(cfg.pen.z), "sigma_z": gs.energy,
               "failure": sweep.failure, "trends": trends.to_dict(),
               "entries": [{"eps": r.epsilon, "x_eps": r.x_eps,
                            "max_value": r.max_value,
                            "rescaled_energy": r.rescaled_energy,
                            "penalization_active": r.penalization_active}
                           for r in rows]}
    _dump(summary, out / "sweep_summary.json")
    for r in rows:
        _say(f"eps = {r.epsilon:<8g} |x_eps - z| = {r.dist:.3e}  "
             f"max = {r.max_value:.8g}  E/eps^N = {r.rescaled_energy:.8g}  "
             f"mu2 = {r.mu2:.5g}  penalized = {r.penalization_active}")
    _say(f"Sigma(z) = {gs.energy:.10g}; trends: {trends.to_dict()}")
    if sweep.failure:
        _say(f"sweep stopped early: {sweep.failure}")
        return EXIT_SOLVER
    return EXIT_OK


def cmd_check_necessary(cfg, out: Path, args):
    z = cfg.point("check_necessary", "z", cfg.pen.z)
    land = SigmaLandscape(cfg.V, cfg.s, cfg.gs_opts)
    rep = land.necessary_condition_report(z)
    write_necessary_report(rep, out / "necessary.json")
    _say(f"z = {z.tolist()}: residual {rep.residual_norm:.3e} "
         f"(relative {rep.relative_residual:.3e}), colinearity defect "
         f"{rep.colinearity_defect:.3e}, opposite = {rep.opposite_orientation}")
    return EXIT_OK


COMMANDS = {
    "groundstate": cmd_groundstate,
    "sigma-map": cmd_sigma_map,
    "solve-eps": cmd_solve_eps,
    "sweep": cmd_sweep,
    "check-necessary": cmd_check_necessary,
}


def build_parser():
    p = argparse.ArgumentParser(
        prog="saturable-spikes",
        description="Ground states, concentration function and penalized "
                    "spike solutions for a saturable Schroedinger equation.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("command", choices=sorted(COMMANDS) + ["show-preset"])
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="run configuration")
    src.add_argument("--preset", choices=sorted(PRESETS),
                     help="use a built-in configuration")
    p.add_argument("--out", metavar="DIR", default=".",
                   help="output directory (created if missing)")
    p.add_argument("--check", action="store_true",
                   help="groundstate: also solve on a refined grid")
    p.add_argument("--threads", metavar="K", type=int, default=1,
                   help="sigma-map: worker threads")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "show-preset":
            if not args.preset:
                raise ConfigError("show-preset needs --preset NAME")
            sys.stdout.write(PRESETS[args.preset])
            return EXIT_OK
        if args.config:
            cfg = load_config(args.config)
        elif args.preset:
            cfg = preset(args.preset)
        else:
            raise ConfigError("one of --config PATH or --preset NAME is "
                              "required")
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except SolverError as exc:
        print(f"solver failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
