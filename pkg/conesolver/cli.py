"""Command-line front end: solve, certify-nonradial, verify, sweep and serve."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import BIND, LOG_LEVEL, PORT, WORKERS
from .cone import check_cone, cone_bump, cone_tolerance, make_weight, sample_cone, slice_defect
from .energy import action, ground_state_value, h1_norm, nehari_scale, ps_norm_bound
from .errors import ConfigError, SolverError
from .flow import ground_state_search
from .grid import build_grid
from .models import Candidate, Field
from .operators import OperatorSet, assemble, dump_triplets
from .radial import lift_radial, solve_radial
from .records import read_sweep_rows, write_radial_csv, write_record, write_sweep, write_trace_csv
from .settings import RunConfig, load_config, save_config
from .spectral import alpha1_solve, crosscheck, nonradiality_certificate, threshold_sweep, validate_sweep
from .utils import dumps17, write_json
from .verify import VerifyContext, run_suites

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4
NONRADIAL_FACTOR = 1e3


def _setup(cfg: RunConfig, dump_operators: bool = False) -> Tuple[OperatorSet, Field, Path]:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    save_config(out / "config.json", cfg)
    grid = build_grid(cfg.problem, cfg.nr, cfg.ntheta)
    ops = assemble(grid)
    a = make_weight(grid, cfg.problem.weight, ops)
    logger.info("grid %dx%d, %d unknowns", cfg.nr, cfg.ntheta, ops.n_unknowns)
    if dump_operators:
        dump_triplets(ops, out / "operators.txt")
    return ops, a, out


def _directions(cfg: RunConfig, ops: OperatorSet) -> List[Tuple[str, Field]]:
    grid = ops.grid
    psi = cfg.solve["psi"]
    if psi == "bump":
        return [("bump", cone_bump(grid))]
    if psi == "radial":
        rad = solve_radial(cfg.problem, cfg.n1d, tol=cfg.tolerances.radial_tol)
        return [("radial", lift_radial(grid, rad))]
    seeds = sample_cone(grid, cfg.seed, int(cfg.solve["seed_count"]))
    return [("bump", cone_bump(grid))] + [(f"seed-{i}", s) for i, s in enumerate(seeds)]


def _ps_check(p: float, trace) -> Tuple[float, bool]:
    """Palais-Smale norm bound at the trace's least-residual nontrivial iterate, and whether that iterate obeys it."""
    if trace is None or trace.best is None:
        return float("nan"), False
    _, value, phi_norm, h1 = trace.samples[trace.best_index]
    bound = ps_norm_bound(p, value, phi_norm)
    return bound, bool(h1 <= bound * (1.0 + 1e-9))


def solve_pipeline(cfg: RunConfig, ops: OperatorSet, a: Field) -> Tuple[Candidate, List[Candidate], Dict]:
    """Separatrix search and Newton polish for every direction; returns the least-action candidate."""
    p = cfg.problem.p
    tol = cfg.tolerances
    candidates = ground_state_search(ops, a, p, _directions(cfg, ops), cfg.flow,
                                     bisect_tol=tol.bisect_tol, newton_tol=tol.newton_tol)
    best = candidates[0]
    u = best.field
    energy = action(ops, a, p, u)
    cone = check_cone(ops.grid, ops, u, cone_tolerance(u, tol.cone_tau_rel))
    trace = best.trace
    h1 = h1_norm(ops, u)
    bound, bound_ok = _ps_check(p, trace)
    record = {
        "field": u.to_dict(),
        "energy": energy.to_dict(),
        "cone": cone.to_dict(),
        "h1_norm": h1,
        "nontrivial": h1 >= cfg.flow.alpha,
        "nehari_residual": energy.nehari_residual,
        "relative_nehari_residual": energy.nehari_residual / energy.h1_sq if energy.h1_sq else 0.0,
        "nehari_scale": nehari_scale(ops, a, p, u) if energy.h1_sq else 0.0,
        "t_star": best.t_star,
        "outcome": best.outcome,
        "phi_norm": best.phi_norm,
        "converged": best.converged,
        "angular_variation": u.angular_variation(),
        "slice_defect": slice_defect(u),
        "flow": trace.summary(),
        "ps_norm_bound": bound,
        "ps_bound_ok": bound_ok,
        "candidates": [c.to_dict() for c in candidates],
        "ground_state_bound": ground_state_value([c.action for c in candidates if c.converged]),
        "warning": best.warning,
    }
    return best, candidates, record


def cmd_solve(cfg: RunConfig, dump_operators: bool = False) -> int:
    ops, a, out = _setup(cfg, dump_operators)
    best, _, record = solve_pipeline(cfg, ops, a)
    record = {"kind": "solve", "config": cfg.document, **record}
    write_trace_csv(out / "trace.csv", best.trace)
    write_record(out, record)
    ok = best.converged and record["nontrivial"] and record["cone"]["in_cone"]
    print(f"[{'OK' if ok else 'FAIL'}] action={record['energy']['action']:.12g} "
          f"phi_norm={best.phi_norm:.3e} in_cone={record['cone']['in_cone']} -> {out}")
    return EXIT_OK if ok else EXIT_SOLVER


def cmd_certify_nonradial(cfg: RunConfig, dump_operators: bool = False) -> int:
    w = cfg.problem.weight
    if w.kind != "constant" or w.value != 1.0:
        raise ConfigError("certify-nonradial needs the constant weight a = 1")
    ops, a, out = _setup(cfg, dump_operators)
    p = cfg.problem.p
    rad = solve_radial(cfg.problem, cfg.n1d, tol=cfg.tolerances.radial_tol)
    write_radial_csv(out / "radial.csv", rad)
    spec = crosscheck(rad, alpha1_solve(rad), cfg.ntheta)
    cert = nonradiality_certificate(ops, a, p, rad, spec)

    best, _, solved = solve_pipeline(cfg, ops, a)
    write_trace_csv(out / "trace.csv", best.trace)
    u = best.field
    u_rad = lift_radial(ops.grid, rad)
    grid_tol = cone_tolerance(u, cfg.tolerances.cone_tau_rel)
    action_rad = action(ops, a, p, u_rad).action
    nonradial = bool(cert.competitor_found and u.angular_variation() > NONRADIAL_FACTOR * grid_tol)
    record = {
        "kind": "certify",
        "config": cfg.document,
        **solved,
        "spectral": spec.to_dict(),
        "certificate": cert.to_dict(),
        "action_candidate": solved["energy"]["action"],
        "action_radial": action_rad,
        "distance_to_radial": float(np.max(np.abs(u.values - u_rad.values))),
        "grid_tolerance": grid_tol,
        "nonradial": nonradial,
        "verdict": "nonradial ground state" if nonradial else "no certificate",
    }
    write_record(out, record)
    print(f"[{'OK' if best.converged else 'FAIL'}] criterion={spec.criterion:.6g} "
          f"I(candidate)={record['action_candidate']:.12g} I(u_rad)={action_rad:.12g} -> {record['verdict']}")
    return EXIT_OK if best.converged else EXIT_SOLVER


def cmd_verify(cfg: RunConfig, suites: Optional[Sequence[str]] = None, fault: Optional[str] = None) -> int:
    names = suites if suites is not None else cfg.verify["suites"]
    ctx = VerifyContext(params=cfg.problem, nr=cfg.verify["nr"], ntheta=cfg.verify["ntheta"], seed=cfg.seed,
                        fault_inject=fault or cfg.verify["fault_inject"], samples=cfg.verify["samples"])
    results = run_suites(ctx, names)
    for name, ok, msg in results:
        print(f"[{'OK' if ok else 'FAIL'}] {name:<16} {msg}")
    failed = [name for name, ok, _ in results if not ok]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "verify.json", {"suites": [{"name": n, "ok": ok, "message": m} for n, ok, m in results],
                                     "failed": failed, "fault_inject": ctx.fault_inject})
    if failed:
        print("failed suites: " + ", ".join(failed))
        return EXIT_VERIFY
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, resume: bool = False) -> int:
    sw = cfg.sweep
    lo, hi = float(sw["range"][0]), float(sw["range"][1])
    validate_sweep(sw["mode"], cfg.problem, lo, hi, int(sw["samples"]))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(out / "config.json", cfg)
    done = read_sweep_rows(out / "sweep.csv") if resume else {}
    table = threshold_sweep(sw["mode"], cfg.problem, lo, hi, int(sw["samples"]), n1d=int(sw["n1d"]),
                            tol=cfg.tolerances.radial_tol, workers=cfg.workers,
                            ntheta_check=int(sw["ntheta_check"]), done=done)
    write_sweep(out, table, {"config": cfg.document})
    summary = table.summary()
    ok = summary["succeeded"] >= 0.8 * summary["samples"]
    print(f"[{'OK' if ok else 'FAIL'}] {summary['succeeded']}/{summary['samples']} samples, "
          f"threshold={summary['threshold']}, fit exponent={summary['fit_exponent']}")
    return EXIT_OK if ok else EXIT_SOLVER


def cmd_serve(root: Path) -> int:
    from . import create_app, ensure_root
    ensure_root(str(root))
    app = create_app(str(root))
    app.run(host=BIND, port=PORT, debug=False)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="conesolver", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON or TOML run configuration")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ...")
    sub = ap.add_subparsers(dest="command", required=True)

    for name in ("solve", "certify-nonradial"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--dump-operators", action="store_true", help="write stiffness triplets")

    sp = sub.add_parser("verify", parents=[common])
    sp.add_argument("--suite", action="append", default=None,
                    help="suite name (repeatable or comma separated); an empty value selects none")
    sp.add_argument("--fault-inject", default=None, help="deliberately break the operator (angular-sign)")

    sp = sub.add_parser("sweep", parents=[common])
    sp.add_argument("--mode", choices=("vary_p", "vary_R"), default=None)
    sp.add_argument("--range", nargs=2, type=float, default=None, metavar=("LO", "HI"))
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--resume", action="store_true", help="keep finished samples of an earlier sweep.csv")

    sp = sub.add_parser("serve", parents=[common])
    return ap


def _overrides(args: argparse.Namespace) -> Dict:
    o: Dict = {}
    if args.out is not None:
        o["output_dir"] = str(args.out)
    if args.seed is not None:
        o["seed"] = args.seed
    if args.workers is not None:
        o["workers"] = args.workers
    elif WORKERS is not None and args.config is None:
        o["workers"] = WORKERS
    sweep = {k: getattr(args, k) for k in ("mode", "samples") if getattr(args, k, None) is not None}
    if getattr(args, "range", None) is not None:
        sweep["range"] = list(args.range)
    if sweep:
        o["sweep"] = sweep
    return o


def _suite_names(raw: Optional[List[str]]) -> Optional[List[str]]:
    if raw is None:
        return None
    return [n.strip() for item in raw for n in item.split(",") if n.strip()]


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=(args.log_level or LOG_LEVEL).upper(),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "serve":
            root = args.out or Path(load_config(args.config).output_dir).parent
            return cmd_serve(Path(root).resolve())
        cfg = load_config(args.config, _overrides(args))
        if args.command == "solve":
            return cmd_solve(cfg, args.dump_operators)
        if args.command == "certify-nonradial":
            return cmd_certify_nonradial(cfg, args.dump_operators)
        if args.command == "verify":
            return cmd_verify(cfg, _suite_names(args.suite), args.fault_inject)
        return cmd_sweep(cfg, args.resume)
    except SolverError as exc:
        logger.error("%s failed: %s", args.command, exc)
        sys.stderr.write(dumps17(exc.to_dict()))
        if args.out is not None:
            try:
                args.out.mkdir(parents=True, exist_ok=True)
                write_json(args.out / "error.json", exc.to_dict())
            except OSError:
                pass
        return exc.exit_code
