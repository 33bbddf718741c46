"""Command-line front end.

Subcommands: solve, sweep, threshold, verify, lambda-star.  Every command
takes --config PATH (INI or JSON); --out and --seed override the config's
output section.  Exit codes: 0 ok, 1 config/validation error, 2
non-convergence, 3 acceptance failure.  All CSV output is byte-stable for
a fixed config and seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .continuation import (Branch, branch_limit_check, diagnose,
                           ps_transfer_check, scaling_check, sweep,
                           write_branch_csv, write_profile_csvs, _write_csv)
from .forced import (ForcingTerm, geometry_constants, limit_study,
                     positivity_threshold, solve_forced, write_limit_csv,
                     write_threshold_csv)
from .grids import norms
from .nonlinearity import HypothesisViolation, lambda_star
from .rng import SplitMix64
from .solvers import (CollapsedToZero, EndpointNotFound, LambdaOutsideRange,
                      MountainPassConfig, mountain_pass)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2
EXIT_ACCEPTANCE = 3


def _load(args) -> tuple[RunConfig, Path, SplitMix64]:
    cfg = parse_config(args.config)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, output=dataclasses.replace(
            cfg.output, directory=str(args.out)))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, output=dataclasses.replace(
            cfg.output, seed=int(args.seed)))
    cfg.validate()
    out_dir = Path(cfg.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    return cfg, out_dir, SplitMix64(cfg.output.seed)


def _print_record(rec, label: str = "solution") -> None:
    nd = norms(rec.u, 0.0)
    print(f"{label}: lam={rec.lam!r} level={rec.level!r} converged={rec.converged} "
          f"iterations={rec.iterations}")
    print(f"  grad_residual={rec.grad_residual!r} positive={rec.positive}")
    print(f"  pohozaev={rec.pohozaev_residual!r} nehari={rec.nehari_residual!r} "
          f"energy_identity={rec.energy_identity_residual!r}")
    print(f"  grad_sq={nd.grad_sq!r} l2_sq={nd.l2_sq!r} u(0)={rec.u.values[0]!r}")


def _write_profile(rec, path: Path) -> None:
    rows = zip((float(x) for x in rec.u.grid.r), (float(v) for v in rec.u.values))
    _write_csv(path, ["r", "u"], rows)


def cmd_solve(args) -> int:
    cfg, out_dir, rng = _load(args)
    solver_cfg = cfg.build_solver_config()
    if cfg.problem.mode == "forced":
        grid = cfg.build_grid()
        alpha = float(args.lam) if args.lam is not None else cfg.experiment.lam
        profile = cfg.build_profile(grid)
        term = ForcingTerm.normalized(profile, alpha, cfg.problem.q)
        rec = solve_forced(grid, cfg.problem.p, term, solver_cfg)
    else:
        P = cfg.build_problem()
        lam = float(args.lam) if args.lam is not None else cfg.experiment.lam
        try:
            rec = mountain_pass(P, lam, solver_cfg)
        except LambdaOutsideRange as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except (EndpointNotFound, CollapsedToZero) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NOT_CONVERGED
    _print_record(rec)
    _write_profile(rec, out_dir / "profile.csv")
    print(f"wrote {out_dir / 'profile.csv'}")
    return EXIT_OK if rec.converged else EXIT_NOT_CONVERGED


def _parallel_cold_sweep(P, lams, solver_cfg, threads: int) -> Branch:
    results: dict[float, object] = {}
    gaps = []

    def solve_one(lam):
        try:
            return lam, mountain_pass(P, lam, solver_cfg)
        except (LambdaOutsideRange, EndpointNotFound, CollapsedToZero) as exc:
            return lam, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=threads) as pool:
        for lam, res in pool.map(solve_one, lams):
            results[lam] = res
    records = []
    for lam in lams:
        res = results[lam]
        if isinstance(res, str):
            gaps.append((lam, res))
        elif not res.converged:
            gaps.append((lam, f"NotConverged after {res.iterations} iterations"))
        else:
            records.append(res)
    return Branch(tuple(records), tuple(lams), warm_started=False, gaps=tuple(gaps))


def cmd_sweep(args) -> int:
    cfg, out_dir, rng = _load(args)
    if cfg.problem.mode == "forced":
        print("error: sweep requires a lam-family mode", file=sys.stderr)
        return EXIT_CONFIG
    P = cfg.build_problem()
    solver_cfg = cfg.build_solver_config()
    lams = cfg.lambda_values()
    if not lams:
        print("error: empty lambda grid", file=sys.stderr)
        return EXIT_CONFIG
    warm = cfg.experiment.warm
    if not warm and args.threads > 1:
        branch = _parallel_cold_sweep(P, lams, solver_cfg, args.threads)
    else:
        branch = sweep(P, lams, solver_cfg, warm=warm)
    if len(branch) == 0:
        print("error: no lambda point converged", file=sys.stderr)
        for lam, reason in branch.gaps:
            print(f"  gap at lambda={lam!r}: {reason}", file=sys.stderr)
        return EXIT_NOT_CONVERGED

    diag = diagnose(P, branch)
    lam0 = min((r.lam for r in branch.records), key=lambda x: abs(x - 1.0))
    transfer = ps_transfer_check(P, branch, lam0)
    limit = branch_limit_check(branch, lam0)
    payload = {
        "records": len(branch),
        "gaps": [{"lambda": g[0], "reason": g[1]} for g in branch.gaps],
        "levels_interval": list(diag.levels_interval),
        "monotone": diag.monotone,
        "max_level_jump": diag.max_level_jump,
        "max_field_jump": diag.max_field_jump,
        "transfer_identities_ok": diag.transfer_ok,
        "lam0": lam0,
        "transfer_bounds_hold": transfer.all_bounds_hold,
        "transfer_fitted_slope": transfer.fitted_slope,
        "limit_max_distance": limit.max_distance,
    }
    ppe = P.nl.pure_power_exponent
    if cfg.problem.mode == "autonomous" and ppe is not None:
        sc = scaling_check(branch, ppe)
        payload["scaling_theta"] = sc.theta
        payload["scaling_max_rel_deviation"] = sc.max_rel_deviation
    write_branch_csv(branch, out_dir / "branch.csv")
    write_profile_csvs(branch, out_dir / "profiles")
    (out_dir / "diagnostics.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"sweep: {len(branch)} records, {len(branch.gaps)} gaps; "
          f"monotone={diag.monotone}")
    for lam, reason in branch.gaps:
        print(f"  gap at lambda={lam!r}: {reason}")
    print(f"wrote {out_dir / 'branch.csv'}, {out_dir / 'profiles'}/, "
          f"{out_dir / 'diagnostics.json'}")
    return EXIT_OK


def cmd_threshold(args) -> int:
    cfg, out_dir, rng = _load(args)
    if cfg.problem.mode != "forced":
        print("error: threshold requires mode = forced", file=sys.stderr)
        return EXIT_CONFIG
    grid = cfg.build_grid()
    p, q = cfg.problem.p, cfg.problem.q
    solver_cfg = cfg.build_solver_config()
    geo = geometry_constants(grid, p, q, rng=rng.split())
    profile = cfg.build_profile(grid)
    report = positivity_threshold(
        grid, p, profile, q, solver_cfg,
        alpha_max=cfg.experiment.alpha_max_rel * geo.beta, beta=geo.beta,
        bracket_rel=cfg.experiment.bracket_rel)
    amps = [rel * geo.beta for rel in cfg.experiment.amplitudes_rel]
    limit = limit_study(grid, p, profile, amps, q, solver_cfg)
    write_threshold_csv(report, out_dir / "threshold.csv")
    write_limit_csv(limit, out_dir / "limit_study.csv")
    payload = {
        "a": geo.a, "b": geo.b, "beta": geo.beta, "C_sobolev": geo.C_sobolev,
        "alpha_hat": report.alpha_hat, "degenerate": report.degenerate,
        "bracket": list(report.bracket) if report.bracket else None,
        "non_monotone": list(report.non_monotone),
    }
    (out_dir / "geometry.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"geometry: a={geo.a!r} b={geo.b!r} beta={geo.beta!r}")
    print(f"threshold: alpha_hat={report.alpha_hat!r} degenerate={report.degenerate}")
    print(f"wrote {out_dir / 'threshold.csv'}, {out_dir / 'limit_study.csv'}, "
          f"{out_dir / 'geometry.json'}")
    return EXIT_OK


def cmd_lambda_star(args) -> int:
    cfg, _, _ = _load(args)
    nl = cfg.build_nonlinearity()
    try:
        ls = lambda_star(nl)
    except HypothesisViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    value = "inf" if math.isinf(ls.value) else repr(ls.value)
    print(f"lambda_star = {value} (attained = {ls.attained})")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import list_criteria, run_acceptance
    if args.list:
        for cid, title in list_criteria():
            print(f"{cid}: {title}")
        return EXIT_OK
    cfg, out_dir, _ = _load(args)
    results = run_acceptance(cfg, out_dir)
    failures = [r for r in results if not r.passed]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.cid}: {r.title} -- {r.details}")
    if failures:
        print(f"{len(failures)} criterion(s) failed: "
              + ", ".join(r.cid for r in failures))
        return EXIT_ACCEPTANCE
    print("all acceptance criteria passed")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="radialmp",
        description="Mountain-pass ground states, branches, and forced-problem "
                    "positivity studies for radial semilinear elliptic equations.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", required=True, help="INI or JSON config path")
        sp.add_argument("--out", default=None, help="output directory override")
        sp.add_argument("--seed", default=None, type=int, help="seed override (u64)")
        sp.add_argument("--threads", default=1, type=int,
                        help="worker threads for independent solves")

    sp = sub.add_parser("solve", help="single solve at one lambda (or amplitude)")
    add_common(sp)
    sp.add_argument("--lambda", dest="lam", default=None, type=float,
                    help="lambda (amplitude in forced mode); default from config")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="branch sweep over the lambda grid + diagnostics")
    add_common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("threshold", help="geometry constants, positivity threshold, "
                                          "vanishing-forcing limit study")
    add_common(sp)
    sp.set_defaults(func=cmd_threshold)

    sp = sub.add_parser("lambda-star", help="print lambda* for the configured nonlinearity")
    add_common(sp)
    sp.set_defaults(func=cmd_lambda_star)

    sp = sub.add_parser("verify", help="run the acceptance suite")
    add_common(sp)
    sp.add_argument("--list", action="store_true", help="list criteria and exit")
    sp.set_defaults(func=cmd_verify)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
