"""Acceptance suite: every top-level verification criterion as a callable check.

Each criterion is a pure function of an AcceptanceContext that caches the
heavy shared artifacts (reference solves, sweeps, ball geometry).  The
checks run at the reference configuration (N = 3, g(s) = s^3, R = 20,
n = 2000, ball n = 400) unless the supplied config overrides the scales,
and each returns (passed, details).  The step-halving part of the
continuity criterion asserts strict halving of branch jumps under grid
refinement; for a curved level branch the exact ratio exceeds 1/2 by
O(step) (measured ~0.506 level / ~0.511 field here), so that check
documents a known-red outcome rather than being loosened to pass.
"""

from __future__ import annotations

import filecmp
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .config import RunConfig
from .continuation import (branch_limit_check, diagnose, ps_transfer_check,
                           scaling_check, sweep, write_branch_csv,
                           write_profile_csvs)
from .forced import (ForcingTerm, GeometryConstants,forced_level_bound,
                     geometry_constants, limit_study, positivity_threshold,
                     ps_bound_check, solve_forced, write_limit_csv,
                     write_threshold_csv)
from .functional import Problem, energy, gradient
from .grids import (DomainKind, RadialField, field_from_callable, integrate,
                    make_grid, norms)
from .nonlinearity import (PositivePartPower, RadialProfile, SaturatingCubic,
                           check_hypotheses, lambda_star, pure_power)
from .rng import SplitMix64, random_smooth_field
from .solvers import LambdaOutsideRange, MountainPassConfig, mountain_pass, \
    shooting_ground_state


@dataclass(frozen=True)
class CriterionResult:
    cid: str
    title: str
    passed: bool
    details: str


class AcceptanceContext:
    """Reference-problem artifacts, computed lazily and shared by checks."""

    def __init__(self, cfg: RunConfig | None = None, out_dir=None):
        cfg = cfg or RunConfig()
        self.cfg = cfg
        self.seed = cfg.output.seed
        self.N = 3
        self.R = cfg.problem.R
        self.n = cfg.problem.n
        self.ball_n = max(16, min(400, self.n))
        self.p = 3.0
        self.q = 2.0
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.solver_cfg = MountainPassConfig()

    # --- whole-space reference problem ---------------------------------

    @cached_property
    def grid(self):
        return make_grid(self.N, self.R, self.n, DomainKind.TRUNCATED_SPACE)

    @cached_property
    def problem(self) -> Problem:
        return Problem.autonomous(self.grid, pure_power(3))

    def grid_n(self, n: int):
        return make_grid(self.N, self.R, n, DomainKind.TRUNCATED_SPACE)

    @cached_property
    def shooting(self) -> dict[float, RadialField]:
        nl = pure_power(3)
        return {lam: shooting_ground_state(self.N, lam, nl, self.grid)
                for lam in (0.5, 1.0, 2.0)}

    @cached_property
    def mp_records(self) -> dict:
        return {lam: mountain_pass(self.problem, lam, self.solver_cfg)
                for lam in (0.5, 0.75, 1.0, 1.5, 2.0)}

    @cached_property
    def ladder_records(self) -> list:
        out = []
        for n in (max(16, self.n // 4), max(16, self.n // 2), self.n):
            g = self.grid_n(n)
            P = Problem.autonomous(g, pure_power(3))
            out.append((n, P, mountain_pass(P, 1.0, self.solver_cfg)))
        return out

    def _lam_grid(self, step: float):
        k = int(round(1.5 / step))
        return [round(0.5 + i * step, 12) for i in range(k + 1)]

    @cached_property
    def branch_coarse(self):
        return sweep(self.problem, self._lam_grid(0.05), self.solver_cfg, warm=True)

    @cached_property
    def branch_fine(self):
        return sweep(self.problem, self._lam_grid(0.025), self.solver_cfg, warm=True)

    # --- ball / forced problem ------------------------------------------

    @cached_property
    def ball(self):
        return make_grid(self.N, 1.0, self.ball_n, DomainKind.BALL)

    @cached_property
    def geometry(self) -> GeometryConstants:
        return geometry_constants(self.ball, self.p, self.q,
                                  rng=SplitMix64(self.seed))

    @cached_property
    def sign_changing_profile(self) -> RadialField:
        return field_from_callable(self.ball, lambda r: np.cos(np.pi * r),
                                   dirichlet=False)

    @cached_property
    def threshold_report(self):
        return positivity_threshold(self.ball, self.p, self.sign_changing_profile,
                                    self.q, self.solver_cfg,
                                    beta=self.geometry.beta)

    @cached_property
    def limit_report(self):
        beta = self.geometry.beta
        amps = [beta, beta / 2.0, beta / 4.0, beta / 8.0]
        return limit_study(self.ball, self.p, self.sign_changing_profile, amps,
                           self.q, self.solver_cfg)


# --- criteria ----------------------------------------------------------------


def check_oracle_equivalence(ctx: AcceptanceContext):
    details = []
    ok = True
    for lam in (0.5, 1.0, 2.0):
        ush = ctx.shooting[lam]
        rec = ctx.mp_records[lam]
        m_sh = energy(ctx.problem, ush, lam)
        sup = float(np.max(np.abs(rec.u.values - ush.values)))
        sup_rel = sup / ush.sup_norm
        lvl_rel = abs(rec.level - m_sh) / abs(m_sh)
        ok = ok and rec.converged and sup_rel <= 1e-3 and lvl_rel <= 1e-3
        details.append(f"lam={lam}: sup_rel={sup_rel:.2e} level_rel={lvl_rel:.2e}")
    return ok, "; ".join(details)


def check_critical_point_identities(ctx: AcceptanceContext):
    ok = True
    details = []
    for lam in (0.5, 1.0, 2.0):
        rec = ctx.mp_records[lam]
        m = abs(rec.level)
        scale = norms(rec.u, lam).h1lam_sq
        poh_ok = abs(rec.pohozaev_residual) <= 1e-3
        eid_ok = abs(rec.energy_identity_residual) <= 1e-3 * m
        neh_ok = abs(rec.nehari_residual) <= 1e-3 * scale
        ok = ok and poh_ok and eid_ok and neh_ok
        details.append(f"lam={lam}: poh={rec.pohozaev_residual:.1e} "
                       f"eid/m={abs(rec.energy_identity_residual) / m:.1e} "
                       f"neh/scale={abs(rec.nehari_residual) / scale:.1e}")
    poh_ladder = [abs(r.pohozaev_residual) for _, _, r in ctx.ladder_records]
    eid_ladder = [abs(r.energy_identity_residual) / abs(r.level)
                  for _, _, r in ctx.ladder_records]
    dec = (all(b < a for a, b in zip(poh_ladder, poh_ladder[1:]))
           and all(b < a for a, b in zip(eid_ladder, eid_ladder[1:])))
    ok = ok and dec
    ns = [n for n, _, _ in ctx.ladder_records]
    details.append(f"ladder n={ns}: poh={['%.1e' % x for x in poh_ladder]} "
                   f"eid={['%.1e' % x for x in eid_ladder]} decreasing={dec}")
    return ok, "; ".join(details)


def check_scaling_law(ctx: AcceptanceContext):
    m1 = ctx.mp_records[1.0].level
    ok = True
    details = []
    for lam in (0.5, 0.75, 1.5, 2.0):
        ratio = ctx.mp_records[lam].level / m1
        dev = abs(ratio - lam ** 0.5) / lam ** 0.5
        ok = ok and dev <= 0.01
        details.append(f"lam={lam}: ratio={ratio:.5f} dev={dev:.1e}")
    return ok, "; ".join(details)


def check_monotone_levels(ctx: AcceptanceContext):
    diag = diagnose(ctx.problem, ctx.branch_coarse)
    full = (len(ctx.branch_coarse) == 31 and not ctx.branch_coarse.gaps)
    ok = diag.monotone and full
    return ok, (f"records={len(ctx.branch_coarse)} gaps={len(ctx.branch_coarse.gaps)} "
                f"monotone={diag.monotone} S={diag.levels_interval}")


def check_refinement_halving(ctx: AcceptanceContext):
    dc = diagnose(ctx.problem, ctx.branch_coarse)
    df = diagnose(ctx.problem, ctx.branch_fine)
    lvl_ratio = df.max_level_jump / dc.max_level_jump
    fld_ratio = df.max_field_jump / dc.max_field_jump
    ok = lvl_ratio <= 0.5 and fld_ratio <= 0.5
    return ok, (f"level jump ratio={lvl_ratio:.4f}, field jump ratio={fld_ratio:.4f} "
                f"(strict halving requires <= 0.5; a curved branch exceeds it by "
                f"O(step) -- see ledger/readme)")


def check_transfer_diagnostics(ctx: AcceptanceContext):
    diag = diagnose(ctx.problem, ctx.branch_coarse)
    rep = ps_transfer_check(ctx.problem, ctx.branch_coarse, 1.0, slack_rel=1e-6)
    ok = diag.transfer_ok and rep.all_bounds_hold
    return ok, (f"exact transfer identities={diag.transfer_ok}, "
                f"residual bounds at lam0=1 hold={rep.all_bounds_hold}, "
                f"fitted slope={rep.fitted_slope:.3f}")


def check_lambda_star(ctx: AcceptanceContext):
    ls_sat = lambda_star(SaturatingCubic())
    ls_cubic = lambda_star(pure_power(3))
    sat_ok = abs(ls_sat.value - 1.0) <= 1e-6
    cubic_ok = math.isinf(ls_cubic.value)
    refused = False
    try:
        mountain_pass(Problem.autonomous(ctx.grid, SaturatingCubic()), 1.2,
                      ctx.solver_cfg)
    except LambdaOutsideRange:
        refused = True
    ok = sat_ok and cubic_ok and refused
    return ok, (f"lambda*(saturating)={ls_sat.value!r} (within 1e-6 of 1: {sat_ok}), "
                f"lambda*(cubic)=inf: {cubic_ok}, refusal at 1.2: {refused}")


def check_hypothesis_reports(ctx: AcceptanceContext):
    cubic = check_hypotheses(pure_power(3), 3)
    sat = check_hypotheses(SaturatingCubic(), 3)
    quintic = check_hypotheses(pure_power(5), 3)
    cubic_ok = (cubic.h1 and cubic.h2 and cubic.h3 and cubic.h4 == "holds"
                and cubic.mu == 4.0 and cubic.subcritical)
    sat_ok = sat.h4 == "fails"
    quintic_ok = not quintic.subcritical
    ok = cubic_ok and sat_ok and quintic_ok
    return ok, (f"cubic: all hold, mu={cubic.mu}, subcritical={cubic.subcritical}; "
                f"saturating: h4={sat.h4}; p=5: subcritical={quintic.subcritical}")


def check_forced_barrier(ctx: AcceptanceContext):
    geo = ctx.geometry
    ok = True
    details = [f"a={geo.a:.4f} b={geo.b:.4f} beta={geo.beta:.4f}"]
    for alpha in (0.0, geo.beta / 4.0, geo.beta / 2.0, geo.beta):
        term = ForcingTerm.normalized(ctx.sign_changing_profile, alpha, ctx.q)
        rec = solve_forced(ctx.ball, ctx.p, term, ctx.solver_cfg, beta=geo.beta)
        bound = forced_level_bound(ctx.ball, ctx.p, term)
        ps_ok = ps_bound_check(rec, term, ctx.p, rng=SplitMix64(ctx.seed + 1))
        this = (rec.converged and rec.level >= geo.b
                and rec.level <= bound * (1 + 1e-9) and ps_ok)
        ok = ok and this
        details.append(f"alpha={alpha:.4f}: c_f={rec.level:.4f} >=b:{rec.level >= geo.b} "
                       f"<=ray bound:{rec.level <= bound * (1 + 1e-9)} ps:{ps_ok}")
    return ok, "; ".join(details)


def check_positivity_threshold(ctx: AcceptanceContext):
    rep = ctx.threshold_report
    beta = ctx.geometry.beta
    alpha_ok = rep.alpha_hat >= 1e-3 * beta
    strict = all(min_u > 0.0 for (_, _, _, min_u, positive) in rep.probes if positive)
    ok = alpha_ok and strict
    return ok, (f"alpha_hat={rep.alpha_hat:.5f} (>=1e-3*beta={1e-3 * beta:.2e}): "
                f"{alpha_ok}; degenerate={rep.degenerate}; "
                f"all positive probes strictly positive: {strict}")


def check_limit_study(ctx: AcceptanceContext):
    rep = ctx.limit_report
    sups = [row[1] for row in rep.rows]
    mono = all(b < a for a, b in zip(sups, sups[1:]))
    final_ok = sups[-1] <= 1e-2 * rep.u0_record.u.sup_norm
    qs = [abs(fp) / row[0] for fp, row in zip(rep.f_pairings, rep.rows)]
    prop_ok = max(qs) <= 2.0 * min(qs)
    ok = mono and final_ok and prop_ok
    return ok, (f"sup dists={['%.2e' % s for s in sups]} monotone={mono}; "
                f"final<=1e-2*|u0|={final_ok}; pairing/alpha spread="
                f"{max(qs) / min(qs):.3f} (<=2: {prop_ok})")


def _directional_check(P: Problem, u: RadialField, v: RadialField, lam: float,
                       h: float):
    """(slope ratio, |extrapolated FD - strong pairing| scaled)."""
    eps = (4e-3, 2e-3, 1e-3)
    d_vals = []
    for e in eps:
        up = RadialField(P.grid, u.values + e * v.values)
        um = RadialField(P.grid, u.values - e * v.values)
        d_vals.append((energy(P, up, lam) - energy(P, um, lam)) / (2.0 * e))
    pairing = integrate(RadialField(P.grid,
                                    gradient(P, u, lam).values * v.values))
    richardson = d_vals[2] + (d_vals[2] - d_vals[1]) / 3.0
    gap = abs(richardson - pairing)
    denom = d_vals[0] - d_vals[2]
    ratio = (d_vals[0] - richardson) / (d_vals[1] - richardson) \
        if abs(d_vals[1] - richardson) > 1e-13 * max(1.0, abs(pairing)) else None
    return ratio, gap / max(1.0, abs(pairing))


def check_gradient_consistency(ctx: AcceptanceContext):
    rng = SplitMix64(ctx.seed + 2)
    grid = ctx.grid
    ball = ctx.ball
    beta = ctx.geometry.beta
    term = ForcingTerm.normalized(ctx.sign_changing_profile, beta / 2.0, ctx.q)
    problems = [
        ("autonomous", ctx.problem, grid, 1.0),
        ("weighted", Problem.weighted(grid, pure_power(3),
                                      RadialProfile(lambda r: np.exp(-r),
                                                    decays_at_infinity=True)),
         grid, 1.0),
        ("forced", Problem.forced(ball, ctx.p, term.field()), ball, 1.0),
    ]
    ok = True
    details = []
    for name, P, g, lam in problems:
        ratios = []
        worst_gap = 0.0
        for _ in range(50):
            u = random_smooth_field(g, rng, amplitude=rng.uniform(0.5, 2.0))
            v = random_smooth_field(g, rng)
            ratio, gap = _directional_check(P, u, v, lam, g.h)
            if ratio is not None:
                ratios.append(ratio)
            worst_gap = max(worst_gap, gap)
        med = float(np.median(ratios))
        # pure eps^2 error contracts by 4 per halving; allow a loose band
        slope_ok = 2.5 <= med <= 6.5
        gap_ok = worst_gap <= 50.0 * g.h
        ok = ok and slope_ok and gap_ok
        details.append(f"{name}: median FD ratio={med:.2f} (expect ~4), "
                       f"worst scaled gap={worst_gap:.2e} (<= {50.0 * g.h:.1e})")
    return ok, "; ".join(details)


def _export_all(ctx: AcceptanceContext, branch, threshold_rep, limit_rep,
                out: Path) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    write_branch_csv(branch, out / "branch.csv")
    profile_paths = write_profile_csvs(branch, out / "profiles")
    write_threshold_csv(threshold_rep, out / "threshold.csv")
    write_limit_csv(limit_rep, out / "limit_study.csv")
    return [out / "branch.csv", out / "threshold.csv",
            out / "limit_study.csv"] + profile_paths


def check_determinism(ctx: AcceptanceContext):
    base = ctx.out_dir if ctx.out_dir is not None else Path(".")
    run1 = base / "determinism_run1"
    run2 = base / "determinism_run2"
    files1 = _export_all(ctx, ctx.branch_coarse, ctx.threshold_report,
                         ctx.limit_report, run1)

    # fully recompute the CSV-producing pipeline with the same seed
    branch2 = sweep(ctx.problem, ctx._lam_grid(0.05), ctx.solver_cfg, warm=True)
    geo2 = geometry_constants(ctx.ball, ctx.p, ctx.q, rng=SplitMix64(ctx.seed))
    thr2 = positivity_threshold(ctx.ball, ctx.p, ctx.sign_changing_profile,
                                ctx.q, ctx.solver_cfg, beta=geo2.beta)
    amps = [geo2.beta, geo2.beta / 2.0, geo2.beta / 4.0, geo2.beta / 8.0]
    lim2 = limit_study(ctx.ball, ctx.p, ctx.sign_changing_profile, amps,
                       ctx.q, ctx.solver_cfg)
    files2 = _export_all(ctx, branch2, thr2, lim2, run2)

    if len(files1) != len(files2):
        return False, f"file count differs: {len(files1)} vs {len(files2)}"
    diffs = [f1.name for f1, f2 in zip(files1, files2)
             if not filecmp.cmp(f1, f2, shallow=False)]
    ok = not diffs
    return ok, (f"{len(files1)} files byte-compared, "
                + ("all identical" if ok else f"differing: {diffs}"))


CRITERIA = [
    ("1", "oracle equivalence (mountain pass vs shooting at lam in {0.5, 1, 2})",
     check_oracle_equivalence),
    ("2", "critical-point identities and refinement ladder", check_critical_point_identities),
    ("3", "level scaling law m_lam/m_1 = lam^theta within 1%", check_scaling_law),
    ("4a", "sweep levels nondecreasing in lam", check_monotone_levels),
    ("4b", "step halving at least halves branch jumps", check_refinement_halving),
    ("5", "gradient/level transfer diagnostics on the sweep", check_transfer_diagnostics),
    ("6", "lambda* values and solver refusal beyond lambda*", check_lambda_star),
    ("7", "hypothesis checker verdicts", check_hypothesis_reports),
    ("8", "forced problem barrier, ray bound, and PS bound", check_forced_barrier),
    ("9", "positivity threshold witness", check_positivity_threshold),
    ("10", "vanishing-forcing limit study", check_limit_study),
    ("11", "gradient consistency (FD vs strong pairing, all modes)",
     check_gradient_consistency),
    ("12", "determinism: byte-identical CSVs for a fixed seed", check_determinism),
]


def list_criteria():
    return [(cid, title) for cid, title, _ in CRITERIA]


def run_acceptance(cfg: RunConfig | None = None, out_dir=None) -> list[CriterionResult]:
    ctx = AcceptanceContext(cfg, out_dir)
    results = []
    for cid, title, fn in CRITERIA:
        try:
            passed, details = fn(ctx)
        except Exception as exc:  # a crashed check is a failed check
            passed, details = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CriterionResult(cid, title, passed, details))
    return results
