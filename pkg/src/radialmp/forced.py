"""The forced problem -Lap u = (u^+)^p + f on the unit ball.

Quantities measured here realize the mountain-pass geometry recipe for
the forced functional E_f: a discrete embedding constant C (probe
maximization, safety factor 2), the sphere radius a with
1/2 a^2 - C a^(p+1) >= 1/4 a^2, the barrier level b = a^2/8, and the
forcing budget beta = a/(8C) with C beta a <= a^2/8.  Every run with
|f|_q <= beta then has its mountain-pass level c_f >= b.

On top of single solves the module provides the positivity-threshold
search (largest forcing amplitude for which the computed solution stays
strictly positive at all interior nodes) and the vanishing-forcing limit
study against the unforced ground state.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize

from .grids import (DomainKind, RadialField, RadialGrid, field_from_callable,
                    lp_norm, norms, zero_field, _integrate_vals)
from .functional import Mode, Problem, _energy_vals, energy
from .nonlinearity import PositivePartPower, pure_power
from .rng import SplitMix64, random_smooth_field
from .solvers import (MountainPassConfig, SolutionRecord, mountain_pass,
                      newton_refine, shooting_ground_state)
from .continuation import _write_csv

logger = logging.getLogger(__name__)


class NoPositiveSolutionAtZero(Exception):
    """The unforced limit solve failed to produce a positive ground state."""


@dataclass(frozen=True)
class ForcingTerm:
    """f = amplitude * profile with |profile|_q = 1 and q > N/2."""

    profile: RadialField
    amplitude: float
    q: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("forcing amplitude must be >= 0")
        N = self.profile.grid.N
        if not self.q > N / 2:
            raise ValueError(f"q must exceed N/2 = {N/2}, got {self.q}")
        nrm = lp_norm(self.profile, self.q)
        if abs(nrm - 1.0) > 1e-10:
            raise ValueError(f"profile must have unit L^q norm, got {nrm}")

    @classmethod
    def normalized(cls, profile: RadialField, amplitude: float, q: float) -> "ForcingTerm":
        nrm = lp_norm(profile, q)
        if nrm <= 0:
            raise ValueError("cannot normalize a zero profile")
        return cls(RadialField(profile.grid, profile.values / nrm), amplitude, q)

    def field(self) -> RadialField:
        return RadialField(self.profile.grid, self.amplitude * self.profile.values)


@dataclass(frozen=True)
class GeometryConstants:
    """Mountain-pass geometry constants for the forced functional.

    With the stored embedding constant C (probe-measured, then doubled
    for safety): 1/2 a^2 - C a^(p+1) = 1/4 a^2 and C * beta * a = a^2/8
    hold with equality by construction.
    """

    a: float
    b: float
    beta: float
    C_sobolev: float


def _ball_ground_state(grid: RadialGrid, p: float) -> RadialField:
    """Ground state of -Lap u = u^p on the ball, shooting + Newton polish."""
    u = shooting_ground_state(grid.N, 0.0, pure_power(p), grid, d_lo=1e-2, d_hi=1e6)
    Pb = Problem.forced(grid, p, zero_field(grid))
    return newton_refine(Pb, u, 0.0)


def _probe_fields(grid: RadialGrid, p: float, rng: SplitMix64,
                  n_random: int = 50) -> list[RadialField]:
    probes = [_ball_ground_state(grid, p)]
    for rho in (0.25, 0.5, 0.75, 1.0):
        probes.append(field_from_callable(
            grid, lambda r, rho=rho: np.maximum(1.0 - r / (rho * grid.R), 0.0)))
    for _ in range(n_random):
        probes.append(random_smooth_field(grid, rng))
    return probes


def measure_sobolev_constant(grid: RadialGrid, p: float, q: float,
                             rng: SplitMix64 | None = None,
                             n_random: int = 50) -> float:
    """Discrete embedding constant from probe maximization.

    C = max over probes of max(|u|_{p+1}^{p+1} / |grad u|^{p+1},
    |u|_{q'} / |grad u|) with q' the Holder conjugate of q.  Both ratios
    are scaling invariant.  The probe set (ball ground state, tents,
    n_random smooth random fields) yields a lower estimate of the true
    constant; downstream geometry applies a safety factor 2.
    """
    if grid.kind is not DomainKind.BALL:
        raise ValueError("the embedding constant is measured on ball grids")
    crit = (grid.N + 2) / (grid.N - 2)
    if not 1 < p < crit:
        raise ValueError(f"need 1 < p < {crit}, got {p}")
    rng = rng if rng is not None else SplitMix64(0)
    qprime = q / (q - 1.0)
    best = 0.0
    for u in _probe_fields(grid, p, rng, n_random):
        gnorm = math.sqrt(norms(u, 0.0).grad_sq)
        if gnorm <= 0:
            continue
        r1 = lp_norm(u, p + 1.0) ** (p + 1.0) / gnorm ** (p + 1.0)
        r2 = lp_norm(u, qprime) / gnorm
        best = max(best, r1, r2)
    return best


def geometry_constants(grid: RadialGrid, p: float, q: float,
                       rng: SplitMix64 | None = None,
                       n_random: int = 50) -> GeometryConstants:
    """(a, b, beta) from the measured embedding constant times safety 2.

    a = (1/(4C))^(1/(p-1)), b = a^2/8, beta = a/(8C); the defining
    inequalities hold with equality for the stored C.
    """
    C = 2.0 * measure_sobolev_constant(grid, p, q, rng=rng, n_random=n_random)
    a = (1.0 / (4.0 * C)) ** (1.0 / (p - 1.0))
    return GeometryConstants(a=a, b=a * a / 8.0, beta=a / (8.0 * C), C_sobolev=C)


def solve_forced(grid: RadialGrid, p: float, f: ForcingTerm,
                 cfg: MountainPassConfig | None = None,
                 beta: float | None = None) -> SolutionRecord:
    """Mountain-pass solve of the forced functional; lam slot holds amplitude.

    When beta is supplied and the amplitude exceeds it, the run proceeds
    with a warning (the barrier guarantee no longer applies).  The level
    upper bound c_f <= max_t E_f(t * probe) is checked against a fixed
    positive probe and a violation is logged as a warning, never an error.
    """
    if beta is not None and f.amplitude > beta:
        warnings.warn(
            f"forcing amplitude {f.amplitude} exceeds the geometry budget {beta}; "
            "the mountain-pass barrier is not guaranteed", stacklevel=2)
    P = Problem.forced(grid, p, f.field())
    rec = mountain_pass(P, 1.0, cfg)
    if rec.converged:
        bound = forced_level_bound(grid, p, f)
        if rec.level > bound * (1.0 + 1e-9):
            logger.warning("forced level %g exceeds the single-ray bound %g",
                           rec.level, bound)
    return rec


def forced_level_bound(grid: RadialGrid, p: float, f: ForcingTerm,
                       probe: RadialField | None = None) -> float:
    """max_{t>0} E_f(t * probe): a one-ray upper bound for the pass level."""
    if probe is None:
        rho = min(grid.R / 2.0, 5.0)
        probe = field_from_callable(
            grid, lambda r: np.maximum(1.0 - (r / rho) ** 2, 0.0) ** 2)
    P = Problem.forced(grid, p, f.field())

    def neg_e(t: float) -> float:
        return -_energy_vals(P, t * probe.values, 1.0)

    # bracket the ray maximum: energy starts at 0, ends negative
    t_hi = 1.0
    for _ in range(80):
        if -neg_e(t_hi) < 0.0:
            break
        t_hi *= 2.0
    res = optimize.minimize_scalar(neg_e, bounds=(0.0, t_hi), method="bounded",
                                   options={"xatol": 1e-10})
    return float(max(-res.fun, 0.0))


def ps_bound_check(record: SolutionRecord, f: ForcingTerm, p: float,
                   rng: SplitMix64 | None = None, slack_rel: float = 1e-6) -> bool:
    """Norm-from-level bound for forced critical points.

    Verifies (1/2 - 1/(p+1)) |grad u|^2 <= c_f + 1 + |grad u|
    + p/(p+1) * |f|_dual * |grad u| + slack, where |f|_dual is estimated
    as max over probes v of int f v / |grad v| (the probe set reuses the
    embedding-constant probes).  Carries explicit slack because the dual
    norm has no exact discrete analogue.
    """
    grid = record.u.grid
    unorm = math.sqrt(norms(record.u, 0.0).grad_sq)
    c_f = record.level
    fvals = f.field().values
    rng = rng if rng is not None else SplitMix64(1)
    fdual = 0.0
    for v in _probe_fields(grid, p, rng, n_random=20):
        gnorm = math.sqrt(norms(v, 0.0).grad_sq)
        if gnorm <= 0:
            continue
        fdual = max(fdual, abs(_integrate_vals(grid, fvals * v.values)) / gnorm)
    lhs = (0.5 - 1.0 / (p + 1.0)) * unorm ** 2
    rhs = (c_f + 1.0 + unorm + p / (p + 1.0) * fdual * unorm
           + slack_rel * (1.0 + unorm ** 2))
    return bool(lhs <= rhs)


# --- positivity threshold ----------------------------------------------------


@dataclass(frozen=True)
class ThresholdReport:
    """Bisection record of the largest verified-positive forcing amplitude.

    degenerate=True means every probe up to alpha_max stayed positive (the
    expected outcome for nonnegative profiles), so no finite threshold was
    bracketed and alpha_hat = alpha_max.  non_monotone lists any positive
    probes observed above the first nonpositive one.
    """

    alpha_hat: float
    alpha_max: float
    bracket: tuple[float, float] | None
    degenerate: bool
    probes: tuple[tuple[float, bool, float, float, bool], ...]  # (alpha, converged, level, min_u, positive)
    non_monotone: tuple[float, ...]


def positivity_threshold(grid: RadialGrid, p: float, profile: RadialField,
                         q: float, cfg: MountainPassConfig | None = None,
                         alpha_max: float | None = None,
                         beta: float | None = None,
                         bracket_rel: float = 1e-3,
                         n_scan: int = 5) -> ThresholdReport:
    """Largest verified-positive amplitude below the first nonpositive one.

    The predicate "solve_forced(alpha * profile) converges with a strictly
    positive interior" is probed on a coarse scan of [0, alpha_max]
    (alpha_max defaults to 4*beta, beta from the measured geometry), then
    bisected to a bracket of width bracket_rel * beta.  Monotonicity of
    the predicate in alpha is NOT assumed: the scan logs any positive
    probes above the first nonpositive one, and the reported threshold is
    the largest verified-positive alpha below that first failure.

    Raises NoPositiveSolutionAtZero if the unforced solve is not positive
    (that would mean a broken limit problem, not a threshold).
    """
    if beta is None:
        beta = geometry_constants(grid, p, q).beta
    if alpha_max is None:
        alpha_max = 4.0 * beta
    if np.all(profile.values >= 0):
        logger.info("positivity_threshold called with a nonnegative profile; "
                    "expect a degenerate (all-positive) run")

    probes: list[tuple[float, bool, float, float, bool]] = []

    def probe(alpha: float) -> bool:
        term = ForcingTerm.normalized(profile, alpha, q)
        try:
            rec = solve_forced(grid, p, term, cfg, beta=None)
        except Exception as exc:  # solver failures count as predicate False
            logger.info("threshold probe at alpha=%g failed: %s", alpha, exc)
            probes.append((alpha, False, math.nan, math.nan, False))
            return False
        min_u = float(np.min(rec.u.values[:-1]))
        ok = bool(rec.converged and rec.positive)
        probes.append((alpha, rec.converged, rec.level, min_u, ok))
        return ok

    if not probe(0.0):
        raise NoPositiveSolutionAtZero(
            "the unforced limit problem did not produce a positive solution")

    scan = np.linspace(0.0, alpha_max, max(n_scan, 3))
    results = [True]  # alpha = 0 verified above
    for alpha in scan[1:]:
        results.append(probe(float(alpha)))
    non_monotone = tuple(float(scan[i]) for i in range(len(scan))
                         if results[i] and not all(results[:i]))
    if all(results):
        return ThresholdReport(alpha_hat=float(alpha_max), alpha_max=float(alpha_max),
                               bracket=None, degenerate=True, probes=tuple(probes),
                               non_monotone=non_monotone)
    first_bad = next(i for i, ok in enumerate(results) if not ok)
    lo = float(scan[first_bad - 1])
    hi = float(scan[first_bad])
    while hi - lo > bracket_rel * beta:
        mid = 0.5 * (lo + hi)
        if probe(mid):
            lo = mid
        else:
            hi = mid
    return ThresholdReport(alpha_hat=lo, alpha_max=float(alpha_max),
                           bracket=(lo, hi), degenerate=False,
                           probes=tuple(probes), non_monotone=non_monotone)


# --- vanishing-forcing limit study -------------------------------------------


@dataclass(frozen=True)
class LimitStudyReport:
    """Convergence of forced solutions to the unforced ground state.

    rows: (alpha, sup_dist, c1_dist, level, min_u) per amplitude, ordered
    as given.  f_pairings holds int f_n u_n (first order in alpha);
    forcing_norms holds the L2 norm of f_n, which is exactly the gradient
    gap between the forced and unforced functionals at u_n.
    """

    rows: tuple[tuple[float, float, float, float, float], ...]
    f_pairings: tuple[float, ...]
    forcing_norms: tuple[float, ...]
    unforced_levels: tuple[float, ...]
    u0_record: SolutionRecord


def limit_study(grid: RadialGrid, p: float, profile: RadialField,
                amplitudes, q: float,
                cfg: MountainPassConfig | None = None) -> LimitStudyReport:
    """Solve at each amplitude (decreasing to 0) and compare with alpha = 0.

    Distances to the unforced solution are measured in sup norm and in
    the discrete C^1 metric (max difference of cell difference quotients).
    For each run the unforced energy E(u_n) and the pairing int f_n u_n
    are recorded: E(u_n) = E_f(u_n) + int f_n u_n stays bounded and the
    pairing vanishes linearly in alpha, which is the bounded-PS mechanism
    behind positivity in the vanishing-forcing limit.
    """
    amps = [float(a) for a in amplitudes]
    if any(b >= a for a, b in zip(amps, amps[1:])):
        raise ValueError("amplitudes must be strictly decreasing")
    zero_term = ForcingTerm.normalized(profile, 0.0, q)
    rec0 = solve_forced(grid, p, zero_term, cfg)
    if not (rec0.converged and rec0.positive):
        raise NoPositiveSolutionAtZero("unforced limit solve failed")
    P0 = Problem.forced(grid, p, zero_field(grid))
    rows = []
    pairings = []
    fnorms = []
    ulevels = []
    for alpha in amps:
        term = ForcingTerm.normalized(profile, alpha, q)
        rec = solve_forced(grid, p, term, cfg)
        du = rec.u.values - rec0.u.values
        sup_dist = float(np.max(np.abs(du)))
        c1_dist = float(np.max(np.abs(np.diff(du) / grid.h)))
        min_u = float(np.min(rec.u.values[:-1]))
        rows.append((alpha, sup_dist, c1_dist, rec.level, min_u))
        fvals = term.field().values
        pairings.append(_integrate_vals(grid, fvals * rec.u.values))
        fnorms.append(math.sqrt(_integrate_vals(grid, fvals * fvals)))
        ulevels.append(_energy_vals(P0, rec.u.values, 1.0))
    return LimitStudyReport(rows=tuple(rows), f_pairings=tuple(pairings),
                            forcing_norms=tuple(fnorms),
                            unforced_levels=tuple(ulevels), u0_record=rec0)


# --- CSV export --------------------------------------------------------------


def write_threshold_csv(report: ThresholdReport, path) -> None:
    _write_csv(Path(path),
               ["alpha", "converged", "level", "min_u", "positive"],
               report.probes)


def write_limit_csv(report: LimitStudyReport, path) -> None:
    _write_csv(Path(path),
               ["alpha", "sup_dist", "c1_dist", "level", "min_u"],
               report.rows)
