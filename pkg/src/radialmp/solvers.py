"""Critical-point solvers: mountain-pass descent, radial shooting, Newton.

The mountain-pass routine discretizes a path from 0 to a negative-energy
endpoint, repeatedly pulls the maximal-energy node downhill along the
preconditioned gradient K^{-1} grad E (K = -Lap_h + max(lam,1), solved by
tridiagonal elimination; K is the invertible linear part of the equation,
so the step direction lives in the right geometry), redistributes the
path nodes by arclength every few iterations, and polishes the final
candidate with a damped Newton iteration on the nodal residual.

The radial shooting method is the independent oracle: it integrates the
ODE  u'' + (N-1)/r u' = lam u - g(u)  outward by RK4 from u(0) = d,
u'(0) = 0 and bisects d between trajectories that cross zero and
trajectories that rebound while positive.  On ball grids the same
classification targets the first zero at r = R (Dirichlet ground state);
on truncated grids it converges to the decaying profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .grids import (DomainKind, RadialField, RadialGrid, _grad_sq_vals,
                    _integrate_vals)
from .functional import (Mode, Problem, _energy_vals, _gradient_vals,
                         energy_identity_residual, nehari_residual,
                         pohozaev_residual)
from .nonlinearity import Nonlinearity, lambda_star

_TINY = 1e-300


class EndpointNotFound(Exception):
    """No negative-energy endpoint on the scaling ray (lam too large or data inadmissible)."""


class CollapsedToZero(Exception):
    """The mountain-pass path degenerated onto the zero state."""


class BracketNotFound(Exception):
    """Shooting could not bracket the ground state between crossing and rebound."""


class LambdaOutsideRange(Exception):
    """lam is outside the admissible open interval ]0, lambda*[."""

    def __init__(self, lam: float, lam_star: float):
        self.lam = lam
        self.lam_star = lam_star
        super().__init__(
            f"lam = {lam} is outside the admissible range ]0, {lam_star}[")


@dataclass(frozen=True)
class MountainPassConfig:
    """Tunables for the path-deformation mountain-pass iteration.

    grad_tol applies to the preconditioned-gradient H^1 norm relative to
    the field scale; descent uses Armijo backtracking.  Once the relative
    residual reaches newton_handoff_tol the candidate is handed to the
    Newton polish (whose own basin requirement is about 1e-3), which is
    what normally drives the residual far below grad_tol.
    """

    path_points: int = 41
    max_outer_iters: int = 5000
    grad_tol: float = 1e-8
    descent_init_step: float = 1.0
    descent_shrink: float = 0.5
    descent_sufficient_decrease: float = 1e-4
    reparametrize_every: int = 10
    force_positive: bool = True
    newton_handoff_tol: float = 1e-3
    newton_max_iters: int = 30

    def __post_init__(self):
        if self.path_points < 5:
            raise ValueError("path_points must be at least 5")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")


@dataclass(frozen=True)
class SolutionRecord:
    """A computed critical point with its criticality diagnostics.

    lam holds the forcing amplitude in forced mode.  pohozaev_residual is
    the normalized signed scaling-identity defect (nan outside autonomous
    mode); energy_identity_residual is the signed defect of
    level = |grad u|^2/N (nan outside autonomous mode); nehari_residual
    is the raw E'(u)u pairing.  positive means u_i > 0 at every node
    i = 0..n.  converged implies grad_residual <= grad_tol.
    """

    lam: float
    u: RadialField
    level: float
    grad_residual: float
    pohozaev_residual: float
    nehari_residual: float
    energy_identity_residual: float
    positive: bool
    converged: bool
    iterations: int


# --- tridiagonal machinery -------------------------------------------------


def _operator_bands(grid: RadialGrid, lam: float) -> np.ndarray:
    """Banded (solve_banded layout) matrix of -Lap_h + lam on nodes 0..n."""
    n = grid.n
    h2 = grid.h * grid.h
    ab = np.zeros((3, n + 1))
    ri = grid.r[1:n + 1]
    # superdiagonal ab[0][j] = A[j-1, j]
    ab[0, 1] = -2.0 * grid.N / h2
    ab[0, 2:] = -1.0 / h2 - (grid.N - 1) / (2.0 * grid.h * ri[:-1])
    # diagonal
    ab[1, 0] = 2.0 * grid.N / h2 + lam
    ab[1, 1:] = 2.0 / h2 + lam
    # subdiagonal ab[2][j] = A[j+1, j]
    ab[2, :-1] = -1.0 / h2 + (grid.N - 1) / (2.0 * grid.h * ri)
    return ab


def _solve_shifted(grid: RadialGrid, lam: float, rhs: np.ndarray,
                   diag_shift: np.ndarray | None = None) -> np.ndarray:
    """Solve (-Lap_h + lam + diag_shift) x = rhs on nodes 0..n, Dirichlet tail."""
    ab = _operator_bands(grid, lam)
    if diag_shift is not None:
        ab[1] += diag_shift
    x = np.zeros(grid.n + 2)
    x[:-1] = solve_banded((1, 1), ab, rhs[:-1])
    return x


def _h1_norm_vals(grid: RadialGrid, vals: np.ndarray, kappa: float) -> float:
    return math.sqrt(_grad_sq_vals(grid, vals)
                     + kappa * _integrate_vals(grid, vals * vals))


def _precond_residual(P: Problem, vals: np.ndarray, lam: float,
                      kappa: float) -> tuple[np.ndarray, np.ndarray, float]:
    """(raw gradient, K^{-1} gradient, relative preconditioned residual)."""
    g = _gradient_vals(P, vals, lam)
    d = _solve_shifted(P.grid, kappa, g)
    scale = max(_h1_norm_vals(P.grid, vals, kappa), _TINY)
    return g, d, _h1_norm_vals(P.grid, d, kappa) / scale


# --- endpoint construction --------------------------------------------------


def _bump_profile(grid: RadialGrid) -> np.ndarray:
    rho = min(grid.R / 2.0, 5.0)
    x = np.minimum(grid.r / rho, 1.0)
    vals = (1.0 - x * x) ** 2
    vals[-1] = 0.0
    return vals


def find_endpoint(P: Problem, lam: float = 1.0, max_doublings: int = 60) -> RadialField:
    """Negative-energy endpoint e = t * bump with t doubled from 1.

    The bump is the fixed positive profile (1 - (r/rho)^2)^2, rho =
    min(R/2, 5).  For superquadratic G the doubling always terminates;
    when the quadratic lam-term dominates (saturating g with lam at or
    beyond the admissible threshold, or a narrow truncation radius) no
    multiple of the bump has negative energy and EndpointNotFound is
    raised after max_doublings.
    """
    phi = _bump_profile(P.grid)
    t = 1.0
    for _ in range(max_doublings):
        vals = t * phi
        if _energy_vals(P, vals, lam) < 0.0:
            return RadialField(P.grid, vals)
        t *= 2.0
    raise EndpointNotFound(
        f"no negative-energy endpoint after {max_doublings} doublings "
        f"(lam = {lam} may be at or beyond the admissible threshold)")


# --- Newton refinement -------------------------------------------------------


def newton_refine(P: Problem, u: RadialField, lam: float = 1.0,
                  max_iters: int = 30, tol: float = 1e-12) -> RadialField:
    """Damped Newton on the nodal residual, tridiagonal Jacobian.

    The Jacobian is -Lap_h + lam - V g'(u) (forced mode: -Lap_h - g'(u)).
    Best-effort: if the residual grows for 5 consecutive damped attempts
    the input is returned unchanged.  tol is relative to the field scale.
    """
    grid = P.grid
    vals = u.values.copy()
    res = _gradient_vals(P, vals, lam)

    def rnorm(r, v):
        return (math.sqrt(_integrate_vals(grid, r * r))
                / max(1.0, _h1_norm_vals(grid, v, max(lam, 1.0) if P.lam_family else 1.0)))

    best_vals, best_norm = vals.copy(), rnorm(res, vals)
    bad_streak = 0
    for _ in range(max_iters):
        if best_norm <= tol:
            break
        lam_eff = lam if P.lam_family else 0.0
        gp = P.nl.gprime(vals)
        if P._vvals is not None:
            gp = gp * P._vvals
        step = _solve_shifted(grid, lam_eff, res, diag_shift=-gp[:-1])
        sigma, accepted = 1.0, False
        for _ in range(25):
            trial = vals - sigma * step
            trial[-1] = 0.0
            tres = _gradient_vals(P, trial, lam)
            tnorm = rnorm(tres, trial)
            if tnorm < best_norm:
                vals, res, best_norm = trial, tres, tnorm
                best_vals = trial
                accepted = True
                break
            sigma *= 0.5
        if accepted:
            bad_streak = 0
        else:
            bad_streak += 1
            if bad_streak >= 5:
                return u  # divergence: hand the input back unchanged
            break
    return RadialField(grid, best_vals)


# --- mountain pass -----------------------------------------------------------


def _reparametrize(path: list[np.ndarray], grid: RadialGrid, kappa: float) -> list[np.ndarray]:
    """Redistribute interior nodes at uniform H^1 chordal arclength."""
    m = len(path)
    seg = np.empty(m - 1)
    for k in range(m - 1):
        seg[k] = _h1_norm_vals(grid, path[k + 1] - path[k], kappa)
    total = float(seg.sum())
    if total <= 0:
        return path
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    targets = np.linspace(0.0, total, m)
    out = [path[0]]
    j = 0
    for s in targets[1:-1]:
        while j < m - 2 and cum[j + 1] < s:
            j += 1
        w = 0.0 if seg[j] == 0 else (s - cum[j]) / seg[j]
        out.append((1.0 - w) * path[j] + w * path[j + 1])
    out.append(path[-1])
    return out


def _scale_to_negative(P: Problem, lam: float, w: np.ndarray,
                       max_doublings: int = 60) -> np.ndarray:
    t = 1.0
    for _ in range(max_doublings):
        vals = t * w
        if _energy_vals(P, vals, lam) < 0.0:
            return vals
        t *= 2.0
    raise EndpointNotFound("warm-start ray never reaches negative energy")


def _make_record(P: Problem, vals: np.ndarray, lam: float, iterations: int,
                 cfg: MountainPassConfig) -> SolutionRecord:
    u = RadialField(P.grid, vals)
    kappa = max(lam, 1.0) if P.lam_family else 1.0
    _, _, rel = _precond_residual(P, vals, lam, kappa)
    level = _energy_vals(P, vals, lam)
    if P.mode is Mode.AUTONOMOUS:
        poh = pohozaev_residual(P, u, lam, normalized=True)
        eid = energy_identity_residual(P, u, lam)
    else:
        poh = math.nan
        eid = math.nan
    neh = nehari_residual(P, u, lam)
    positive = bool(np.all(vals[:-1] > 0.0))
    return SolutionRecord(lam=lam, u=u, level=level, grad_residual=rel,
                          pohozaev_residual=poh, nehari_residual=neh,
                          energy_identity_residual=eid, positive=positive,
                          converged=rel <= cfg.grad_tol, iterations=iterations)


def _check_lambda_admissible(P: Problem, lam: float) -> None:
    if not P.lam_family:
        return
    if lam <= 0:
        raise LambdaOutsideRange(lam, math.inf)
    star = lambda_star(P.nl).value
    if lam >= star - 1e-9:
        raise LambdaOutsideRange(lam, star)


def mountain_pass(P: Problem, lam: float = 1.0,
                  cfg: MountainPassConfig | None = None,
                  warm_start: RadialField | None = None) -> SolutionRecord:
    """Mountain-pass critical point of the problem's functional.

    Cold start: the path is the segment from 0 to find_endpoint's bump
    multiple.  Warm start: the path is the ray through warm_start,
    rescaled until the far end has negative energy, so a nearby solution
    seeds the pass region directly.

    In lam-family modes, lam must lie strictly inside ]0, lambda*[ (a
    1e-9 guard band is enforced) and, with force_positive set, descent
    runs on the functional with g replaced by its positive-part variant;
    diagnostics are always evaluated with the original nonlinearity.

    Returns a SolutionRecord (converged=False rather than raising when
    the iteration budget runs out); raises CollapsedToZero if the active
    path node degenerates to the zero state.
    """
    cfg = cfg or MountainPassConfig()
    _check_lambda_admissible(P, lam)

    P_solve = P
    if P.lam_family and cfg.force_positive:
        P_solve = P.with_nonlinearity(P.nl.positive_part())

    kappa = max(lam, 1.0) if P.lam_family else 1.0
    if warm_start is not None:
        end_vals = _scale_to_negative(P_solve, lam, warm_start.values)
    else:
        end_vals = find_endpoint(P_solve, lam).values

    m = cfg.path_points
    ts = np.linspace(0.0, 1.0, m)
    path = [t * end_vals for t in ts]
    energies = np.array([_energy_vals(P_solve, z, lam) for z in path])

    iters = 0
    handoff = max(cfg.newton_handoff_tol, cfg.grad_tol)
    attempt_tol = max(handoff, 3e-2)
    newton_attempted = False
    accepted_vals = None
    while iters < cfg.max_outer_iters:
        jmax = 1 + int(np.argmax(energies[1:-1]))  # ties: lowest index
        u_star = path[jmax]
        grad_vals, d, rel = _precond_residual(P_solve, u_star, lam, kappa)
        if rel <= attempt_tol and not newton_attempted:
            # the node looks close enough for the Newton basin: try the
            # polish now; accept only a nontrivial critical point whose
            # level is commensurate with the current path maximum
            newton_attempted = True  # one attempt per redistribution cycle
            cand = newton_refine(P_solve, RadialField(P.grid, u_star), lam,
                                 max_iters=cfg.newton_max_iters)
            _, _, crel = _precond_residual(P_solve, cand.values, lam, kappa)
            if crel <= cfg.grad_tol:
                lvl = _energy_vals(P_solve, cand.values, lam)
                nodal_max = float(energies.max())
                nontrivial = (_h1_norm_vals(P.grid, cand.values, kappa)
                              > 1e-6 * max(_h1_norm_vals(P.grid, u_star, kappa), _TINY))
                window_ok = (0.2 * nodal_max < lvl < 2.0 * nodal_max
                             if nodal_max > 0 else lvl > 0)
                if nontrivial and window_ok:
                    accepted_vals = cand.values
                    break
        if rel <= handoff:
            break
        slope = _integrate_vals(P.grid, grad_vals * d)
        if not slope > 0:  # preconditioner lost positivity; fall back to L2 descent
            d, slope = grad_vals, _integrate_vals(P.grid, grad_vals * grad_vals)
        # trust cap: never move further than half the neighbor chord, so the
        # node cannot be flung across the pass into the far basin
        d_len = _h1_norm_vals(P.grid, d, kappa)
        chord = max(_h1_norm_vals(P.grid, path[jmax + 1] - u_star, kappa),
                    _h1_norm_vals(P.grid, u_star - path[jmax - 1], kappa))
        sigma = cfg.descent_init_step
        if d_len > 0 and chord > 0:
            sigma = min(sigma, 0.5 * chord / d_len)
        e_old = energies[jmax]
        moved = False
        while sigma > 1e-16:
            trial = u_star - sigma * d
            trial[-1] = 0.0
            e_new = _energy_vals(P_solve, trial, lam)
            if e_new <= e_old - cfg.descent_sufficient_decrease * sigma * slope:
                path[jmax] = trial
                energies[jmax] = e_new
                moved = True
                break
            sigma *= cfg.descent_shrink
        iters += 1
        if not moved:
            break  # descent stalled; let Newton take over from here
        if _h1_norm_vals(P.grid, path[jmax], kappa) < 1e-10:
            raise CollapsedToZero(
                "max-energy path node collapsed onto 0; the path degenerated")
        if cfg.reparametrize_every > 0 and iters % cfg.reparametrize_every == 0:
            # redistribution re-samples the chords (and may reveal a higher
            # true path maximum); always accept it
            path = _reparametrize(path, P.grid, kappa)
            energies = np.array([_energy_vals(P_solve, z, lam) for z in path])
            newton_attempted = False

    if accepted_vals is not None:
        vals = accepted_vals
    else:
        jmax = 1 + int(np.argmax(energies[1:-1]))
        refined = newton_refine(P_solve, RadialField(P.grid, path[jmax]), lam,
                                max_iters=cfg.newton_max_iters)
        vals = refined.values
    if P.lam_family and vals[0] < 0.0:
        vals = -vals  # sign normalization for odd nonlinearities
    return _make_record(P, vals, lam, iters, cfg)


# --- shooting oracle ---------------------------------------------------------

_CROSSING = 0
_REBOUND = 1


def _shoot(N: int, lam: float, nl: Nonlinearity, d: float, steps: int,
           h_ode: float, keep: bool):
    """Integrate u'' + (N-1)/r u' = lam u - g(u) from (d, 0) by RK4.

    Returns (kind, trace) where trace is the list of u values at the
    RK4 nodes (only when keep=True) up to and including the first step
    where the trajectory crossed zero or rebounded.
    """
    g = nl.scalar_g()
    Nm1 = N - 1.0

    def f(r, u, v):
        if r == 0.0:
            return v, (lam * u - g(u)) / N
        return v, lam * u - g(u) - Nm1 / r * v

    u, v, r = float(d), 0.0, 0.0
    trace = [u] if keep else None
    half = 0.5 * h_ode
    sixth = h_ode / 6.0
    for _ in range(steps):
        k1u, k1v = f(r, u, v)
        k2u, k2v = f(r + half, u + half * k1u, v + half * k1v)
        k3u, k3v = f(r + half, u + half * k2u, v + half * k2v)
        k4u, k4v = f(r + h_ode, u + h_ode * k3u, v + h_ode * k3v)
        u += sixth * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        v += sixth * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        r += h_ode
        if keep:
            trace.append(u)
        if u <= 0.0:
            return _CROSSING, trace
        if v > 0.0 or u > 10.0 * d:
            return _REBOUND, trace
    return _REBOUND, trace  # reached R still positive


def shooting_ground_state(N: int, lam: float, nl: Nonlinearity,
                          grid: RadialGrid, d_lo: float = 1e-4,
                          d_hi: float = 1e4, rtol: float = 1e-12) -> RadialField:
    """Ground-state profile by overshoot/undershoot bisection, sampled on grid.

    Trajectories from u(0) = d are classified as Crossing (u reaches 0
    before R) or Rebound (u' turns positive while u > 0, or the
    trajectory survives to R); the ground-state height sits between a
    Rebound and a Crossing initial value.  Bisection runs until the
    bracket is rtol-relative tight; past the point where the final
    trajectory disagrees with the decaying solution, the profile is
    continued by the linearized tail u(r_c) (r_c/r)^((N-1)/2)
    exp(-sqrt(lam)(r - r_c)) (truncated grids; on ball grids the
    trajectory is used up to its zero and clamped beyond).

    Raises BracketNotFound when no (Rebound, Crossing) pair exists in
    [d_lo, d_hi] (e.g. lam at or beyond the admissible threshold).
    """
    # ODE step: an exact divisor of the grid spacing so nodes align
    sub = max(2, int(math.ceil(grid.h / 5e-3)))
    h_ode = grid.h / sub
    steps = (grid.n + 1) * sub

    # bracket scan on a log grid of initial heights
    n_scan = int(4 * math.log10(d_hi / d_lo)) + 1
    ds = np.logspace(math.log10(d_lo), math.log10(d_hi), n_scan)
    kinds = []
    bracket = None
    for k, d in enumerate(ds):
        kind, _ = _shoot(N, lam, nl, float(d), steps, h_ode, keep=False)
        kinds.append(kind)
        if k > 0 and kinds[k - 1] == _REBOUND and kind == _CROSSING:
            bracket = (float(ds[k - 1]), float(d))
            break
    if bracket is None:
        raise BracketNotFound(
            f"no rebound/crossing bracket for lam = {lam} in [{d_lo}, {d_hi}]")

    lo, hi = bracket
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        kind, _ = _shoot(N, lam, nl, mid, steps, h_ode, keep=False)
        if kind == _CROSSING:
            hi = mid
        else:
            lo = mid

    d_final = 0.5 * (lo + hi)
    _, trace = _shoot(N, lam, nl, d_final, steps, h_ode, keep=True)
    u_ode = np.array(trace)

    # locate where the trajectory stops following the decaying solution
    full = np.zeros(steps + 1)
    ncut = len(u_ode)
    if u_ode[-1] <= 0.0 or (ncut > 1 and u_ode[-1] > u_ode[-2]):
        ncut -= 1
    full[:ncut] = u_ode[:ncut]
    if ncut < len(full):
        r_c = (ncut - 1) * h_ode
        u_c = u_ode[ncut - 1]
        if grid.kind is DomainKind.TRUNCATED_SPACE and lam > 0 and u_c > 0 and r_c > 0:
            rr = h_ode * np.arange(ncut, len(full))
            full[ncut:] = u_c * (r_c / rr) ** ((N - 1) / 2.0) * np.exp(
                -math.sqrt(lam) * (rr - r_c))
        # ball grids: the crossing is the Dirichlet boundary; clamp at zero
    vals = full[::sub].copy()
    vals[-1] = 0.0
    return RadialField(grid, np.maximum(vals, 0.0) if grid.kind is DomainKind.BALL else vals)
