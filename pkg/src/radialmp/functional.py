"""Discrete energy functionals, gradients, and criticality diagnostics.

Three problem modes share one Problem record:

    AUTONOMOUS:  E_lam(u) = 1/2 (|grad u|^2 + lam |u|^2) - int G(u)
    WEIGHTED:    E_lam(u) = 1/2 (|grad u|^2 + lam |u|^2) - int V G(u)
    FORCED:      E_f(u)   = 1/2 |grad u|^2 - int G(u) - int f u
                 (ball domain, g(s) = (s^+)^p)

Gradients are strong-form nodal residuals (-Lap_h u + lam u - V g(u),
resp. -Lap_h u - g(u) - f); the pairing integrate(gradient * v) matches
the directional derivative of the energy up to the O(h) discrete
weak/strong mismatch.  The lam-family energies split exactly as
E_lam = A - lam*B with A(u) = 1/2 |grad u|^2 - int V G(u) and
B(u) = -1/2 |u|^2, which makes the level/gradient transfer between
different lam values exact algebra rather than re-evaluation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .grids import (DomainKind, RadialField, RadialGrid, _apply_operator_vals,
                    _grad_sq_vals, _integrate_vals, norms)
from .nonlinearity import (ONE, Nonlinearity, One, PositivePartPower,
                           Potential, eval_potential)


class Mode(enum.Enum):
    AUTONOMOUS = "autonomous"
    WEIGHTED = "weighted"
    FORCED = "forced"


@dataclass(frozen=True, eq=False)
class Problem:
    """A grid + nonlinearity + potential/forcing bundle with mode invariants.

    AUTONOMOUS requires V = One; FORCED requires a ball grid, a
    PositivePartPower nonlinearity, and a forcing field; WEIGHTED requires
    an admissible potential (V >= 0, V != 0 on the grid).
    """

    grid: RadialGrid
    nl: Nonlinearity
    potential: Potential
    mode: Mode
    forcing: RadialField | None = None

    def __post_init__(self):
        if self.mode is Mode.AUTONOMOUS:
            if not isinstance(self.potential, One):
                raise ValueError("autonomous mode requires the unit potential")
            vvals = None
        elif self.mode is Mode.WEIGHTED:
            vvals = eval_potential(self.potential, self.grid).values
            if isinstance(self.potential, One):
                vvals = None  # weighted with V=1 degenerates to autonomous algebra
        elif self.mode is Mode.FORCED:
            if self.grid.kind is not DomainKind.BALL:
                raise ValueError("forced mode requires a ball grid")
            if not isinstance(self.nl, PositivePartPower):
                raise ValueError("forced mode requires a PositivePartPower nonlinearity")
            if self.forcing is None:
                raise ValueError("forced mode requires a forcing field")
            if self.forcing.grid is not self.grid:
                raise ValueError("forcing field lives on a different grid")
            vvals = None
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode is not Mode.FORCED and self.forcing is not None:
            raise ValueError("forcing is only meaningful in forced mode")
        object.__setattr__(self, "_vvals", vvals)

    @classmethod
    def autonomous(cls, grid: RadialGrid, nl: Nonlinearity) -> "Problem":
        return cls(grid, nl, ONE, Mode.AUTONOMOUS)

    @classmethod
    def weighted(cls, grid: RadialGrid, nl: Nonlinearity, V: Potential) -> "Problem":
        return cls(grid, nl, V, Mode.WEIGHTED)

    @classmethod
    def forced(cls, grid: RadialGrid, p: float, f: RadialField) -> "Problem":
        return cls(grid, PositivePartPower(p), ONE, Mode.FORCED, forcing=f)

    @property
    def lam_family(self) -> bool:
        return self.mode is not Mode.FORCED

    def with_nonlinearity(self, nl: Nonlinearity) -> "Problem":
        return Problem(self.grid, nl, self.potential, self.mode, self.forcing)


class EnergySplit(NamedTuple):
    a_part: float
    b_part: float


def _check_lam(P: Problem, lam: float) -> None:
    if P.lam_family and not lam > 0:
        raise ValueError(f"lam must be positive in lam-family modes, got {lam}")


def _weighted_G_integral(P: Problem, vals: np.ndarray) -> float:
    G = P.nl.G(vals)
    if P._vvals is not None:
        G = G * P._vvals
    return _integrate_vals(P.grid, G)


def _energy_vals(P: Problem, vals: np.ndarray, lam: float) -> float:
    grid = P.grid
    grad_sq = _grad_sq_vals(grid, vals)
    if P.mode is Mode.FORCED:
        return (0.5 * grad_sq
                - _integrate_vals(grid, P.nl.G(vals))
                - _integrate_vals(grid, P.forcing.values * vals))
    l2_sq = _integrate_vals(grid, vals * vals)
    return 0.5 * (grad_sq + lam * l2_sq) - _weighted_G_integral(P, vals)


def energy(P: Problem, u: RadialField, lam: float = 1.0) -> float:
    """Value of the mode's functional at u (lam ignored in forced mode)."""
    _check_lam(P, lam)
    return _energy_vals(P, u.values, lam)


def _gradient_vals(P: Problem, vals: np.ndarray, lam: float) -> np.ndarray:
    if P.mode is Mode.FORCED:
        out = _apply_operator_vals(P.grid, vals, 0.0)
        out[:-1] -= P.nl.g(vals[:-1]) + P.forcing.values[:-1]
        return out
    out = _apply_operator_vals(P.grid, vals, lam)
    gv = P.nl.g(vals[:-1])
    if P._vvals is not None:
        gv = gv * P._vvals[:-1]
    out[:-1] -= gv
    return out


def gradient(P: Problem, u: RadialField, lam: float = 1.0) -> RadialField:
    """Strong-form nodal residual of the mode's Euler-Lagrange equation."""
    _check_lam(P, lam)
    return RadialField(P.grid, _gradient_vals(P, u.values, lam))


def ab_split(P: Problem, u: RadialField) -> EnergySplit:
    """Exact split E_lam(u) = a_part - lam * b_part for lam-family modes.

    a_part = 1/2 |grad u|^2 - int V G(u),  b_part = -1/2 |u|^2.
    Both terms take bounded field sets to bounded number sets by
    construction.  Rejected in forced mode.
    """
    if not P.lam_family:
        raise ValueError("ab_split is undefined in forced mode")
    grad_sq, l2_sq, _ = norms(u, 0.0)
    a_part = 0.5 * grad_sq - _weighted_G_integral(P, u.values)
    return EnergySplit(a_part, -0.5 * l2_sq)


def transfer_level(P: Problem, u: RadialField, lam_from: float, lam_to: float) -> float:
    """E_{lam_to}(u) from E_{lam_from}(u) without re-evaluating int V G(u).

    Exact identity: E_to = E_from + (lam_from - lam_to) * b_part(u).
    """
    _check_lam(P, lam_from)
    _check_lam(P, lam_to)
    b_part = -0.5 * _integrate_vals(P.grid, u.values * u.values)
    return _energy_vals(P, u.values, lam_from) + (lam_from - lam_to) * b_part


def transfer_gradient(P: Problem, u: RadialField, lam_from: float, lam_to: float) -> RadialField:
    """grad E_{lam_to}(u) = grad E_{lam_from}(u) + (lam_to - lam_from) u, exactly."""
    _check_lam(P, lam_from)
    _check_lam(P, lam_to)
    out = _gradient_vals(P, u.values, lam_from) + (lam_to - lam_from) * u.values
    out[-1] = 0.0
    return RadialField(P.grid, out)


def pohozaev_residual(P: Problem, u: RadialField, lam: float,
                      normalized: bool = False) -> float:
    """Signed defect of the scaling identity for the autonomous equation.

    residual = (N-2) |grad u|^2 - 2N [ -(lam/2) |u|^2 + int G(u) ];
    it vanishes (to discretization accuracy) at critical points of the
    autonomous functional.  The normalized variant divides by
    (N-2)|grad u|^2 + |2N [...]|.  Only defined in autonomous mode: the
    identity in this form requires V = 1.
    """
    if P.mode is not Mode.AUTONOMOUS:
        raise ValueError("the Pohozaev residual is only defined in autonomous mode")
    _check_lam(P, lam)
    N = P.grid.N
    grad_sq, l2_sq, _ = norms(u, 0.0)
    volume_term = 2.0 * N * (-0.5 * lam * l2_sq
                             + _integrate_vals(P.grid, P.nl.G(u.values)))
    res = (N - 2) * grad_sq - volume_term
    if not normalized:
        return res
    denom = (N - 2) * grad_sq + abs(volume_term)
    return res / denom if denom > 0 else 0.0


def energy_identity_residual(P: Problem, u: RadialField, lam: float) -> float:
    """Signed defect of E_lam(u) = |grad u|^2 / N (autonomous critical points)."""
    if P.mode is not Mode.AUTONOMOUS:
        raise ValueError("the energy identity is only defined in autonomous mode")
    _check_lam(P, lam)
    grad_sq = norms(u, 0.0).grad_sq
    return _energy_vals(P, u.values, lam) - grad_sq / P.grid.N


def nehari_residual(P: Problem, u: RadialField, lam: float = 1.0) -> float:
    """integrate(gradient(u, lam) * u): the discrete E'(u)u pairing."""
    gvals = _gradient_vals(P, u.values, lam)
    return _integrate_vals(P.grid, gvals * u.values)


def growth_bound_check(nl: Nonlinearity, N: int, delta: float,
                       n_samples: int = 2000) -> float:
    """Smallest sampled C_delta with |g(s)| <= delta |s| + C_delta |s|^crit.

    crit = (N+2)/(N-2).  Scans a log grid of |s| in [1e-8, 1e8]; intended
    as a sanity diagnostic for the subcritical growth of g, not for use
    inside solvers.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    crit = (N + 2) / (N - 2)
    s = np.logspace(-8, 8, n_samples)
    excess = np.abs(np.asarray(nl.g(s))) - delta * s
    ratio = np.where(excess > 0, excess / s ** crit, 0.0)
    return float(np.max(ratio))
