"""Nonlinear terms g with primitive G, superlinearity checks, and potentials.

Three closed families are supported, chosen so that every structural
hypothesis used by the solvers (superlinearity at the origin, subcritical
growth, sign of G, Ambrosetti-Rabinowitz superquadraticity) is decidable
symbolically or by safe sampling:

    PowerSum:          g(s) = sum_k a_k |s|^(p_k - 1) s,     p_k > 1
    SaturatingCubic:   g(s) = s^3 / (1 + s^2)
    PositivePartPower: g(s) = s^p for s >= 0, 0 for s <= 0,  p > 1

G is always the exact closed-form primitive with G(0) = 0.  Arbitrary
user callables are deliberately not supported: the hypothesis checks
would be undecidable for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize

from .grids import RadialField, RadialGrid


class HypothesisViolation(Exception):
    """Raised when a nonlinearity fails a structural requirement."""


class NonAdmissiblePotential(Exception):
    """Raised when a potential is negative somewhere or identically zero."""


class Nonlinearity:
    """Interface for g/G pairs; subclasses are immutable value types."""

    def g(self, s):
        raise NotImplementedError

    def G(self, s):
        raise NotImplementedError

    def gprime(self, s):
        raise NotImplementedError

    def positive_part(self) -> "Nonlinearity":
        """Variant with g replaced by g(s^+) (zero for s <= 0)."""
        return _PositivePartOf(self)

    def scalar_g(self) -> Callable[[float], float]:
        """Fast float->float version of g for ODE inner loops."""
        return lambda s: float(self.g(s))

    @property
    def pure_power_exponent(self) -> float | None:
        """p if g(s) = a |s|^(p-1) s with a > 0, else None."""
        return None


@dataclass(frozen=True)
class PowerSum(Nonlinearity):
    """g(s) = sum a_k |s|^(p_k - 1) s with every p_k > 1, sorted ascending."""

    terms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        terms = tuple((float(a), float(p)) for a, p in self.terms)
        if not terms:
            raise ValueError("PowerSum needs at least one (coefficient, exponent) term")
        for a, p in terms:
            if not p > 1:
                raise ValueError(f"PowerSum exponents must satisfy p > 1, got {p}")
            if a == 0:
                raise ValueError("PowerSum coefficients must be nonzero")
        object.__setattr__(self, "terms", tuple(sorted(terms, key=lambda t: t[1])))

    def g(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for a, p in self.terms:
            out += a * np.abs(s) ** (p - 1) * s
        return out if out.ndim else float(out)

    def G(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for a, p in self.terms:
            out += a * np.abs(s) ** (p + 1) / (p + 1)
        return out if out.ndim else float(out)

    def gprime(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for a, p in self.terms:
            out += a * p * np.abs(s) ** (p - 1)
        return out if out.ndim else float(out)

    def scalar_g(self):
        terms = self.terms
        if len(terms) == 1:
            a, p = terms[0]
            q = p - 1.0

            def g1(s: float) -> float:
                return a * abs(s) ** q * s
            return g1

        def gm(s: float) -> float:
            t = abs(s)
            return s * sum(a * t ** (p - 1.0) for a, p in terms)
        return gm

    @property
    def all_positive(self) -> bool:
        return all(a > 0 for a, _ in self.terms)

    @property
    def pure_power_exponent(self) -> float | None:
        if len(self.terms) == 1 and self.terms[0][0] > 0:
            return self.terms[0][1]
        return None


def pure_power(p: float, a: float = 1.0) -> PowerSum:
    """Convenience constructor for g(s) = a |s|^(p-1) s."""
    return PowerSum(((a, p),))


@dataclass(frozen=True)
class SaturatingCubic(Nonlinearity):
    """g(s) = s^3/(1+s^2): cubic at the origin, asymptotically linear.

    G(s) = (s^2 - log(1+s^2))/2.  The superquadraticity ratio
    g(s)s/G(s) decreases from 4 to 2, so no mu > 2 works: the
    Ambrosetti-Rabinowitz condition fails for this family.
    """

    def g(self, s):
        s = np.asarray(s, dtype=float)
        out = s ** 3 / (1.0 + s * s)
        return out if out.ndim else float(out)

    def G(self, s):
        s = np.asarray(s, dtype=float)
        out = 0.5 * (s * s - np.log1p(s * s))
        return out if out.ndim else float(out)

    def gprime(self, s):
        s = np.asarray(s, dtype=float)
        s2 = s * s
        out = (3.0 * s2 + s2 * s2) / (1.0 + s2) ** 2
        return out if out.ndim else float(out)

    def scalar_g(self):
        def g(s: float) -> float:
            return s * s * s / (1.0 + s * s)
        return g


@dataclass(frozen=True)
class PositivePartPower(Nonlinearity):
    """g(s) = s^p for s >= 0 and 0 for s <= 0, with p > 1."""

    p: float

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"PositivePartPower needs p > 1, got {self.p}")

    def g(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where(s > 0, np.maximum(s, 0.0) ** self.p, 0.0)
        return out if out.ndim else float(out)

    def G(self, s):
        s = np.asarray(s, dtype=float)
        out = np.maximum(s, 0.0) ** (self.p + 1) / (self.p + 1)
        return out if out.ndim else float(out)

    def gprime(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where(s > 0, self.p * np.maximum(s, 0.0) ** (self.p - 1), 0.0)
        return out if out.ndim else float(out)

    def scalar_g(self):
        p = self.p

        def g(s: float) -> float:
            return s ** p if s > 0.0 else 0.0
        return g

    def positive_part(self) -> "Nonlinearity":
        return self


@dataclass(frozen=True)
class _PositivePartOf(Nonlinearity):
    base: Nonlinearity

    def g(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where(s > 0, self.base.g(np.maximum(s, 0.0)), 0.0)
        return out if out.ndim else float(out)

    def G(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where(s > 0, self.base.G(np.maximum(s, 0.0)), 0.0)
        return out if out.ndim else float(out)

    def gprime(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where(s > 0, self.base.gprime(np.maximum(s, 0.0)), 0.0)
        return out if out.ndim else float(out)

    def positive_part(self) -> "Nonlinearity":
        return self


def eval_g(nl: Nonlinearity, s):
    return nl.g(s)


def eval_G(nl: Nonlinearity, s):
    return nl.G(s)


# --- potentials -----------------------------------------------------------


class Potential:
    """Radial weight V(r) >= 0, not identically zero."""

    decays_at_infinity: bool = False

    def sample(self, grid: RadialGrid) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class One(Potential):
    """V = 1 (the autonomous case)."""

    def sample(self, grid: RadialGrid) -> np.ndarray:
        return np.ones(grid.n + 2)


@dataclass(frozen=True, eq=False)
class RadialProfile(Potential):
    """V given by a radial callable, with decay-at-infinity metadata."""

    fn: Callable[[np.ndarray], np.ndarray]
    decays_at_infinity: bool = False

    def sample(self, grid: RadialGrid) -> np.ndarray:
        vals = np.asarray(self.fn(grid.r), dtype=float)
        if vals.ndim == 0:
            vals = np.full(grid.n + 2, float(vals))
        return vals


ONE = One()


def eval_potential(V: Potential, grid: RadialGrid) -> RadialField:
    """Nodal samples of V; rejects negative samples and V identically 0."""
    vals = V.sample(grid)
    if np.any(vals < 0):
        raise NonAdmissiblePotential("potential takes negative values on the grid")
    if not np.any(vals > 0):
        raise NonAdmissiblePotential("potential is identically zero on the grid")
    return RadialField(grid, vals)


# --- hypothesis checks ----------------------------------------------------


@dataclass(frozen=True)
class HypothesisReport:
    """Outcome of the structural checks for a nonlinearity in dimension N.

    h1: g(s)/s -> 0 at the origin (superlinearity).
    h2: g(s)/|s|^p_used -> 0 at infinity for the reported witness exponent.
    h3: G takes a positive value at some s0 > 0.
    h4: Ambrosetti-Rabinowitz 0 < mu G(s) <= g(s) s for some mu > 2;
        one of "holds" (with mu), "fails", "unknown".
    subcritical: p_used < (N+2)/(N-2) strictly.
    """

    h1: bool
    h2: bool
    p_used: float
    h3: bool
    h4: str
    mu: float | None
    subcritical: bool


_H3_SAMPLES = np.logspace(-3, 3, 241)


def check_hypotheses(nl: Nonlinearity, N: int) -> HypothesisReport:
    """Decide (superlinearity, growth, sign, superquadraticity) for nl.

    PowerSum with positive coefficients and PositivePartPower are decided
    in closed form; the sign condition for mixed-sign PowerSum is decided
    by sampling G on a log grid of s0 in [1e-3, 1e3] (a semi-decision:
    the paper-level condition quantifies over all s0 > 0).
    """
    if N < 3:
        raise ValueError(f"dimension N must be >= 3, got {N}")
    crit = (N + 2) / (N - 2)
    if isinstance(nl, PowerSum):
        p_min = nl.terms[0][1]
        p_max = nl.terms[-1][1]
        h1 = p_min > 1
        if nl.all_positive:
            h3 = True
            h4, mu = "holds", 1.0 + p_min
        else:
            h3 = bool(np.any(nl.G(_H3_SAMPLES) > 0))
            h4, mu = "unknown", None
        return HypothesisReport(h1=h1, h2=True, p_used=p_max, h3=h3,
                                h4=h4, mu=mu, subcritical=p_max < crit)
    if isinstance(nl, SaturatingCubic):
        # g is asymptotically linear, so any exponent in ]1, crit[ witnesses
        # the decay at infinity; report the midpoint of the admissible range
        p_used = 0.5 * (1.0 + crit)
        return HypothesisReport(h1=True, h2=True, p_used=p_used, h3=True,
                                h4="fails", mu=None, subcritical=p_used < crit)
    if isinstance(nl, PositivePartPower):
        return HypothesisReport(h1=True, h2=True, p_used=nl.p, h3=True,
                                h4="holds", mu=nl.p + 1.0,
                                subcritical=nl.p < crit)
    raise TypeError(f"unsupported nonlinearity {type(nl).__name__}")


# --- admissible frequency threshold ---------------------------------------


class LambdaStar(NamedTuple):
    """sup_{nu>0} 2 G(nu)/nu^2, with attainment metadata."""

    value: float
    attained: bool


def lambda_star(nl: Nonlinearity) -> LambdaStar:
    """Threshold lambda* below which the zero state can be undercut.

    lambda* = sup_{nu > 0} 2 G(nu)/nu^2.  When G has a positive
    superquadratic leading term the sup is +inf (symbolic shortcut);
    otherwise it is located by a log-grid scan over nu in [1e-6, 1e6]
    refined by bounded scalar maximization.  Raises HypothesisViolation
    if G <= 0 at every sampled nu (no positive value of G exists there).
    """
    if isinstance(nl, PositivePartPower):
        return LambdaStar(math.inf, False)
    if isinstance(nl, PowerSum) and nl.terms[-1][0] > 0:
        # leading exponent p_max > 1 with positive coefficient:
        # 2 G(nu)/nu^2 ~ nu^(p_max - 1) -> infinity
        return LambdaStar(math.inf, False)

    def q(nu: float) -> float:
        return 2.0 * nl.G(nu) / (nu * nu)

    grid = np.logspace(-6, 6, 1201)
    vals = np.array([q(nu) for nu in grid])
    if not np.any(vals > 0):
        raise HypothesisViolation(
            "G is nonpositive at every sampled point; no admissible threshold")
    k = int(np.argmax(vals))
    if k == 0 or k == len(grid) - 1:
        # sup approached at the edge of the search range: not attained
        return LambdaStar(float(vals[k]), False)
    res = optimize.minimize_scalar(lambda x: -q(math.exp(x)),
                                   bounds=(math.log(grid[k - 1]), math.log(grid[k + 1])),
                                   method="bounded",
                                   options={"xatol": 1e-12})
    best = max(float(vals[k]), float(-res.fun))
    return LambdaStar(best, True)
