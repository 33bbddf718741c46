"""Radial grids, fields, and the discrete radial Laplacian.

A radially symmetric function on R^N (truncated at r = R) or on the ball
B_R is represented by its values on the uniform mesh

    r_i = i*h,  i = 0 .. n+1,  h = R/(n+1).

Node n+1 carries the homogeneous Dirichlet condition; node 0 sits at the
origin, where regularity (u'(0) = 0) is enforced by the Laplacian stencil
rather than stored.

Integrals of radial functions are computed as

    integrate(w) = omega * int_0^R w(r) r^(N-1) dr,
    omega = 2 * pi^(N/2) / Gamma(N/2),

by the composite trapezoid rule on the nodes, so computed energies are
genuine values of the continuum functionals, not rescalings.  Gradient
seminorms use midpoint difference quotients, one per mesh cell.

All grids and fields are immutable after construction (the backing numpy
arrays are marked read-only); every operation is a pure function of its
inputs and safe for concurrent use.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np


class DomainKind(enum.Enum):
    """Whether the mesh truncates all of R^N or discretizes a ball."""

    TRUNCATED_SPACE = "truncated_space"
    BALL = "ball"


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform radial mesh on [0, R] with Dirichlet truncation at R.

    Attributes:
        N: space dimension, N >= 3.
        R: outer radius (truncation radius in TRUNCATED_SPACE mode,
           domain radius in BALL mode).
        n: number of interior nodes (>= 16); the mesh has n+2 nodes.
        kind: DomainKind.
        h: mesh spacing R/(n+1).
        omega: surface measure of the unit sphere, 2 pi^(N/2)/Gamma(N/2)
               (4*pi for N = 3).
        r: node radii, shape (n+2,).
    """

    N: int
    R: float
    n: int
    kind: DomainKind

    def __post_init__(self):
        h = self.R / (self.n + 1)
        r = h * np.arange(self.n + 2, dtype=float)
        omega = 2.0 * math.pi ** (self.N / 2.0) / math.gamma(self.N / 2.0)
        # trapezoid weights against the measure r^(N-1) dr; the half-weight
        # at node 0 is moot since r_0^(N-1) = 0 for N >= 3
        wtrap = h * r ** (self.N - 1)
        wtrap[0] *= 0.5
        wtrap[-1] *= 0.5
        rmid = 0.5 * (r[:-1] + r[1:])
        wmid = h * rmid ** (self.N - 1)
        for name, val in (("h", h), ("omega", omega), ("r", r),
                          ("_wtrap", wtrap), ("_wmid", wmid)):
            object.__setattr__(self, name, val)
        for arr in (r, wtrap, wmid):
            arr.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return self.n + 2


def make_grid(N: int, R: float, n: int, kind: DomainKind = DomainKind.TRUNCATED_SPACE) -> RadialGrid:
    """Build a radial grid, rejecting parameters outside the supported range.

    N < 3 is rejected (the two-dimensional case needs separate treatment
    and is not supported), as are n < 16 and R <= 0.
    """
    if int(N) != N or N < 3:
        raise ValueError(f"dimension N must be an integer >= 3, got {N}")
    if not R > 0:
        raise ValueError(f"radius R must be positive, got {R}")
    if int(n) != n or n < 16:
        raise ValueError(f"interior node count n must be an integer >= 16, got {n}")
    if not isinstance(kind, DomainKind):
        raise ValueError(f"kind must be a DomainKind, got {kind!r}")
    return RadialGrid(int(N), float(R), int(n), kind)


@dataclass(frozen=True, eq=False)
class RadialField:
    """Nodal values of a radial function on a RadialGrid.

    values has length n+2 (nodes 0..n+1).  Fields representing H^1_0
    members keep values[n+1] = 0; integrand-only fields (potentials,
    forcing profiles) may carry a nonzero boundary sample.
    """

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n + 2,):
            raise ValueError(
                f"field needs {self.grid.n + 2} nodal values, got shape {vals.shape}")
        if vals is self.values and vals.flags.writeable:
            vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    # small amount of arithmetic sugar; always returns new fields
    def __add__(self, other: "RadialField") -> "RadialField":
        return RadialField(self.grid, self.values + other.values)

    def __sub__(self, other: "RadialField") -> "RadialField":
        return RadialField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "RadialField":
        return RadialField(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "RadialField":
        return RadialField(self.grid, -self.values)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def zero_field(grid: RadialGrid) -> RadialField:
    return RadialField(grid, np.zeros(grid.n + 2))


def field_from_callable(grid: RadialGrid, fn: Callable[[np.ndarray], np.ndarray],
                        dirichlet: bool = True) -> RadialField:
    """Sample fn(r) at the nodes; with dirichlet=True the boundary node is zeroed."""
    vals = np.asarray(fn(grid.r), dtype=float).copy()
    if vals.shape != grid.r.shape:
        vals = np.broadcast_to(vals, grid.r.shape).astype(float).copy()
    if dirichlet:
        vals[-1] = 0.0
    return RadialField(grid, vals)


def integrate(w: RadialField) -> float:
    """omega * int_0^R w(r) r^(N-1) dr by the composite trapezoid rule.

    For w constant on the mesh, computed - exact equals the
    Euler-Maclaurin boundary term omega*c*(N-1)*R^(N-2)*h^2/12 exactly
    when N <= 4 (the higher corrections vanish), i.e. the rule is exact
    up to the boundary-cell truncation; for smooth w it is second order
    in h, and superalgebraically accurate when w r^(N-1) has vanishing
    derivatives at both endpoints.
    """
    g = w.grid
    return g.omega * float(g._wtrap @ w.values)


def _integrate_vals(grid: RadialGrid, vals: np.ndarray) -> float:
    return grid.omega * float(grid._wtrap @ vals)


class NormData(NamedTuple):
    grad_sq: float
    l2_sq: float
    h1lam_sq: float


def norms(u: RadialField, lam: float) -> NormData:
    """(|grad u|_2^2, |u|_2^2, |grad u|_2^2 + lam*|u|_2^2).

    The gradient seminorm uses the midpoint difference quotient on each
    cell: grad_sq = omega * sum_cells ((u_{i+1}-u_i)/h)^2 r_{i+1/2}^(N-1) h.
    """
    g = u.grid
    d = np.diff(u.values) / g.h
    grad_sq = g.omega * float(g._wmid @ (d * d))
    l2_sq = _integrate_vals(g, u.values * u.values)
    return NormData(grad_sq, l2_sq, grad_sq + lam * l2_sq)


def _grad_sq_vals(grid: RadialGrid, vals: np.ndarray) -> float:
    d = np.diff(vals) / grid.h
    return grid.omega * float(grid._wmid @ (d * d))


def lp_norm(u: RadialField, p: float) -> float:
    """(integrate(|u|^p))^(1/p) for p >= 1."""
    if p < 1:
        raise ValueError(f"lp_norm needs p >= 1, got {p}")
    return _integrate_vals(u.grid, np.abs(u.values) ** p) ** (1.0 / p)


def apply_operator(u: RadialField, lam: float) -> RadialField:
    """Strong form of (-Lap + lam) u on the nodes.

    Interior stencil (i >= 1):
        (-Lap_h u)_i = -(u_{i+1} - 2u_i + u_{i-1})/h^2
                       - ((N-1)/r_i) (u_{i+1} - u_{i-1})/(2h)
    Origin (symmetric stencil, consistent with Lap u(0) = N u''(0) for
    radial u with u'(0) = 0):
        (-Lap_h u)_0 = -2N (u_1 - u_0)/h^2.
    The output keeps the Dirichlet zero at node n+1.
    """
    if lam < 0:
        raise ValueError(f"operator shift lam must be >= 0, got {lam}")
    g = u.grid
    v = u.values
    out = np.empty_like(v)
    h2 = g.h * g.h
    out[0] = -2.0 * g.N * (v[1] - v[0]) / h2 + lam * v[0]
    lap = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h2
    adv = (g.N - 1) / g.r[1:-1] * (v[2:] - v[:-2]) / (2.0 * g.h)
    out[1:-1] = -(lap + adv) + lam * v[1:-1]
    out[-1] = 0.0
    return RadialField(g, out)


def _apply_operator_vals(grid: RadialGrid, v: np.ndarray, lam: float,
                         out: np.ndarray | None = None) -> np.ndarray:
    if out is None:
        out = np.empty_like(v)
    h2 = grid.h * grid.h
    out[0] = -2.0 * grid.N * (v[1] - v[0]) / h2 + lam * v[0]
    lap = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h2
    adv = (grid.N - 1) / grid.r[1:-1] * (v[2:] - v[:-2]) / (2.0 * grid.h)
    out[1:-1] = -(lap + adv) + lam * v[1:-1]
    out[-1] = 0.0
    return out


def h1_distance(u: RadialField, v: RadialField, lam: float = 1.0) -> float:
    """H^1 distance sqrt(|grad(u-v)|^2 + lam*|u-v|^2) in a fixed metric."""
    return math.sqrt(norms(u - v, lam).h1lam_sq)
