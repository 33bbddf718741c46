"""Declarative run configuration: flat INI-style sections or JSON.

The config is the single source for a run: problem geometry, nonlinearity,
solver knobs, experiment layout, output directory and the seed that feeds
every random probe.  Named profiles keep the format declarative (no code
in configs).  parse -> serialize -> parse is idempotent.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grids import DomainKind, RadialField, RadialGrid, field_from_callable, make_grid
from .nonlinearity import (ONE, Nonlinearity, PositivePartPower, Potential,
                           PowerSum, RadialProfile, SaturatingCubic)
from .functional import Mode, Problem
from .solvers import MountainPassConfig


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


_POTENTIALS = {
    "one": lambda: ONE,
    "exp_decay": lambda: RadialProfile(lambda r: np.exp(-r), decays_at_infinity=True),
    "gaussian": lambda: RadialProfile(lambda r: np.exp(-r * r), decays_at_infinity=True),
    "soft_decay": lambda: RadialProfile(lambda r: 1.0 / (1.0 + r * r),
                                        decays_at_infinity=True),
}

_PROFILES = {
    "cos_pi": lambda r, R: np.cos(np.pi * r / R),
    "nonneg_bump": lambda r, R: (1.0 - (r / R) ** 2) ** 2,
    "cos_2pi": lambda r, R: np.cos(2.0 * np.pi * r / R),
}


@dataclass(frozen=True)
class ProblemSpec:
    N: int = 3
    R: float = 20.0
    n: int = 2000
    domain: str = "truncated_space"
    mode: str = "autonomous"
    nonlinearity: str = "power_sum"
    terms: tuple[tuple[float, float], ...] = ((1.0, 3.0),)
    p: float = 3.0
    potential: str = "one"
    q: float = 2.0


@dataclass(frozen=True)
class SolverSpec:
    path_points: int = 41
    max_outer_iters: int = 5000
    grad_tol: float = 1e-8
    descent_init_step: float = 1.0
    descent_shrink: float = 0.5
    descent_sufficient_decrease: float = 1e-4
    reparametrize_every: int = 10
    force_positive: bool = True


@dataclass(frozen=True)
class ExperimentSpec:
    lam: float = 1.0
    lambda_grid: tuple[float, float, float] = (0.5, 2.0, 0.05)  # start, stop, step
    warm: bool = True
    amplitudes_rel: tuple[float, ...] = (1.0, 0.5, 0.25, 0.125)  # times beta
    profile: str = "cos_pi"
    alpha_max_rel: float = 4.0
    bracket_rel: float = 1e-3


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "out"
    seed: int = 12345


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    experiment: ExperimentSpec = field(default_factory=ExperimentSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    # --- builders (these re-run every module-level precondition) ---------

    def build_grid(self) -> RadialGrid:
        try:
            kind = DomainKind(self.problem.domain)
        except ValueError as exc:
            raise ConfigError(f"unknown domain kind {self.problem.domain!r}") from exc
        try:
            return make_grid(self.problem.N, self.problem.R, self.problem.n, kind)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_nonlinearity(self) -> Nonlinearity:
        name = self.problem.nonlinearity
        try:
            if name == "power_sum":
                return PowerSum(self.problem.terms)
            if name == "saturating_cubic":
                return SaturatingCubic()
            if name == "positive_part_power":
                return PositivePartPower(self.problem.p)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        raise ConfigError(f"unknown nonlinearity {name!r}")

    def build_potential(self) -> Potential:
        try:
            return _POTENTIALS[self.problem.potential]()
        except KeyError as exc:
            raise ConfigError(f"unknown potential {self.problem.potential!r} "
                              f"(known: {sorted(_POTENTIALS)})") from exc

    def build_problem(self, forcing: RadialField | None = None) -> Problem:
        grid = self.build_grid()
        mode = self.problem.mode
        try:
            if mode == "autonomous":
                return Problem.autonomous(grid, self.build_nonlinearity())
            if mode == "weighted":
                return Problem.weighted(grid, self.build_nonlinearity(),
                                        self.build_potential())
            if mode == "forced":
                if forcing is None:
                    forcing = RadialField(grid, np.zeros(grid.n + 2))
                return Problem.forced(grid, self.problem.p, forcing)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        raise ConfigError(f"unknown mode {mode!r}")

    def build_profile(self, grid: RadialGrid) -> RadialField:
        try:
            fn = _PROFILES[self.experiment.profile]
        except KeyError as exc:
            raise ConfigError(f"unknown forcing profile {self.experiment.profile!r} "
                              f"(known: {sorted(_PROFILES)})") from exc
        return field_from_callable(grid, lambda r: fn(r, grid.R), dirichlet=False)

    def build_solver_config(self) -> MountainPassConfig:
        s = self.solver
        try:
            return MountainPassConfig(
                path_points=s.path_points, max_outer_iters=s.max_outer_iters,
                grad_tol=s.grad_tol, descent_init_step=s.descent_init_step,
                descent_shrink=s.descent_shrink,
                descent_sufficient_decrease=s.descent_sufficient_decrease,
                reparametrize_every=s.reparametrize_every,
                force_positive=s.force_positive)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def lambda_values(self) -> list[float]:
        start, stop, step = self.experiment.lambda_grid
        if step <= 0 or stop < start:
            raise ConfigError(f"bad lambda_grid {self.experiment.lambda_grid}")
        k = int(math.floor((stop - start) / step + 0.5))
        vals = [round(start + i * step, 12) for i in range(k + 1)]
        return [v for v in vals if v <= stop + 1e-12]

    def validate(self) -> "RunConfig":
        """Re-run every referenced module precondition; raise ConfigError."""
        self.build_grid()
        self.build_nonlinearity()
        self.build_potential()
        self.build_solver_config()
        if self.problem.mode == "forced":
            if not self.problem.q > self.problem.N / 2:
                raise ConfigError(
                    f"q = {self.problem.q} must exceed N/2 = {self.problem.N / 2}")
            crit = (self.problem.N + 2) / (self.problem.N - 2)
            if not 1 < self.problem.p < crit:
                raise ConfigError(f"p = {self.problem.p} outside ]1, {crit}[")
            if self.problem.domain != "ball":
                raise ConfigError("forced mode requires domain = ball")
        if self.problem.mode in ("autonomous", "weighted"):
            self.lambda_values()
        if self.output.seed < 0 or self.output.seed >= 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        return self


# --- parsing -----------------------------------------------------------------


def _parse_terms(text: str) -> tuple[tuple[float, float], ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            a, p = part.split(":")
            out.append((float(a), float(p)))
        except ValueError as exc:
            raise ConfigError(f"bad power term {part!r}; expected coeff:exponent") from exc
    if not out:
        raise ConfigError("empty power-sum term list")
    return tuple(out)


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad float list {text!r}") from exc


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"bad boolean {text!r}")


def _sections_from_ini(text: str) -> dict[str, dict[str, str]]:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    return {s: dict(cp.items(s)) for s in cp.sections()}


def _sections_from_json(text: str) -> dict[str, dict[str, str]]:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse JSON config: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("JSON config must be an object of sections")
    out = {}
    for sec, body in raw.items():
        if not isinstance(body, dict):
            raise ConfigError(f"JSON section {sec!r} must be an object")
        flat = {}
        for k, v in body.items():
            if isinstance(v, bool):
                flat[k] = "true" if v else "false"
            elif isinstance(v, (list, tuple)):
                # scalars join with ","; pairs (power-sum terms) use a:p
                flat[k] = ",".join(
                    ":".join(str(t) for t in x) if isinstance(x, (list, tuple)) else str(x)
                    for x in v)
            else:
                flat[k] = str(v)
        out[sec] = flat
    return out


def parse_config_text(text: str, fmt: str = "ini") -> RunConfig:
    sections = _sections_from_json(text) if fmt == "json" else _sections_from_ini(text)
    known = {"problem", "solver", "experiment", "output"}
    unknown = set(sections) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    def get(sec: str, key: str, conv, default):
        body = sections.get(sec, {})
        if key not in body:
            return default
        try:
            return conv(body[key])
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"bad value for {sec}.{key}: {body[key]!r}") from exc

    prob = ProblemSpec(
        N=get("problem", "n_dim", int, ProblemSpec.N),
        R=get("problem", "radius", float, ProblemSpec.R),
        n=get("problem", "nodes", int, ProblemSpec.n),
        domain=get("problem", "domain", str.strip, ProblemSpec.domain),
        mode=get("problem", "mode", str.strip, ProblemSpec.mode),
        nonlinearity=get("problem", "nonlinearity", str.strip, ProblemSpec.nonlinearity),
        terms=get("problem", "terms", _parse_terms, ProblemSpec.terms),
        p=get("problem", "p", float, ProblemSpec.p),
        potential=get("problem", "potential", str.strip, ProblemSpec.potential),
        q=get("problem", "q", float, ProblemSpec.q),
    )
    solv = SolverSpec(
        path_points=get("solver", "path_points", int, SolverSpec.path_points),
        max_outer_iters=get("solver", "max_outer_iters", int, SolverSpec.max_outer_iters),
        grad_tol=get("solver", "grad_tol", float, SolverSpec.grad_tol),
        descent_init_step=get("solver", "descent_init_step", float,
                              SolverSpec.descent_init_step),
        descent_shrink=get("solver", "descent_shrink", float, SolverSpec.descent_shrink),
        descent_sufficient_decrease=get("solver", "descent_sufficient_decrease", float,
                                        SolverSpec.descent_sufficient_decrease),
        reparametrize_every=get("solver", "reparametrize_every", int,
                                SolverSpec.reparametrize_every),
        force_positive=get("solver", "force_positive", _parse_bool,
                           SolverSpec.force_positive),
    )

    def _parse_grid3(text: str) -> tuple[float, float, float]:
        sep = ":" if ":" in text else ","
        parts = [float(x) for x in text.split(sep)]
        if len(parts) != 3:
            raise ConfigError(f"lambda_grid must be start:stop:step, got {text!r}")
        return (parts[0], parts[1], parts[2])

    exp = ExperimentSpec(
        lam=get("experiment", "lambda", float, ExperimentSpec.lam),
        lambda_grid=get("experiment", "lambda_grid", _parse_grid3,
                        ExperimentSpec.lambda_grid),
        warm=get("experiment", "warm", _parse_bool, ExperimentSpec.warm),
        amplitudes_rel=get("experiment", "amplitudes_rel", _parse_floats,
                           ExperimentSpec.amplitudes_rel),
        profile=get("experiment", "profile", str.strip, ExperimentSpec.profile),
        alpha_max_rel=get("experiment", "alpha_max_rel", float,
                          ExperimentSpec.alpha_max_rel),
        bracket_rel=get("experiment", "bracket_rel", float, ExperimentSpec.bracket_rel),
    )
    outp = OutputSpec(
        directory=get("output", "directory", str.strip, OutputSpec.directory),
        seed=get("output", "seed", int, OutputSpec.seed),
    )
    return RunConfig(prob, solv, exp, outp).validate()


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    fmt = "json" if path.suffix.lower() == ".json" else "ini"
    return parse_config_text(path.read_text(encoding="utf-8"), fmt=fmt)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical INI text; parse(serialize(cfg)) == cfg."""
    p, s, e, o = cfg.problem, cfg.solver, cfg.experiment, cfg.output
    lines = [
        "[problem]",
        f"n_dim = {p.N}",
        f"radius = {p.R!r}",
        f"nodes = {p.n}",
        f"domain = {p.domain}",
        f"mode = {p.mode}",
        f"nonlinearity = {p.nonlinearity}",
        "terms = " + ",".join(f"{a!r}:{q!r}" for a, q in p.terms),
        f"p = {p.p!r}",
        f"potential = {p.potential}",
        f"q = {p.q!r}",
        "",
        "[solver]",
        f"path_points = {s.path_points}",
        f"max_outer_iters = {s.max_outer_iters}",
        f"grad_tol = {s.grad_tol!r}",
        f"descent_init_step = {s.descent_init_step!r}",
        f"descent_shrink = {s.descent_shrink!r}",
        f"descent_sufficient_decrease = {s.descent_sufficient_decrease!r}",
        f"reparametrize_every = {s.reparametrize_every}",
        f"force_positive = {'true' if s.force_positive else 'false'}",
        "",
        "[experiment]",
        f"lambda = {e.lam!r}",
        "lambda_grid = " + ":".join(repr(x) for x in e.lambda_grid),
        f"warm = {'true' if e.warm else 'false'}",
        "amplitudes_rel = " + ",".join(repr(x) for x in e.amplitudes_rel),
        f"profile = {e.profile}",
        f"alpha_max_rel = {e.alpha_max_rel!r}",
        f"bracket_rel = {e.bracket_rel!r}",
        "",
        "[output]",
        f"directory = {o.directory}",
        f"seed = {o.seed}",
        "",
    ]
    return "\n".join(lines)
