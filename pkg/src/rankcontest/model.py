"""Domain types: applicants, populations, effort costs and reward schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

BUDGET_TOL = 1e-9
# slack for range and monotonicity checks on schedules produced by floating point arithmetic
VALUE_TOL = 1e-12


@dataclass(frozen=True)
class Agent:
    id: int
    group: int
    skill: float
    env: float

    def __post_init__(self):
        if not (self.skill > 0 and self.env > 0):
            raise ValueError(f"agent {self.id}: skill and env must be positive, got {self.skill}, {self.env}")


def effective_skill(a: Agent) -> float:
    """Cost efficiency w = skill * env."""
    return a.skill * a.env


@dataclass(frozen=True)
class SkillDist:
    """Skill distribution of a group.

    kind is one of ``uniform`` (lo, hi), ``lognormal`` (mu, sigma) or
    ``grid`` (explicit values, treated as an empirical distribution).
    """

    kind: str
    lo: float = 0.0
    hi: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "uniform":
            if not (0 <= self.lo < self.hi):
                raise ValueError(f"uniform skill needs 0 <= lo < hi, got ({self.lo}, {self.hi})")
        elif self.kind == "lognormal":
            if not self.sigma > 0:
                raise ValueError(f"lognormal sigma must be positive, got {self.sigma}")
        elif self.kind == "grid":
            if not self.values or min(self.values) <= 0:
                raise ValueError("grid skill needs a nonempty list of positive values")
        else:
            raise ValueError(f"unknown skill distribution {self.kind!r}")

    def quantile(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.kind == "uniform":
            return self.lo + (self.hi - self.lo) * q
        if self.kind == "lognormal":
            z = np.array([NormalDist().inv_cdf(p) for p in q])
            return np.exp(self.mu + self.sigma * z)
        grid = np.sort(np.asarray(self.values, dtype=float))
        idx = np.clip(np.ceil(q * len(grid)).astype(int) - 1, 0, len(grid) - 1)
        return grid[idx]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.lo, self.hi, size)
        if self.kind == "lognormal":
            return rng.lognormal(self.mu, self.sigma, size)
        return rng.choice(np.asarray(self.values, dtype=float), size)


@dataclass(frozen=True)
class GroupSpec:
    label: str
    fraction: float
    skill: SkillDist
    env: float = 1.0


@dataclass(frozen=True)
class PopulationSpec:
    n: int
    groups: tuple[GroupSpec, ...]
    mode: str = "quantile"  # or "random"


@dataclass(frozen=True)
class Population:
    agents: tuple[Agent, ...]
    groups: dict[int, tuple[str, float]]

    def __post_init__(self):
        if not self.agents:
            raise ValueError("population is empty")
        for i, a in enumerate(self.agents):
            if a.id != i:
                raise ValueError(f"agent ids must be contiguous 0..n-1, found {a.id} at position {i}")
            if a.group not in self.groups:
                raise ValueError(f"agent {a.id} has unknown group {a.group}")

    def __len__(self) -> int:
        return len(self.agents)

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def w(self) -> np.ndarray:
        return np.array([effective_skill(a) for a in self.agents])

    @property
    def group_ids(self) -> np.ndarray:
        return np.array([a.group for a in self.agents], dtype=int)

    def label(self, group: int) -> str:
        return self.groups[group][0]

    @classmethod
    def from_arrays(cls, skill, env=None, group=None, labels=None) -> "Population":
        """Build a population directly from per-agent arrays (mostly for tests and scripts)."""
        skill = np.asarray(skill, dtype=float)
        n = len(skill)
        env = np.ones(n) if env is None else np.broadcast_to(np.asarray(env, dtype=float), (n,))
        group = np.zeros(n, dtype=int) if group is None else np.asarray(group, dtype=int)
        ids = sorted(set(group.tolist()))
        labels = labels or {g: chr(ord("A") + g) if g < 26 else str(g) for g in ids}
        counts = {g: int(np.sum(group == g)) for g in ids}
        groups = {g: (labels[g], counts[g] / n) for g in ids}
        agents = tuple(Agent(i, int(group[i]), float(skill[i]), float(env[i])) for i in range(n))
        return cls(agents, groups)


def group_sizes(fractions: Sequence[float], n: int) -> list[int]:
    """Split n by fractions using largest-remainder rounding."""
    raw = [f * n for f in fractions]
    sizes = [math.floor(x) for x in raw]
    short = n - sum(sizes)
    # stable: ties in remainder go to the earlier group
    order = sorted(range(len(raw)), key=lambda g: -(raw[g] - sizes[g]))
    for g in order[:short]:
        sizes[g] += 1
    return sizes


def make_population(spec: PopulationSpec, seed: int = 0) -> Population:
    if spec.n < 2:
        raise ValueError(f"population needs n >= 2, got {spec.n}")
    if not spec.groups:
        raise ValueError("population spec lists no groups")
    if spec.mode not in ("quantile", "random"):
        raise ValueError(f"unknown population mode {spec.mode!r}")
    fractions = [g.fraction for g in spec.groups]
    if any(f <= 0 for f in fractions):
        raise ValueError(f"group fractions must be positive, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"group fractions sum to {sum(fractions)}, expected 1")
    for g in spec.groups:
        if not g.env > 0:
            raise ValueError(f"group {g.label!r}: env multiplier must be positive, got {g.env}")

    sizes = group_sizes(fractions, spec.n)
    empty = [g.label for g, k in zip(spec.groups, sizes) if k == 0]
    if empty:
        raise ValueError(f"groups {empty} receive no agents at n={spec.n}")

    rng = np.random.default_rng(seed)
    agents = []
    for gid, (g, k) in enumerate(zip(spec.groups, sizes)):
        # explicit grids are always laid out on quantiles; the seed only drives parametric draws
        if spec.mode == "quantile" or g.skill.kind == "grid":
            skills = g.skill.quantile((np.arange(1, k + 1) - 0.5) / k)
        else:
            skills = g.skill.sample(rng, k)
        for s in skills:
            agents.append(Agent(len(agents), gid, float(s), float(g.env)))
    groups = {gid: (g.label, g.fraction) for gid, g in enumerate(spec.groups)}
    return Population(tuple(agents), groups)


@dataclass(frozen=True)
class CostModel:
    """Effort cost e**gamma / w, convex for gamma >= 1."""

    gamma: float = 1.0

    def __post_init__(self):
        if not self.gamma >= 1:
            raise ValueError(f"cost exponent gamma must be >= 1, got {self.gamma}")

    def raw_cost(self, e):
        return np.power(e, self.gamma)

    def disutility(self, e, w):
        return np.power(e, self.gamma) / w

    def effort_for(self, k):
        """Effort whose raw cost e**gamma equals k."""
        return np.power(k, 1.0 / self.gamma)


def slot_theta(n: int) -> np.ndarray:
    """Quantile (i - 0.5)/n of each slot i = 1..n, ascending (higher is better)."""
    return (np.arange(1, n + 1) - 0.5) / n


@dataclass(frozen=True, eq=False)
class RewardSchedule:
    """Admission probability per slot, slot 1 = lowest rank."""

    values: np.ndarray
    budget: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "budget", float(self.budget))

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RewardSchedule):
            return NotImplemented
        return self.budget == other.budget and np.array_equal(self.values, other.values)

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def theta(self) -> np.ndarray:
        return slot_theta(self.n)

    @property
    def increments(self) -> np.ndarray:
        """lambda_i - lambda_{i-1}, with 0 for the first slot."""
        return np.diff(self.values, prepend=self.values[0])


@dataclass(frozen=True)
class Violation:
    kind: str  # "range", "monotonicity", "budget" or "finite"
    slot: int | None  # 1-based, None for the budget
    magnitude: float
    message: str


@dataclass(frozen=True)
class ScheduleReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(v.message for v in self.violations)


def validate_schedule(s: RewardSchedule) -> ScheduleReport:
    v = s.values
    out: list[Violation] = []
    if len(v) == 0:
        return ScheduleReport((Violation("range", None, 0.0, "schedule has no slots"),))
    if not np.all(np.isfinite(v)):
        bad = int(np.flatnonzero(~np.isfinite(v))[0]) + 1
        return ScheduleReport((Violation("finite", bad, math.inf, f"non-finite value at slot {bad}"),))
    for i, x in enumerate(v, start=1):
        if x < -VALUE_TOL:
            out.append(Violation("range", i, float(-x), f"slot {i}: value {x:g} below 0"))
        elif x > 1 + VALUE_TOL:
            out.append(Violation("range", i, float(x - 1), f"slot {i}: value {x:g} above 1"))
    for i in range(1, len(v)):
        drop = v[i - 1] - v[i]
        if drop > VALUE_TOL:
            out.append(Violation("monotonicity", i + 1, float(drop),
                                 f"monotonicity violation at slot {i + 1}: {v[i]:g} < {v[i - 1]:g}"))
    mean = float(np.mean(v))
    if abs(mean - s.budget) > BUDGET_TOL:
        out.append(Violation("budget", None, abs(mean - s.budget),
                             f"budget violation: stated {s.budget:g}, mean {mean:g}"))
    return ScheduleReport(tuple(out))


@dataclass(frozen=True)
class DesignerObjective:
    weight_school: float = 1.0
    weight_welfare: float = 0.0
    weight_planner: float = 0.0
    fairness_delta: float | None = None

    def __post_init__(self):
        ws = (self.weight_school, self.weight_welfare, self.weight_planner)
        if not all(math.isfinite(x) for x in ws):
            raise ValueError(f"objective weights must be finite, got {ws}")
        if all(x == 0 for x in ws):
            raise ValueError("at least one objective weight must be nonzero")
        if self.fairness_delta is not None and not self.fairness_delta >= 0:
            raise ValueError(f"fairness_delta must be nonnegative, got {self.fairness_delta}")

    @classmethod
    def named(cls, name: str, **weights) -> "DesignerObjective":
        presets = {"school": (1, 0, 0), "welfare": (0, 1, 0), "planner": (0, 0, 1)}
        if name in presets:
            return cls(*map(float, presets[name]))
        if name == "mixed":
            return cls(**weights)
        raise ValueError(f"unknown objective {name!r}")
