"""Scenario files: a flat, sectioned ``key = value`` format.

Example::

    [population]
    n = 200
    mode = quantile            # or random

    [population.group.A]
    fraction = 0.5
    dist = uniform             # uniform (lo, hi) | lognormal (mu, sigma) | grid (values)
    lo = 0.5
    hi = 1.5
    env = 1

    [population.group.B]
    fraction = 0.5
    dist = uniform
    lo = 0.5
    hi = 1.5
    env = 0.4

    [cost]
    gamma = 1

    [reward]
    family = randomized_top_k  # top_k | lottery | threshold_lottery | randomized_top_k | tiered | explicit
    budget = 0.5
    r = 0.25

    [run]
    seed = 0
    tie_break = id             # or random
    overtake_eps = 1e-9
    precision = 9

Required keys are ``population.n``, ``reward.family`` and ``reward.budget``.
Lists are comma separated. ``#`` starts a comment.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .design import FAMILIES, RewardFamily, Scenario
from .model import (
    CostModel,
    DesignerObjective,
    GroupSpec,
    PopulationSpec,
    SkillDist,
    make_population,
)


class ScenarioError(ValueError):
    """Malformed or out-of-range scenario file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class GroupConfig:
    name: str
    fraction: float = 1.0
    dist: str = "uniform"
    lo: float = 0.0
    hi: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0
    values: tuple[float, ...] = ()
    env: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    n: int
    groups: tuple[GroupConfig, ...]
    family: str
    budget: float
    mode: str = "quantile"
    gamma: float = 1.0
    r: float = 0.0
    tau: float = 0.0
    cuts: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    seed: int = 0
    tie_break: str = "id"
    overtake_eps: float = 1e-9
    precision: int = 9
    weight_school: float = 1.0
    weight_welfare: float = 1.0
    weight_planner: float = 1.0

    def population_spec(self) -> PopulationSpec:
        groups = tuple(
            GroupSpec(g.name, g.fraction,
                      SkillDist(g.dist, lo=g.lo, hi=g.hi, mu=g.mu, sigma=g.sigma, values=g.values), g.env)
            for g in self.groups
        )
        return PopulationSpec(self.n, groups, self.mode)

    def reward_family(self) -> RewardFamily:
        return RewardFamily(self.family, self.n, self.budget, r=self.r, tau=self.tau,
                            cuts=self.cuts, probs=self.probs, values=self.values)

    def mixed_objective(self) -> DesignerObjective:
        return DesignerObjective(self.weight_school, self.weight_welfare, self.weight_planner)

    def scenario(self, objective: DesignerObjective | None = None) -> Scenario:
        pop = make_population(self.population_spec(), self.seed)
        return Scenario(pop, CostModel(self.gamma), self.tie_break, self.seed,
                        objective or self.mixed_objective())


_TOP = {
    "population": {"n": int, "mode": str},
    "cost": {"gamma": float},
    "reward": {"family": str, "budget": float, "r": float, "tau": float,
               "cuts": tuple, "probs": tuple, "values": tuple},
    "run": {"seed": int, "tie_break": str, "overtake_eps": float, "precision": int,
            "weight_school": float, "weight_welfare": float, "weight_planner": float},
}
_GROUP = {"fraction": float, "dist": str, "lo": float, "hi": float, "mu": float,
          "sigma": float, "values": tuple, "env": float}
_GROUP_PREFIX = "population.group."


def _convert(kind, text: str, key: str, line: int):
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is tuple:
            return tuple(float(t) for t in text.split(",") if t.strip())
        return text
    except ValueError:
        raise ScenarioError(f"{key}: expected {'list of numbers' if kind is tuple else kind.__name__}, got {text!r}", line) from None


def parse_scenario(text: str) -> ScenarioConfig:
    top: dict[str, object] = {}
    groups: dict[str, dict[str, object]] = {}
    lines: dict[str, int] = {}
    section = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section.startswith(_GROUP_PREFIX):
                name = section[len(_GROUP_PREFIX):]
                if not name:
                    raise ScenarioError("group section needs a name", lineno)
                if name in groups:
                    raise ScenarioError(f"duplicate group {name!r}", lineno)
                groups[name] = {}
            elif section not in _TOP:
                raise ScenarioError(f"unknown section [{section}]", lineno)
            lines[section] = lineno
            continue
        if "=" not in line:
            raise ScenarioError(f"expected key = value, got {line!r}", lineno)
        key, value = (t.strip() for t in line.split("=", 1))
        if section is None:
            raise ScenarioError(f"key {key!r} outside any section", lineno)
        full = f"{section}.{key}"
        if section.startswith(_GROUP_PREFIX):
            table, target = _GROUP, groups[section[len(_GROUP_PREFIX):]]
        else:
            table, target = _TOP[section], top
        if key not in table:
            raise ScenarioError(f"unknown key {full!r}", lineno)
        if key in target:
            raise ScenarioError(f"duplicate key {full!r}", lineno)
        target[key] = _convert(table[key], value, full, lineno)
        lines[full] = lineno

    for required in ("n", "family", "budget"):
        if required not in top:
            section = "population" if required == "n" else "reward"
            raise ScenarioError(f"missing required key {section}.{required}")
    if not groups:
        raise ScenarioError("scenario defines no [population.group.<name>] section")

    def where(key):
        return lines.get(key)

    if top["n"] < 2:
        raise ScenarioError(f"population.n must be >= 2, got {top['n']}", where("population.n"))
    if not 0.0 <= top["budget"] <= 1.0:
        raise ScenarioError(f"reward.budget must lie in [0, 1], got {top['budget']}", where("reward.budget"))
    if top["family"] not in FAMILIES:
        raise ScenarioError(f"reward.family must be one of {', '.join(FAMILIES)}, got {top['family']!r}",
                            where("reward.family"))
    if top.get("mode", "quantile") not in ("quantile", "random"):
        raise ScenarioError(f"population.mode must be quantile or random, got {top['mode']!r}", where("population.mode"))
    if top.get("tie_break", "id") not in ("id", "random"):
        raise ScenarioError(f"run.tie_break must be id or random, got {top['tie_break']!r}", where("run.tie_break"))
    if top.get("overtake_eps", 1.0) <= 0:
        raise ScenarioError("run.overtake_eps must be positive", where("run.overtake_eps"))
    if not 1 <= top.get("precision", 9) <= 17:
        raise ScenarioError("run.precision must be between 1 and 17", where("run.precision"))
    if top.get("gamma", 1.0) < 1:
        raise ScenarioError(f"cost.gamma must be >= 1, got {top['gamma']}", where("cost.gamma"))

    if len(groups) > 1:
        for name, g in groups.items():
            if "fraction" not in g:
                raise ScenarioError(f"group {name!r} needs a fraction when several groups are given",
                                    where(_GROUP_PREFIX + name))
    group_cfgs = tuple(GroupConfig(name, **g) for name, g in groups.items())
    cfg = ScenarioConfig(groups=group_cfgs, **top)

    # let the domain constructors check distributions, fractions and family parameters
    try:
        spec = cfg.population_spec()
        if abs(sum(g.fraction for g in spec.groups) - 1.0) > 1e-9:
            raise ValueError(f"group fractions sum to {sum(g.fraction for g in spec.groups)}, expected 1")
        for g in spec.groups:
            if not (g.fraction > 0 and g.env > 0):
                raise ValueError(f"group {g.label!r}: fraction and env must be positive")
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    return cfg


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_scenario(cfg: ScenarioConfig) -> str:
    """Serialize a config so that parse_scenario(format_scenario(cfg)) == cfg."""
    values = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    out = []
    for section, keys in _TOP.items():
        out.append(f"[{section}]")
        out.extend(f"{k} = {_fmt(values[k])}" for k in keys)
        out.append("")
        if section == "population":
            for g in cfg.groups:
                out.append(f"[{_GROUP_PREFIX}{g.name}]")
                out.extend(f"{k} = {_fmt(getattr(g, k))}" for k in _GROUP)
                out.append("")
    return "\n".join(out)
