"""Reward schedule families, feasibility projection, sweeps and schedule optimization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .equilibrium import solve_equilibrium
from .model import (
    CostModel,
    DesignerObjective,
    Population,
    RewardSchedule,
    slot_theta,
    validate_schedule,
)
from .welfare import WelfareReport, designer_value, report

FAMILIES = ("top_k", "lottery", "threshold_lottery", "randomized_top_k", "tiered", "explicit")
GRID_POINTS = 201
RANDOM_SAMPLES = 300


class ProjectionError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# projection onto monotone, [0, 1]-valued schedules with a fixed mean


def pava(y: Sequence[float]) -> np.ndarray:
    """Least-squares nondecreasing fit by pool-adjacent-violators."""
    y = np.asarray(y, dtype=float)
    sums: list[float] = []
    counts: list[int] = []
    for v in y:
        sums.append(float(v))
        counts.append(1)
        while len(sums) > 1 and sums[-2] / counts[-2] > sums[-1] / counts[-1]:
            s, c = sums.pop(), counts.pop()
            sums[-1] += s
            counts[-1] += c
    return np.repeat([s / c for s, c in zip(sums, counts)], counts)


def _shift_to_mean(v: np.ndarray, budget: float) -> np.ndarray:
    """Clip(v + s) to [0, 1] with s chosen by bisection so the mean equals budget."""
    lo, hi = -1.0 - v.max(), 1.0 - v.min()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.mean(np.clip(v + mid, 0.0, 1.0)) < budget:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    return np.clip(v + 0.5 * (lo + hi), 0.0, 1.0)


def project_feasible(raw: Sequence[float], budget: float, tol: float = 1e-10, max_rounds: int = 100) -> RewardSchedule:
    """Map arbitrary slot values to a valid schedule: isotonic fit, clip, then shift to the budget."""
    v = np.asarray(raw, dtype=float)
    if v.ndim != 1 or len(v) == 0 or not np.all(np.isfinite(v)):
        raise ValueError("raw schedule must be a nonempty sequence of finite values")
    if not 0.0 <= budget <= 1.0:
        raise ValueError(f"budget must lie in [0, 1], got {budget}")

    for _ in range(max_rounds):
        prev = v
        v = np.clip(pava(v), 0.0, 1.0)
        if abs(v.mean() - budget) > 1e-12:
            v = _shift_to_mean(v, budget)
        if np.max(np.abs(v - prev)) <= tol:
            break
    else:
        raise ProjectionError(f"projection did not converge in {max_rounds} rounds (last change {np.max(np.abs(v - prev)):.3g})")

    sched = RewardSchedule(v, budget)
    rep = validate_schedule(sched)
    if not rep.ok:
        raise ProjectionError(f"projected schedule still infeasible: {rep}")
    return sched


# ---------------------------------------------------------------------------
# reward families


@dataclass(frozen=True)
class RewardFamily:
    """A parametric reward schedule on n slots with mean budget.

    tau is the rank quantile below which threshold_lottery admits no one, r the
    lottery weight of randomized_top_k, cuts/probs the tier boundaries (rank
    quantiles) and tier probabilities of tiered, and values the raw slot values
    of explicit (linearly interpolated over rank quantile if not of length n).
    """

    kind: str
    n: int
    budget: float
    r: float = 0.0
    tau: float = 0.0
    cuts: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"unknown reward family {self.kind!r}; expected one of {FAMILIES}")


def _top_k(n: int, budget: float) -> np.ndarray:
    m = budget * n
    full = round(m) if abs(m - round(m)) < 1e-9 else math.floor(m)
    values = np.zeros(n)
    if full:
        values[n - full:] = 1.0
    frac = m - full
    if frac > 1e-9 and full < n:
        values[n - full - 1] = frac
    return values


def _threshold_lottery(n: int, budget: float, tau: float) -> np.ndarray:
    # each slot covers [(i-1)/n, i/n]; it gets the probability times the share of that cell above tau
    p = budget / (1.0 - tau) if tau < 1 else 0.0
    share = np.clip(np.arange(1, n + 1) - tau * n, 0.0, 1.0)
    return p * share


def instantiate(fam: RewardFamily) -> RewardSchedule:
    n, c = fam.n, fam.budget
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"budget must lie in [0, 1], got {c}")
    if n < 1:
        raise ValueError(f"schedule needs at least one slot, got n={n}")

    if fam.kind == "lottery":
        return RewardSchedule(np.full(n, c), c)
    if fam.kind == "top_k":
        return RewardSchedule(_top_k(n, c), c)
    if fam.kind == "randomized_top_k":
        if not 0.0 <= fam.r <= 1.0:
            raise ValueError(f"randomization weight r must lie in [0, 1], got {fam.r}")
        return RewardSchedule((1.0 - fam.r) * _top_k(n, c) + fam.r * c, c)
    if fam.kind == "threshold_lottery":
        if fam.tau < 0:
            raise ValueError(f"threshold tau must be nonnegative, got {fam.tau}")
        if fam.tau > 1.0 - c + 1e-12:
            raise ValueError(f"threshold tau={fam.tau} exceeds 1 - budget = {1.0 - c}")
        return RewardSchedule(_threshold_lottery(n, c, min(fam.tau, 1.0 - c)), c)
    if fam.kind == "tiered":
        cuts = np.asarray(fam.cuts, dtype=float)
        probs = np.asarray(fam.probs, dtype=float)
        if len(probs) != len(cuts) + 1:
            raise ValueError(f"tiered needs len(probs) == len(cuts) + 1, got {len(probs)} and {len(cuts)}")
        if np.any(np.diff(cuts) <= 0) or np.any((cuts <= 0) | (cuts >= 1)):
            raise ValueError(f"tier cuts must be increasing inside (0, 1), got {fam.cuts}")
        if np.any(np.diff(probs) < 0):
            raise ValueError(f"tier probabilities must be nondecreasing, got {fam.probs}")
        if np.any((probs < 0) | (probs > 1)):
            raise ValueError(f"tier probabilities must lie in [0, 1], got {fam.probs}")
        raw = probs[np.searchsorted(cuts, slot_theta(n), side="right")]
        return project_feasible(raw, c)
    # explicit
    vals = np.asarray(fam.values, dtype=float)
    if len(vals) == 0:
        raise ValueError("explicit family needs values")
    if len(vals) != n:
        vals = np.interp(slot_theta(n), np.linspace(0.0, 1.0, len(vals)), vals) if len(vals) > 1 else np.full(n, vals[0])
    return project_feasible(vals, c)


# parameter spaces searched by optimize(): name -> (lower, upper) per coordinate
def param_space(fam: RewardFamily) -> list[tuple[str, float, float]]:
    if fam.kind == "randomized_top_k":
        return [("r", 0.0, 1.0)]
    if fam.kind == "threshold_lottery":
        return [("tau", 0.0, 1.0 - fam.budget)]
    if fam.kind == "tiered":
        return [(f"probs[{k}]", 0.0, 1.0) for k in range(len(fam.cuts) + 1)]
    if fam.kind == "explicit":
        return [(f"values[{k}]", 0.0, 1.0) for k in range(len(fam.values) or fam.n)]
    return []


def with_params(fam: RewardFamily, vec: Sequence[float]) -> RewardFamily:
    vec = [float(v) for v in vec]
    if fam.kind == "randomized_top_k":
        return replace(fam, r=vec[0])
    if fam.kind == "threshold_lottery":
        return replace(fam, tau=vec[0])
    if fam.kind == "tiered":
        # sorted so that any point of the box is an admissible tier profile
        return replace(fam, probs=tuple(sorted(vec)))
    if fam.kind == "explicit":
        return replace(fam, values=tuple(vec))
    return fam


def current_params(fam: RewardFamily) -> list[float]:
    if fam.kind == "randomized_top_k":
        return [fam.r]
    if fam.kind == "threshold_lottery":
        return [fam.tau]
    if fam.kind == "tiered":
        return list(fam.probs) or [fam.budget] * (len(fam.cuts) + 1)
    if fam.kind == "explicit":
        return list(fam.values) or [fam.budget] * fam.n
    return []


# ---------------------------------------------------------------------------
# evaluation, sweeps, optimization


@dataclass(frozen=True)
class Scenario:
    """Everything held fixed while the reward schedule varies."""

    population: Population
    cost: CostModel = field(default_factory=CostModel)
    tie_break: str = "id"
    seed: int = 0
    objective: DesignerObjective = field(default_factory=DesignerObjective)


@dataclass(frozen=True)
class Evaluation:
    params: dict[str, float]
    schedule: RewardSchedule | None
    report: WelfareReport | None
    value: float
    error: str | None = None
    stage: str = "grid"

    @property
    def ok(self) -> bool:
        return self.error is None


def evaluate(fam: RewardFamily, scenario: Scenario, objective: DesignerObjective | None = None,
             params: dict[str, float] | None = None, stage: str = "grid") -> Evaluation:
    objective = objective or scenario.objective
    params = params or {}
    try:
        sched = instantiate(fam)
        out = solve_equilibrium(scenario.population, sched, scenario.cost, scenario.tie_break, scenario.seed)
    except (ValueError, ProjectionError) as exc:
        return Evaluation(params, None, None, math.nan, str(exc), stage)
    rep = report(scenario.population, out, sched)
    return Evaluation(params, sched, rep, designer_value(rep, objective), None, stage)


@dataclass(frozen=True)
class SweepResult:
    param: str
    rows: tuple[Evaluation, ...]

    def table(self) -> list[dict]:
        out = []
        for row in self.rows:
            rec = {self.param: row.params[self.param], "error": row.error or ""}
            if row.report is not None:
                rep = row.report
                rec.update(applicant_welfare=rep.applicant_welfare, school_total=rep.school_total,
                           school_per_seat=rep.school_per_seat, planner=rep.planner,
                           total_cost=rep.total_cost, access_gap=rep.access_gap, welfare_gap=rep.welfare_gap)
                rec.update({f"access[{k}]": v for k, v in rep.access.items()})
            rec["designer_value"] = row.value
            out.append(rec)
        return out


def sweep(fam: RewardFamily, param: str, grid: Sequence[float], scenario: Scenario,
          objective: DesignerObjective | None = None) -> SweepResult:
    """Evaluate the family at each grid value of one parameter (r, tau or budget)."""
    if param not in ("r", "tau", "budget"):
        raise ValueError(f"cannot sweep parameter {param!r}; expected r, tau or budget")
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    rows = []
    for value in grid:
        rows.append(evaluate(replace(fam, **{param: float(value)}), scenario, objective, {param: float(value)}))
    return SweepResult(param, tuple(rows))


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float = 1e-7,
                       max_iter: int = 200) -> tuple[float, float]:
    """Maximize a unimodal f on [a, b]; returns (argmax, max) among the points evaluated."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    best = max((fc, -c, c), (fd, -d, d))
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
            best = max(best, (fc, -c, c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
            best = max(best, (fd, -d, d))
    return best[2], best[0]


@dataclass(frozen=True)
class OptimizeResult:
    params: dict[str, float]
    schedule: RewardSchedule
    value: float
    report: WelfareReport
    evaluations: tuple[Evaluation, ...]
    fallback: bool = False

    @property
    def access_gap(self) -> float:
        return self.report.access_gap


def _search(fam: RewardFamily, scenario: Scenario, objective: DesignerObjective,
            feasible: Callable[[Evaluation], bool], seed: int) -> tuple[Evaluation | None, list[Evaluation]]:
    space = param_space(fam)
    names = [s[0] for s in space]
    lo = np.array([s[1] for s in space])
    hi = np.array([s[2] for s in space])
    history: list[Evaluation] = []

    def run(vec, stage):
        vec = np.clip(np.asarray(vec, dtype=float), lo, hi)
        ev = evaluate(with_params(fam, vec), scenario, objective, dict(zip(names, vec.tolist())), stage)
        history.append(ev)
        return ev

    def score(ev: Evaluation) -> float:
        return ev.value if ev.ok and feasible(ev) else -math.inf

    if not space:
        ev = run([], "single")
        return (ev if score(ev) > -math.inf else None), history

    if len(space) == 1:
        grid = np.linspace(lo[0], hi[0], GRID_POINTS)
        evs = [run([g], "grid") for g in grid]
        scores = np.array([score(e) for e in evs])
        if not np.any(np.isfinite(scores)):
            return None, history
        b = int(np.argmax(scores))
        best = evs[b]
        left, right = grid[max(b - 1, 0)], grid[min(b + 1, len(grid) - 1)]
        if right > left:
            cache: dict[float, Evaluation] = {}

            def f(t):
                cache[t] = run([t], "refine")
                return score(cache[t])

            t, val = golden_section_max(f, left, right)
            if val > scores[b]:
                best = cache[t]
        return best, history

    rng = np.random.default_rng(seed)
    start = np.clip(np.asarray(current_params(fam), dtype=float), lo, hi)
    samples = [start] + [rng.uniform(lo, hi) for _ in range(RANDOM_SAMPLES)]
    evs = [run(s, "random") for s in samples]
    scores = [score(e) for e in evs]
    b = int(np.argmax(scores))
    if not math.isfinite(scores[b]):
        return None, history
    x, best, best_score = np.array(samples[b]), evs[b], scores[b]

    step = 0.1 * (hi - lo)
    while np.max(step) > 1e-6:
        improved = False
        for k in range(len(x)):
            for sign in (1.0, -1.0):
                trial = x.copy()
                trial[k] = np.clip(trial[k] + sign * step[k], lo[k], hi[k])
                if trial[k] == x[k]:
                    continue
                ev = run(trial, "coordinate")
                if score(ev) > best_score:
                    x, best, best_score, improved = trial, ev, score(ev), True
                    break
        if not improved:
            step = step / 2
    return best, history


def optimize(obj: DesignerObjective, fam: RewardFamily, scenario: Scenario, seed: int | None = None) -> OptimizeResult:
    """Best member of the family for the objective.

    One-parameter families: 201-point grid, then golden-section refinement
    inside the cells around the best grid point. Larger families: seeded random
    search followed by coordinate ascent.
    """
    seed = scenario.seed if seed is None else seed
    best, history = _search(fam, scenario, obj, lambda ev: True, seed)
    if best is None:
        raise ValueError(f"no feasible schedule in family {fam.kind!r}")
    return OptimizeResult(best.params, best.schedule, best.value, best.report, tuple(history))


def fairness_optimize(obj: DesignerObjective, delta: float, fam: RewardFamily, scenario: Scenario,
                      seed: int | None = None) -> OptimizeResult:
    """Like optimize(), restricted to schedules whose access gap is at most delta.

    Falls back to the lottery (access gap 0) when nothing in the family qualifies.
    """
    if not delta >= 0:
        raise ValueError(f"access-gap cap must be nonnegative, got {delta}")
    seed = scenario.seed if seed is None else seed
    best, history = _search(fam, scenario, obj, lambda ev: ev.report.access_gap <= delta + 1e-12, seed)
    if best is not None:
        return OptimizeResult(best.params, best.schedule, best.value, best.report, tuple(history))
    lottery = evaluate(RewardFamily("lottery", fam.n, fam.budget), scenario, obj, stage="fallback")
    history.append(lottery)
    return OptimizeResult({}, lottery.schedule, lottery.value, lottery.report, tuple(history), fallback=True)
