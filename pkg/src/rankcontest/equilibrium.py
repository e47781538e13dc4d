"""Rank-preserving equilibrium effort profile and a best-response oracle to certify it.

Agents are ordered by cost efficiency w. The raw effort cost K of the agent in
slot i satisfies

    K_1 = 0,    K_i = K_{i-1} + w_(i) * (lambda_i - lambda_{i-1})

which is the discrete Stieltjes sum for c(x(q)) = int_0^q w d(lambda). Scores
are x_i = K_i ** (1/gamma) and utilities lambda_i - K_i / w_(i).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CostModel, Population, RewardSchedule, validate_schedule

_CHUNK = 256


@dataclass(eq=False)
class EquilibriumOutcome:
    """Per-agent equilibrium quantities, all arrays indexed by agent id."""

    slot: np.ndarray
    theta: np.ndarray
    w: np.ndarray
    reward: np.ndarray
    score: np.ndarray
    cum: np.ndarray
    cost: np.ndarray
    utility: np.ndarray
    schedule: RewardSchedule
    cost_model: CostModel
    verified_regret: float | None = None

    @property
    def n(self) -> int:
        return len(self.slot)

    @property
    def schedule_budget(self) -> float:
        return self.schedule.budget

    @property
    def order(self) -> np.ndarray:
        """Agent ids listed by slot, lowest slot first."""
        return np.argsort(self.slot, kind="stable")


def slot_order(w: np.ndarray, tie_break: str = "id", seed: int | None = None) -> np.ndarray:
    """Agent ids sorted ascending by w, ties broken by id or by a seeded permutation."""
    if tie_break == "id":
        secondary = np.arange(len(w))
    elif tie_break == "random":
        secondary = np.random.default_rng(seed).permutation(len(w))
    else:
        raise ValueError(f"unknown tie_break {tie_break!r}")
    return np.lexsort((secondary, w))


def solve_equilibrium(pop: Population, sched: RewardSchedule, cost: CostModel | None = None,
                      tie_break: str = "id", seed: int | None = None) -> EquilibriumOutcome:
    cost = cost or CostModel()
    if len(pop) != len(sched):
        raise ValueError(f"population has {len(pop)} agents but schedule has {len(sched)} slots")
    report = validate_schedule(sched)
    if not report.ok:
        raise ValueError(f"invalid schedule: {report}")

    w = pop.w
    order = slot_order(w, tie_break, seed)
    w_sorted = w[order]
    lam = sched.values
    k_sorted = np.cumsum(w_sorted * sched.increments)

    n = len(w)
    slot = np.empty(n, dtype=int)
    slot[order] = np.arange(1, n + 1)
    cum = np.empty(n)
    cum[order] = k_sorted
    reward = lam[slot - 1]
    disutility = cum / w
    return EquilibriumOutcome(
        slot=slot,
        theta=(slot - 0.5) / n,
        w=w,
        reward=reward,
        score=cost.effort_for(cum),
        cum=cum,
        cost=disutility,
        utility=reward - disutility,
        schedule=sched,
        cost_model=cost,
    )


def _deviation_utilities(outcome: EquilibriumOutcome, agents: np.ndarray, overtake_eps: float):
    """Candidate scores (ascending) and the utility matrix agents x candidates."""
    x = outcome.score
    xs = np.sort(x)
    cand = np.concatenate(([0.0], xs + overtake_eps))
    n_below = np.searchsorted(xs, cand, side="right")
    lam = outcome.schedule.values
    raw = outcome.cost_model.raw_cost(cand)

    xi = x[agents][:, None]
    # others with x_j <= y: everyone at or below y, minus the deviator itself
    count = n_below[None, :] - (xi <= cand[None, :])
    util = lam[count] - raw[None, :] / outcome.w[agents][:, None]

    # x_i + eps is only a candidate if some other agent shares the score x_i
    lo = np.searchsorted(xs, x[agents], side="left")
    hi = np.searchsorted(xs, x[agents], side="right")
    rows = np.arange(len(agents))
    util[rows[hi - lo == 1], lo[hi - lo == 1] + 1] = -np.inf
    return cand, util


def best_response(pop: Population, outcome: EquilibriumOutcome, agent: int,
                  overtake_eps: float = 1e-9) -> tuple[float, float]:
    """Best deviation score for one agent against everyone else's equilibrium scores.

    Candidates are 0 and x_j + overtake_eps for every other agent j. The
    deviation slot is 1 + #{j != i : x_j <= y}; ties go to the smaller score.
    """
    if not 0 <= agent < len(pop):
        raise KeyError(f"unknown agent id {agent}")
    if not overtake_eps > 0:
        raise ValueError("overtake_eps must be positive")
    cand, util = _deviation_utilities(outcome, np.array([agent]), overtake_eps)
    k = int(np.argmax(util[0]))
    return float(cand[k]), float(util[0, k])


def regrets(outcome: EquilibriumOutcome, overtake_eps: float = 1e-9) -> np.ndarray:
    """Per-agent gain from the best deviation, floored at 0."""
    n = outcome.n
    out = np.empty(n)
    for start in range(0, n, _CHUNK):
        agents = np.arange(start, min(start + _CHUNK, n))
        _, util = _deviation_utilities(outcome, agents, overtake_eps)
        out[agents] = np.maximum(util.max(axis=1) - outcome.utility[agents], 0.0)
    return out


def max_regret(pop: Population, outcome: EquilibriumOutcome, overtake_eps: float = 1e-9) -> float:
    """Largest deviation gain over all agents. Stores the mean gain in ``outcome.verified_regret``."""
    if not overtake_eps > 0:
        raise ValueError("overtake_eps must be positive")
    r = regrets(outcome, overtake_eps)
    outcome.verified_regret = float(r.mean())
    return float(r.max())


@dataclass(frozen=True)
class RankCheck:
    passed: bool
    violations: tuple[tuple[int, int], ...] = ()

    def __bool__(self) -> bool:
        return self.passed


def rank_preservation_check(pop: Population, outcome: EquilibriumOutcome) -> RankCheck:
    """Check that lower w never outscores or outranks higher w.

    Returns every pair (i, j) with w_i < w_j but x_i > x_j or slot_i > slot_j.
    Agents tied in w may appear in any slot order.
    """
    w, x, slot = pop.w, outcome.score, outcome.slot
    by_w = np.lexsort((slot, w))
    ws, xs, ss = w[by_w], x[by_w], slot[by_w]
    # quick pass: along w order, x must not drop and slots of distinct-w blocks must not interleave
    new_block = np.concatenate(([True], ws[1:] > ws[:-1]))
    block_max_slot = np.maximum.reduceat(ss, np.flatnonzero(new_block))
    block_min_slot = np.minimum.reduceat(ss, np.flatnonzero(new_block))
    block_max_x = np.maximum.reduceat(xs, np.flatnonzero(new_block))
    block_min_x = np.minimum.reduceat(xs, np.flatnonzero(new_block))
    prefix_max_slot = np.maximum.accumulate(block_max_slot)
    prefix_max_x = np.maximum.accumulate(block_max_x)
    if np.all(prefix_max_slot[:-1] < block_min_slot[1:]) and np.all(prefix_max_x[:-1] <= block_min_x[1:]):
        return RankCheck(True)

    pairs = []
    n = len(w)
    for start in range(0, n, _CHUNK):
        i = np.arange(start, min(start + _CHUNK, n))
        lower = w[i][:, None] < w[None, :]
        bad = lower & ((x[i][:, None] > x[None, :]) | (slot[i][:, None] > slot[None, :]))
        ii, jj = np.nonzero(bad)
        pairs.extend(zip((i[ii]).tolist(), jj.tolist()))
    return RankCheck(False, tuple(sorted(pairs)))
