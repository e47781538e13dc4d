"""Stakeholder metrics over an equilibrium outcome."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .equilibrium import EquilibriumOutcome
from .model import DesignerObjective, Population, RewardSchedule


@dataclass(frozen=True)
class WelfareReport:
    """Population means of applicant, school and planner payoffs plus per-group access.

    ``access`` and ``group_welfare`` are keyed by group label.
    """

    budget: float
    applicant_welfare: float
    school_total: float
    school_per_seat: float
    planner: float
    total_cost: float
    access: dict[str, float]
    access_gap: float
    welfare_gap: float
    group_welfare: dict[str, float]

    def as_dict(self) -> dict:
        return asdict(self)


def _spread(values) -> float:
    values = list(values)
    return max(values) - min(values) if values else 0.0


def report(pop: Population, outcome: EquilibriumOutcome, sched: RewardSchedule | None = None) -> WelfareReport:
    sched = sched or outcome.schedule
    lam = sched.values[outcome.slot - 1]
    x = outcome.score
    budget = sched.budget
    school_total = float(np.mean(lam * x))

    gid = pop.group_ids
    access, group_welfare = {}, {}
    for g in sorted(set(gid.tolist())):
        members = gid == g
        label = pop.label(g)
        access[label] = float(np.mean(lam[members]))
        group_welfare[label] = float(np.mean(outcome.utility[members]))

    return WelfareReport(
        budget=budget,
        applicant_welfare=float(np.mean(outcome.utility)),
        school_total=school_total,
        school_per_seat=school_total / budget if budget != 0 else 0.0,
        planner=float(np.mean(x)),
        total_cost=float(np.mean(outcome.cost)),
        access=access,
        access_gap=_spread(access.values()),
        welfare_gap=_spread(group_welfare.values()),
        group_welfare=group_welfare,
    )


def designer_value(rep: WelfareReport, obj: DesignerObjective) -> float:
    return (obj.weight_school * rep.school_total
            + obj.weight_welfare * rep.applicant_welfare
            + obj.weight_planner * rep.planner)
