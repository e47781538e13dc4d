"""Equilibrium effort, welfare and reward design for strategic ranking contests."""

from .design import (
    OptimizeResult,
    ProjectionError,
    RewardFamily,
    Scenario,
    SweepResult,
    fairness_optimize,
    instantiate,
    optimize,
    project_feasible,
    sweep,
)
from .equilibrium import (
    EquilibriumOutcome,
    best_response,
    max_regret,
    rank_preservation_check,
    solve_equilibrium,
)
from .model import (
    Agent,
    CostModel,
    DesignerObjective,
    GroupSpec,
    Population,
    PopulationSpec,
    RewardSchedule,
    SkillDist,
    effective_skill,
    make_population,
    validate_schedule,
)
from .scenario import ScenarioConfig, ScenarioError, format_scenario, parse_scenario
from .welfare import WelfareReport, designer_value, report

__version__ = "0.1.0"
