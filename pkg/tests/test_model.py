import numpy as np
import pytest
from hypothesis import given, strategies as st

from rankcontest import (
    Agent,
    CostModel,
    DesignerObjective,
    GroupSpec,
    PopulationSpec,
    RewardSchedule,
    SkillDist,
    effective_skill,
    make_population,
    validate_schedule,
)
from rankcontest.model import group_sizes


def uniform_group(label="A", fraction=1.0, lo=0.0, hi=1.0, env=1.0):
    return GroupSpec(label, fraction, SkillDist("uniform", lo=lo, hi=hi), env)


def test_quantile_placement():
    pop = make_population(PopulationSpec(4, (uniform_group(),)))
    np.testing.assert_allclose([a.skill for a in pop.agents], [0.125, 0.375, 0.625, 0.875], atol=1e-15)
    assert [a.id for a in pop.agents] == [0, 1, 2, 3]


@pytest.mark.parametrize("fractions, n, sizes", [
    ((0.5, 0.5), 4, [2, 2]),
    ((0.3, 0.7), 4, [1, 3]),
    ((0.2, 0.3, 0.5), 7, [1, 2, 4]),
    ((1 / 3, 1 / 3, 1 / 3), 10, [4, 3, 3]),
])
def test_largest_remainder(fractions, n, sizes):
    # (0.3, 0.7) at n=4: raw (1.2, 2.8) -> floors (1, 2), the spare seat goes to remainder 0.8
    assert group_sizes(fractions, n) == sizes
    assert sum(sizes) == n


def test_two_group_population():
    spec = PopulationSpec(4, (uniform_group("A", 0.3), uniform_group("B", 0.7, env=0.5)))
    pop = make_population(spec)
    assert [a.group for a in pop.agents] == [0, 1, 1, 1]
    assert pop.groups == {0: ("A", 0.3), 1: ("B", 0.7)}
    assert pop.w[1] == pytest.approx(pop.agents[1].skill * 0.5)


def test_random_mode_reproducible():
    spec = PopulationSpec(50, (GroupSpec("A", 1.0, SkillDist("lognormal", mu=0.0, sigma=0.5)),), mode="random")
    a = make_population(spec, seed=7)
    b = make_population(spec, seed=7)
    c = make_population(spec, seed=8)
    assert a == b
    assert a != c


def test_lognormal_quantiles_median():
    pop = make_population(PopulationSpec(3, (GroupSpec("A", 1.0, SkillDist("lognormal", mu=0.5, sigma=1.0)),)))
    assert pop.agents[1].skill == pytest.approx(np.exp(0.5))


def test_grid_distribution_on_quantiles():
    pop = make_population(PopulationSpec(4, (GroupSpec("A", 1.0, SkillDist("grid", values=(3.0, 1.0))),)))
    assert [a.skill for a in pop.agents] == [1.0, 1.0, 3.0, 3.0]


@pytest.mark.parametrize("spec", [
    PopulationSpec(4, (uniform_group("A", 0.5), uniform_group("B", 0.4))),
    PopulationSpec(1, (uniform_group(),)),
    PopulationSpec(4, (uniform_group(env=0.0),)),
    PopulationSpec(4, (uniform_group("A", 1.2), uniform_group("B", -0.2))),
])
def test_make_population_errors(spec):
    with pytest.raises(ValueError):
        make_population(spec)


def test_nonpositive_distribution_parameters():
    with pytest.raises(ValueError):
        SkillDist("uniform", lo=1.0, hi=1.0)
    with pytest.raises(ValueError):
        SkillDist("lognormal", sigma=0.0)
    with pytest.raises(ValueError):
        SkillDist("grid", values=(1.0, 0.0))


@pytest.mark.parametrize("skill, env, w", [(1, 1, 1), (2, 0.5, 1), (2, 0.4, 0.8)])
def test_effective_skill(skill, env, w):
    assert effective_skill(Agent(0, 0, skill, env)) == pytest.approx(w, abs=1e-15)


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(1.001, 2))
def test_effective_skill_increasing(skill, env, factor):
    base = effective_skill(Agent(0, 0, skill, env))
    assert effective_skill(Agent(0, 0, skill * factor, env)) > base
    assert effective_skill(Agent(0, 0, skill, env * factor)) > base


def test_agent_rejects_nonpositive():
    with pytest.raises(ValueError):
        Agent(0, 0, 0.0, 1.0)


@given(st.floats(1, 4), st.floats(1e-6, 1e3), st.floats(0.01, 10))
def test_cost_round_trip(gamma, k, w):
    cost = CostModel(gamma)
    e = cost.effort_for(k)
    assert cost.disutility(e, w) * w == pytest.approx(k, rel=1e-12)


@given(st.floats(1, 4), st.floats(0.01, 10))
def test_cost_convex_increasing(gamma, w):
    cost = CostModel(gamma)
    e = np.linspace(0, 3, 301)
    c = cost.disutility(e, w)
    assert c[0] == 0
    assert np.all(np.diff(c) > 0)
    assert np.all(np.diff(c, 2) >= -1e-12)


def test_cost_rejects_concave():
    with pytest.raises(ValueError):
        CostModel(0.5)


def test_validate_ok():
    assert validate_schedule(RewardSchedule([0, 0, 1, 1], 0.5)).ok


def test_validate_monotonicity():
    rep = validate_schedule(RewardSchedule([0.5, 0.4, 1, 1], 0.725))
    assert [(v.kind, v.slot) for v in rep.violations] == [("monotonicity", 2)]
    assert rep.violations[0].magnitude == pytest.approx(0.1)


def test_validate_budget():
    rep = validate_schedule(RewardSchedule([0, 0, 1, 1], 0.4))
    (v,) = rep.violations
    assert v.kind == "budget"
    assert v.magnitude == pytest.approx(0.1)
    assert "mean 0.5" in v.message


def test_validate_range_reports_every_slot():
    rep = validate_schedule(RewardSchedule([-0.1, 0.5, 1.2], 0.5333333333333333))
    assert [(v.kind, v.slot) for v in rep.violations] == [("range", 1), ("range", 3)]


def test_schedule_is_immutable():
    s = RewardSchedule([0, 1], 0.5)
    with pytest.raises(ValueError):
        s.values[0] = 0.3


def test_objective_validation():
    with pytest.raises(ValueError):
        DesignerObjective(0, 0, 0)
    with pytest.raises(ValueError):
        DesignerObjective(1, float("nan"), 0)
    with pytest.raises(ValueError):
        DesignerObjective(1, 0, 0, fairness_delta=-0.1)
    assert DesignerObjective.named("welfare") == DesignerObjective(0.0, 1.0, 0.0)
