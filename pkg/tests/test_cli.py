import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from rankcontest import ScenarioError, format_scenario, parse_scenario
from rankcontest.cli import AGENT_HEADER, main, run

MINIMAL = """
[population]
n = 100

[population.group.all]
dist = uniform
lo = 0
hi = 1
env = 1

[reward]
family = lottery
budget = 0.3
"""

TWO_GROUP_4 = """
[population]
n = 4
[population.group.A]
fraction = 0.5
dist = grid
values = 1, 2
[population.group.B]
fraction = 0.5
dist = grid
values = 1, 2
env = 0.4
[reward]
family = top_k
budget = 0.5
"""


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_minimal_defaults():
    cfg = parse_scenario(MINIMAL)
    assert cfg.n == 100 and cfg.family == "lottery" and cfg.budget == 0.3
    assert cfg.gamma == 1.0
    assert cfg.tie_break == "id" and cfg.overtake_eps == 1e-9 and cfg.precision == 9
    assert cfg.groups[0].fraction == 1.0


def test_unknown_key_names_key_and_line():
    text = MINIMAL.replace("family = lottery", "rewards.family = lottery")
    with pytest.raises(ScenarioError, match=r"line 12: unknown key 'reward.rewards.family'") as info:
        parse_scenario(text)
    assert info.value.line == 12


def test_unknown_section():
    with pytest.raises(ScenarioError, match=r"unknown section \[rewards\]"):
        parse_scenario(MINIMAL.replace("[reward]", "[rewards]"))


def test_budget_range():
    with pytest.raises(ScenarioError, match="budget must lie in"):
        parse_scenario(MINIMAL.replace("budget = 0.3", "budget = 1.5"))


@pytest.mark.parametrize("old, new, message", [
    ("n = 100", "", "population.n"),
    ("family = lottery", "", "reward.family"),
    ("budget = 0.3", "", "reward.budget"),
    ("n = 100", "n = many", "expected int"),
    ("lo = 0", "lo = 2", "lo < hi"),
    ("family = lottery", "family = auction", "reward.family must be one of"),
])
def test_parse_errors(old, new, message):
    with pytest.raises(ScenarioError, match=message):
        parse_scenario(MINIMAL.replace(old, new))


def test_fractions_must_sum_to_one():
    text = TWO_GROUP_4.replace("fraction = 0.5\ndist = grid\nvalues = 1, 2\nenv", "fraction = 0.4\ndist = grid\nvalues = 1, 2\nenv")
    with pytest.raises(ScenarioError, match="sum to"):
        parse_scenario(text)


def test_round_trip():
    cfg = parse_scenario(TWO_GROUP_4)
    cfg = replace(cfg, r=0.1 + 0.2, cuts=(1 / 3,), probs=(0.1, 0.7), overtake_eps=3e-10, seed=42)
    assert parse_scenario(format_scenario(cfg)) == cfg


def test_lottery_run(tmp_path):
    code = run(parse_scenario(MINIMAL), "equilibrium", tmp_path)
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert list(summary) == ["budget", "applicant_welfare", "school_total", "school_per_seat", "planner",
                             "total_cost", "access", "access_gap", "welfare_gap", "max_regret",
                             "rank_preservation"]
    assert summary["applicant_welfare"] == summary["budget"] == 0.3
    assert summary["max_regret"] == 0
    assert summary["rank_preservation"] is True
    assert summary["access"] == {"all": 0.3}
    assert len(read_csv(tmp_path / "agents.csv")) == 100


def test_two_group_rows(tmp_path):
    assert run(parse_scenario(TWO_GROUP_4), "equilibrium", tmp_path) == 0
    rows = read_csv(tmp_path / "agents.csv")
    got = [(int(r["agent_id"]), r["group"], float(r["w"]), int(r["slot"]), float(r["lambda"]),
            float(r["score"]), float(r["cost"]), float(r["utility"])) for r in rows]
    assert got == [
        (2, "B", 0.4, 1, 0.0, 0.0, 0.0, 0.0),
        (3, "B", 0.8, 2, 0.0, 0.0, 0.0, 0.0),
        (0, "A", 1.0, 3, 1.0, 1.0, 1.0, 0.0),
        (1, "A", 2.0, 4, 1.0, 1.0, 0.5, 0.5),
    ]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["access"] == {"A": 1.0, "B": 0.0}
    assert summary["welfare_gap"] == 0.25


def test_determinism(tmp_path):
    text = TWO_GROUP_4.replace("[reward]", "[run]\ntie_break = random\n[reward]")
    for d in ("a", "b"):
        assert main(["--seed", "5", "sweep", "--scenario", str(write(tmp_path, text)), "--out",
                     str(tmp_path / d), "--steps", "5"]) == 0
    for name in ("agents.csv", "summary.json", "sweep.csv", "plot_data.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def write(tmp_path, text, name="scenario.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_header_exact(tmp_path):
    run(parse_scenario(MINIMAL), "equilibrium", tmp_path)
    first = (tmp_path / "agents.csv").read_text().splitlines()[0]
    assert first == "agent_id,group,skill,env,w,slot,theta,lambda,score,cost,utility"
    assert first.split(",") == AGENT_HEADER


def test_precision(tmp_path, monkeypatch):
    cfg = parse_scenario(MINIMAL)
    run(replace(cfg, precision=3), "equilibrium", tmp_path / "p3")
    row = read_csv(tmp_path / "p3" / "agents.csv")[1]
    assert row["skill"] == "0.015"
    monkeypatch.setenv("RANKCONTEST_PRECISION", "2")
    run(cfg, "equilibrium", tmp_path / "p2")
    assert read_csv(tmp_path / "p2" / "agents.csv")[1]["theta"] == "0.015"


def test_sweep_outputs(tmp_path):
    path = write(tmp_path, TWO_GROUP_4.replace("family = top_k", "family = randomized_top_k"))
    assert main(["sweep", "--scenario", str(path), "--param", "r", "--from", "0", "--to", "1",
                 "--steps", "3", "--out", str(tmp_path / "out")]) == 0
    rows = read_csv(tmp_path / "out" / "sweep.csv")
    assert [float(r["r"]) for r in rows] == [0, 0.5, 1]
    assert [float(r["access_gap"]) for r in rows] == [1, 0.5, 0]
    tidy = read_csv(tmp_path / "out" / "plot_data.csv")
    assert set(tidy[0]) == {"r", "metric", "value"}
    assert len(tidy) == 3 * len([k for k in rows[0] if k not in ("r", "error")])


def test_optimize_and_fairness(tmp_path):
    path = write(tmp_path, TWO_GROUP_4.replace("family = top_k", "family = randomized_top_k"))
    assert main(["optimize", "--scenario", str(path), "--objective", "welfare", "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["params"] == {"r": 1.0}
    assert (tmp_path / "o" / "search.csv").exists()
    assert main(["fairness", "--scenario", str(path), "--delta", "0", "--out", str(tmp_path / "f")]) == 0
    summary = json.loads((tmp_path / "f" / "summary.json").read_text())
    assert summary["params"] == {"r": 1.0}
    assert summary["access_gap"] == 0 and summary["fallback"] is False


def test_exit_codes(tmp_path):
    bad = write(tmp_path, MINIMAL.replace("budget = 0.3", "budget = 1.5"), "bad.ini")
    assert main(["equilibrium", "--scenario", str(bad), "--out", str(tmp_path / "x")]) == 1
    assert main(["equilibrium", "--scenario", str(tmp_path / "missing.ini"), "--out", str(tmp_path / "x")]) == 1
    good = write(tmp_path, MINIMAL)
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["equilibrium", "--scenario", str(good), "--out", str(blocker / "sub")]) == 2
    # rows that fail to instantiate are recorded, not fatal
    assert main(["sweep", "--scenario", str(good), "--param", "tau", "--from", "0.9", "--to", "0.9",
                 "--steps", "1", "--out", str(tmp_path / "s")]) == 0
