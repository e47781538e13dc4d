"""Command line entry point: ``rankcontest equilibrium|sweep|optimize|fairness``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .design import (
    OptimizeResult,
    RewardFamily,
    Scenario,
    fairness_optimize,
    instantiate,
    optimize,
    sweep,
)
from .equilibrium import max_regret, rank_preservation_check, solve_equilibrium
from .model import DesignerObjective, RewardSchedule, validate_schedule
from .scenario import ScenarioConfig, ScenarioError, parse_scenario
from .welfare import report

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

AGENT_HEADER = ["agent_id", "group", "skill", "env", "w", "slot", "theta", "lambda", "score", "cost", "utility"]
SUMMARY_METRICS = ["applicant_welfare", "school_total", "school_per_seat", "planner", "total_cost",
                   "access_gap", "welfare_gap"]


class Formatter:
    def __init__(self, precision: int):
        self.precision = precision

    def text(self, v) -> str:
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.{self.precision}g}"
        return str(v)

    def json(self, v):
        if isinstance(v, dict):
            return {k: self.json(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [self.json(x) for x in v]
        if isinstance(v, (bool, np.bool_)):
            return bool(v)
        if isinstance(v, (int, np.integer)):
            return int(v)
        if isinstance(v, (float, np.floating)):
            v = float(v)
            return None if not math.isfinite(v) else float(f"{v:.{self.precision}g}")
        return v


def _write_csv(path: Path, header: list[str], rows, fmt: Formatter) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt.text(row.get(h, "")) for h in header])


def _write_json(path: Path, payload: dict, fmt: Formatter) -> None:
    with open(path, "w") as fh:
        json.dump(fmt.json(payload), fh, indent=2)
        fh.write("\n")


def _equilibrium_files(scenario: Scenario, sched: RewardSchedule, eps: float):
    pop = scenario.population
    out = solve_equilibrium(pop, sched, scenario.cost, scenario.tie_break, scenario.seed)
    rep = report(pop, out, sched)
    rows = []
    for i in out.order:
        a = pop.agents[i]
        rows.append({
            "agent_id": a.id, "group": pop.label(a.group), "skill": a.skill, "env": a.env,
            "w": out.w[i], "slot": out.slot[i], "theta": out.theta[i], "lambda": out.reward[i],
            "score": out.score[i], "cost": out.cost[i], "utility": out.utility[i],
        })
    summary = {"budget": sched.budget}
    summary.update({k: getattr(rep, k) for k in SUMMARY_METRICS[:5]})
    summary["access"] = rep.access
    summary["access_gap"] = rep.access_gap
    summary["welfare_gap"] = rep.welfare_gap
    summary["max_regret"] = max_regret(pop, out, eps)
    summary["rank_preservation"] = rank_preservation_check(pop, out).passed
    return rows, summary


def _search_rows(result: OptimizeResult) -> tuple[list[str], list[dict]]:
    names: list[str] = []
    for ev in result.evaluations:
        names.extend(k for k in ev.params if k not in names)
    rows = []
    for ev in result.evaluations:
        row = {"stage": ev.stage, **ev.params, "designer_value": ev.value, "error": ev.error or ""}
        if ev.report is not None:
            row.update({k: getattr(ev.report, k) for k in SUMMARY_METRICS})
        rows.append(row)
    return ["stage", *names, *SUMMARY_METRICS, "designer_value", "error"], rows


def objective_for(name: str, cfg: ScenarioConfig) -> DesignerObjective:
    if name == "mixed":
        return cfg.mixed_objective()
    return DesignerObjective.named(name)


def run(cfg: ScenarioConfig, command: str, out_dir: str | os.PathLike, *, param: str = "r",
        start: float = 0.0, stop: float = 1.0, steps: int = 21, objective: str = "school",
        delta: float = 0.1) -> int:
    """Execute one command and write its output files. Returns the process exit code."""
    precision = int(os.environ.get("RANKCONTEST_PRECISION", cfg.precision))
    fmt = Formatter(precision)
    try:
        scenario = cfg.scenario(objective_for(objective, cfg))
        fam = cfg.reward_family()
        sched = instantiate(fam)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    extra_csv: tuple[str, list[str], list[dict]] | None = None
    plot_rows: list[dict] | None = None
    extra_summary: dict = {}
    try:
        if command == "sweep":
            if steps < 1:
                raise ScenarioError("--steps must be >= 1")
            grid = np.linspace(start, stop, steps) if steps > 1 else np.array([start])
            try:
                result = sweep(fam, param, grid, scenario)
            except ValueError as exc:
                raise ScenarioError(str(exc)) from None
            table = result.table()
            header = [param]
            for row in table:
                header.extend(k for k in row if k not in header)
            header.remove("error")
            header.append("error")
            extra_csv = ("sweep.csv", header, table)
            plot_rows = [{param: row[param], "metric": k, "value": v}
                         for row in table for k, v in row.items() if k not in (param, "error")]
        elif command in ("optimize", "fairness"):
            obj = scenario.objective
            if command == "optimize":
                result = optimize(obj, fam, scenario)
            else:
                if delta < 0:
                    raise ScenarioError("--delta must be nonnegative")
                result = fairness_optimize(obj, delta, fam, scenario)
                extra_summary["delta"] = delta
                extra_summary["fallback"] = result.fallback
            sched = result.schedule
            extra_summary.update(family="lottery" if result.fallback else fam.kind,
                                 params=result.params, objective=objective,
                                 objective_value=result.value)
            header, rows = _search_rows(result)
            extra_csv = ("search.csv", header, rows)
        elif command != "equilibrium":
            raise ScenarioError(f"unknown command {command!r}")
    except ScenarioError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        check = validate_schedule(sched)
        if not check.ok:
            raise RuntimeError(f"refusing to write an invalid schedule: {check}")
        rows, summary = _equilibrium_files(scenario, sched, cfg.overtake_eps)
        summary.update(extra_summary)

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "agents.csv", AGENT_HEADER, rows, fmt)
        _write_json(out / "summary.json", summary, fmt)
        if extra_csv is not None:
            name, header, table = extra_csv
            _write_csv(out / name, header, table, fmt)
        if plot_rows is not None:
            _write_csv(out / "plot_data.csv", [param, "metric", "value"], plot_rows, fmt)
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override run.seed")

    parser = argparse.ArgumentParser(prog="rankcontest", parents=[common],
                                     description="Equilibria and reward design for strategic ranking contests.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help):
        p = sub.add_parser(name, parents=[common], help=help)
        p.add_argument("--scenario", required=True, help="scenario file")
        p.add_argument("--out", required=True, help="output directory")
        return p

    add("equilibrium", "solve the equilibrium of the scenario's schedule")
    p = add("sweep", "sweep one reward parameter")
    p.add_argument("--param", default="r", choices=["r", "tau", "budget"])
    p.add_argument("--from", dest="start", type=float, default=0.0)
    p.add_argument("--to", dest="stop", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=21, help="number of grid points, endpoints included")
    p = add("optimize", "optimize the family's parameters for a designer objective")
    p.add_argument("--objective", default="school", choices=["school", "welfare", "planner", "mixed"])
    p = add("fairness", "optimize subject to an access-gap cap")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--objective", default="school", choices=["school", "welfare", "planner", "mixed"])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.scenario).read_text()
        cfg = parse_scenario(text)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioError as exc:
        print(f"config error: {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if hasattr(args, "seed"):
        cfg = replace(cfg, seed=args.seed)
    kwargs = {k: getattr(args, k) for k in ("param", "start", "stop", "steps", "objective", "delta") if hasattr(args, k)}
    return run(cfg, args.command, args.out, **kwargs)


if __name__ == "__main__":
    sys.exit(main())
