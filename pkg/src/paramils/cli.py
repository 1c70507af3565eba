"""Command-line interface: ``paramils {configure,evaluate,compare,validate}``.

Exit codes: 0 success (budget exhaustion included), 1 invalid input, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .evaluation import (
    SIGNIFICANCE,
    OverlapError,
    TrainingResult,
    paired_wilcoxon,
    select_best_of_k,
    test_performance,
    write_report,
)
from .execution import TargetExecutionError
from .scenario import Scenario, ScenarioError, build_run, build_test_list, load_scenario, serialize_scenario
from .search import write_trajectory
from .space import Configuration, ConfigurationSpace, SpaceError

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class InputError(Exception):
    pass


def _parse_sets(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, eq, value = item.partition("=")
        if not eq or not key.strip():
            raise InputError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _scenario(args) -> Scenario:
    scenario = load_scenario(args.scenario)
    overrides = _parse_sets(args.set)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    return scenario.with_overrides(overrides) if overrides else scenario


def _claim(paths: list[Path], force: bool) -> None:
    existing = [p for p in paths if p.exists()]
    if existing and not force:
        raise InputError(f"refusing to overwrite {existing[0]} (use --force)")


def read_config_file(path: str | Path, space: ConfigurationSpace) -> Configuration:
    """``name = value`` lines; unspecified parameters take their defaults."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"configuration file not found: {path}")
    assignment = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        name, eq, value = line.partition("=")
        if not eq:
            raise InputError(f"{path}:{lineno}: expected 'name = value'")
        assignment[name.strip()] = value.strip()
    return space.configuration(assignment)


def format_config(config: Configuration) -> str:
    return "".join(f"{n} = {v}\n" for n, v in zip(config.names, config.values))


def _configure_one(scenario: Scenario, run: int, check_invariant: bool = False) -> dict:
    seed = (scenario.seed + run) % 2**32
    conf = build_run(scenario, seed=seed, check_invariant=check_invariant)
    incumbent = conf.run(scenario.strategy)
    ev = conf.evaluator
    result = {
        "run": run,
        "seed": seed,
        "incumbent": incumbent.key,
        "assignment": incumbent.assignment,
        "train_estimate": ev.estimate(incumbent),
        "n_runs": ev.n_runs(incumbent),
        "target_s": ev.consumed,
        "iterations": conf.iteration,
        "evaluations": ev.calls,
        "trajectory": write_trajectory(
            conf.trajectory,
            comment=f"master_seed={seed} strategy={scenario.strategy} capping={scenario.capping}",
        ),
        "config_text": format_config(incumbent),
    }
    test_list = build_test_list(scenario)
    if test_list is not None:
        train, _ = scenario.load_train()
        report = test_performance(
            incumbent, test_list, scenario.cutoff_time, scenario.make_backend(), scenario.penalty,
            train_instances=train, train_par=result["train_estimate"],
        )
        result["test_par"] = report.test_par
        result["test_report"] = report
    return result


def cmd_configure(args) -> int:
    scenario = _scenario(args)
    out = Path(args.out)
    runs = args.runs
    if runs < 1:
        raise InputError("--runs must be >= 1")
    run_dirs = [out / f"run-{j:02d}" for j in range(runs)]
    _claim([out / "report.json"] + [d / "trajectory.csv" for d in run_dirs], args.force)
    if scenario.test_instances is not None:
        train, _ = scenario.load_train()
        test, _ = scenario.load_test()
        if set(train) & set(test):
            raise OverlapError("test instances overlap training instances")

    if args.jobs > 1 and runs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_configure_one, [scenario] * runs, range(runs), [args.check_invariant] * runs))
    else:
        results = [_configure_one(scenario, j, args.check_invariant) for j in range(runs)]

    for d, res in zip(run_dirs, results):
        d.mkdir(parents=True, exist_ok=True)
        (d / "trajectory.csv").write_text(res.pop("trajectory"))
        (d / "incumbent.txt").write_text(res.pop("config_text"))
        report = res.pop("test_report", None)
        if report is not None:
            write_report(report, d, "test")

    best = select_best_of_k(
        [TrainingResult(r["run"], r["incumbent"], r["train_estimate"], r["n_runs"]) for r in results]
    )
    summary = {
        "scenario": serialize_scenario(scenario),
        "master_seed": scenario.seed,
        "best_run": best.run,
        "runs": results,
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for r in results:
        line = f"run {r['run']:2d}  seed {r['seed']}  train {r['train_estimate']:.4f}  N={r['n_runs']}"
        if "test_par" in r:
            line += f"  test {r['test_par']:.4f}"
        print(line)
    print(f"best run: {best.run}  incumbent: {results[best.run]['incumbent']}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    scenario = _scenario(args)
    space = scenario.load_space()
    config = read_config_file(args.config, space)
    test_list = build_test_list(scenario)
    if test_list is None:
        raise InputError("scenario has no test_instances")
    out = Path(args.out)
    _claim([out / "evaluation.csv", out / "evaluation.json"], args.force)
    train, _ = scenario.load_train()
    report = test_performance(
        config, test_list, scenario.cutoff_time, scenario.make_backend(), scenario.penalty,
        train_instances=train,
    )
    write_report(report, out, "evaluation")
    print(f"test PAR{scenario.penalty:g} = {report.test_par:.6f}  timeouts {report.timeouts}/{len(test_list)}")
    return EXIT_OK


def _load_report(directory: str) -> list[float]:
    path = Path(directory) / "report.json"
    if not path.is_file():
        raise InputError(f"no report.json in {directory}")
    runs = sorted(json.loads(path.read_text())["runs"], key=lambda r: r["run"])
    if any("test_par" not in r for r in runs):
        raise InputError(f"{path}: runs lack test performance (scenario without test_instances?)")
    return [r["test_par"] for r in runs]


def cmd_compare(args) -> int:
    a = _load_report(args.dir_a)
    b = _load_report(args.dir_b)
    if len(a) != len(b):
        raise InputError(f"mismatched run counts: {len(a)} vs {len(b)}")
    if len(a) < 5:
        raise InputError(f"below minimum pairs: {len(a)} runs, need at least 5")
    p = paired_wilcoxon(a, b)
    if p < SIGNIFICANCE:
        verdict = "A better" if sorted(a)[len(a) // 2] < sorted(b)[len(b) // 2] else "B better"
    else:
        verdict = "no difference"
    print(f"p = {p:.6g}")
    print(f"significant at {SIGNIFICANCE}: {'yes' if p < SIGNIFICANCE else 'no'}")
    print(f"verdict: {verdict}")
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = _scenario(args)
    space = scenario.load_space()
    train, _ = scenario.load_train()
    test = scenario.load_test()
    if test is not None and set(train) & set(test[0]):
        raise OverlapError("test instances overlap training instances")
    scenario.make_backend()
    print(f"ok: {len(space)} parameters, {space.size()} assignments, {len(train)} training instances"
          + (f", {len(test[0])} test instances" if test else ""))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="paramils-out", help="output directory")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("--seed", type=int, help="override the scenario master seed")
    common.add_argument("--set", action="append", default=[], metavar="K=V",
                        help="override a scenario key (repeatable)")

    parser = argparse.ArgumentParser(prog="paramils", description="Automatic algorithm configuration.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("configure", parents=[common], help="run the configurator")
    p.add_argument("scenario")
    p.add_argument("--runs", type=int, default=1, help="independent runs (seeds master+0..k-1)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--check-invariant", action="store_true", help="assert the incumbent invariant")
    p.set_defaults(func=cmd_configure)

    p = sub.add_parser("evaluate", parents=[common], help="test performance of a configuration")
    p.add_argument("scenario")
    p.add_argument("config", help="file of 'name = value' lines")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", parents=[common], help="paired Wilcoxon test of two configure outputs")
    p.add_argument("dir_a")
    p.add_argument("dir_b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", parents=[common], help="check a scenario")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ScenarioError, SpaceError, OverlapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (TargetExecutionError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
