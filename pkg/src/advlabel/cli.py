"""Command-line entry point: ``advlabel train | experiment | fixture``.

Exit codes: 0 success, 1 fixture check failed, 2 usage or input error,
3 infeasible bounds, 4 solver did not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .core import ContractError, WeakSignalSet, accuracy
from .experiment import (
    PROTOCOL_SOLVER,
    DatasetError,
    bound_sweep,
    bounds_for,
    dependent_error_study,
    format_table,
    load_dataset,
    prepare_split,
    read_manifest,
    run_grid,
    signal_feature_indices,
    two_gaussian_dataset,
    write_curve_csv,
    write_results_csv,
    write_summary_csv,
    write_sweep_csv,
)
from .fixtures import run_fixture
from .models import SigmoidLinearModel, save_model
from .oracle import InfeasibleError, primal_value
from .solver import SolverConfig, train

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NOT_CONVERGED = 0, 1, 2, 3, 4

log = logging.getLogger("advlabel")


def parse_bounds(text: str):
    """``true`` or ``fixed:<value>``."""
    if text == "true":
        return "true"
    if text.startswith("fixed:"):
        try:
            value = float(text[len("fixed:"):])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad bound value in {text!r}") from None
        if not 0 < value < 1:
            raise argparse.ArgumentTypeError("fixed bound must lie in (0, 1)")
        return value
    raise argparse.ArgumentTypeError("bounds must be 'true' or 'fixed:<value>'")


def parse_range(text: str) -> list[float]:
    """``start:stop:step`` inclusive of ``stop``, or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 10) for i in range(count)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:stop:step or a list, got {text!r}") from None


def _solver_args(p: argparse.ArgumentParser, base: SolverConfig) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--step", type=float, default=base.step)
    g.add_argument("--schedule", choices=("constant", "inv_sqrt"), default=base.schedule)
    g.add_argument("--rho", type=float, default=base.rho)
    g.add_argument("--max-iters", type=int, default=base.max_iters)
    g.add_argument("--tol", type=float, default=base.tol)


def _solver_from(args) -> SolverConfig:
    return SolverConfig(step=args.step, schedule=args.schedule, rho=args.rho,
                        max_iters=args.max_iters, tol=args.tol, seed=args.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advlabel", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train ALL on one split")
    p.add_argument("--data", required=True, help="CSV file (relative paths honour $ADVLABEL_DATA_DIR)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--bounds", type=parse_bounds, default="true", help="true | fixed:<value>")
    p.add_argument("--seed", type=int, default=0, help="split seed")
    p.add_argument("--out", default="results", help="output directory")
    _solver_args(p, SolverConfig())

    p = sub.add_parser("experiment", help="run a study over random splits")
    p.add_argument("--study", choices=("grid", "dependent", "bound-sweep"), required=True)
    p.add_argument("--data", help="CSV file; omit with --synthetic")
    p.add_argument("--manifest")
    p.add_argument("--synthetic", action="store_true",
                   help="use the built-in two-Gaussian data (good/bad features)")
    p.add_argument("--bounds", type=parse_bounds, default="true")
    p.add_argument("--splits", type=int, default=10, help="number of split seeds, 0..N-1")
    p.add_argument("--seed", type=int, default=0, help="seed for synthetic data")
    p.add_argument("--good", default=None, help="wsK, column index or feature name")
    p.add_argument("--bad", default=None)
    p.add_argument("--max-copies", type=int, default=6)
    p.add_argument("--values", type=parse_range, default=parse_range("0.05:0.95:0.05"))
    p.add_argument("--jobs", type=int, default=1, help="parallel splits")
    p.add_argument("--out", default="results")
    _solver_args(p, PROTOCOL_SOLVER)

    p = sub.add_parser("fixture", help="two-example toy problem with oracle cross-checks")
    p.add_argument("--extra-signals", type=int, default=0, help="jittered copies of q2")
    p.add_argument("--no-constraints", action="store_true")
    p.add_argument("--bounds", type=parse_bounds, default="true",
                   help="true keeps the built-in 0.4 bounds; fixed:<v> replaces them")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _resolve_feature(key: str, dataset, manifest) -> int:
    if key.lower().startswith("ws") and key[2:].isdigit():
        k = int(key[2:])
        features = signal_feature_indices(dataset, manifest)
        if not 1 <= k <= len(features):
            raise DatasetError(f"{key}: only {len(features)} weak-signal features defined")
        return features[k - 1]
    return dataset.feature_index(int(key) if key.lstrip("-").isdigit() else key)


def cmd_train(args) -> int:
    manifest = read_manifest(args.manifest)
    dataset = load_dataset(args.data, manifest)
    features = signal_feature_indices(dataset, manifest)
    config = _solver_from(args)
    split = prepare_split(dataset, features, args.seed)
    bounds = bounds_for(split, args.bounds)
    ws = WeakSignalSet(split.signals, bounds, tuple(f"ws{i + 1}" for i in range(len(features))))
    learner_view = split.train.without_labels()
    result = train(learner_view, ws, SigmoidLinearModel.zeros(learner_view), config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    p = result.model.predict(learner_view)
    try:
        primal = primal_value(p, ws)
    except InfeasibleError:
        primal = None
    record = {
        "time": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "dataset": manifest.name,
        "seed": args.seed,
        "bounds_mode": args.bounds,
        "bounds": bounds.tolist(),
        "config": asdict(config),
        "status": result.status,
        "converged": result.converged,
        "iterations": result.iterations,
        "message": result.message,
        "final_primal_value": primal,
        "test_accuracy": accuracy(result.model.predict(split.test), split.test.true_labels),
    }
    if not result.infeasible:
        save_model(result.model, out / "model.json")
    result.trace.to_csv(out / "trace.csv")
    with open(out / "run.jsonl", "a") as fh:
        fh.write(json.dumps(record) + "\n")

    print(f"{manifest.name} seed={args.seed} status={result.status} iterations={result.iterations}")
    if result.infeasible:
        print(f"infeasible bounds: {result.message}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print(f"test accuracy {record['test_accuracy']:.4f}  primal value {primal:.4f}")
    print(f"wrote {out / 'model.json'}, {out / 'trace.csv'}, {out / 'run.jsonl'}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _experiment_data(args):
    if args.synthetic:
        return two_gaussian_dataset(seed=args.seed), None, "two_gaussian"
    if not args.data or not args.manifest:
        raise DatasetError("--data and --manifest are required unless --synthetic is given")
    manifest = read_manifest(args.manifest)
    return load_dataset(args.data, manifest), manifest, manifest.name


def cmd_experiment(args) -> int:
    dataset, manifest, name = _experiment_data(args)
    solver = replace(_solver_from(args), seed=0)
    seeds = range(args.splits)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.study == "grid":
        features = signal_feature_indices(dataset, manifest)
        result = run_grid(dataset, features, args.bounds, seeds=seeds, name=name,
                          solver=solver, jobs=args.jobs)
        write_results_csv(result, out / "results.csv")
        write_summary_csv(result, out / "summary.csv")
        table = format_table(result)
        (out / "table.txt").write_text(table + "\n")
        print(table)
        flagged = sum(r.flagged for r in result.records)
        return EXIT_INFEASIBLE if flagged == len(result.records) else EXIT_OK

    if args.study == "dependent":
        good = _resolve_feature(args.good or ("good" if args.synthetic else "ws1"), dataset, manifest)
        bad = _resolve_feature(args.bad or ("bad" if args.synthetic else "ws2"), dataset, manifest)
        curves = dependent_error_study(dataset, good, bad, args.max_copies, seeds=seeds,
                                       solver=solver, jobs=args.jobs)
        write_curve_csv(curves, out / "dependent.csv")
        print("copies  " + "  ".join(f"{m:>6}" for m in curves))
        for k in range(args.max_copies):
            print(f"{k + 1:>6}  " + "  ".join(f"{curves[m][k]:>6.3f}" for m in curves))
        return EXIT_OK

    features = signal_feature_indices(dataset, manifest)
    points = bound_sweep(dataset, features, args.values, seeds=seeds, solver=solver, jobs=args.jobs)
    write_sweep_csv(points, out / "bound_sweep.csv")
    print(" bound   error  infeasible")
    for pt in points:
        err = "     -" if pt.excluded else f"{pt.error:6.3f}"
        print(f"{pt.bound:6.2f}  {err}  {pt.infeasible_splits:>3}/{pt.splits}")
    return EXIT_OK


def cmd_fixture(args) -> int:
    bound = None if args.bounds == "true" else args.bounds
    report = run_fixture(args.extra_signals, constraints=not args.no_constraints,
                         bound=bound, seed=args.seed)
    print("\n".join(report.lines()))
    if report.result.infeasible:
        print(f"infeasible bounds: {report.result.message}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK if report.passed else EXIT_FAIL


COMMANDS = {"train": cmd_train, "experiment": cmd_experiment, "fixture": cmd_fixture}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DatasetError, ContractError, FileNotFoundError) as exc:
        print(f"advlabel: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
