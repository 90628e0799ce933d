"""Command-line front end.

Subcommands: `plan` runs the grid search and then the smoothing stage and
writes a plan file; `validate` re-checks an existing plan against its
problem; `export` writes CSV traces; `grid-info` prints per-stage
feasibility diagnostics.  Exit codes are a stable contract: 0 success, 1
input error, 2 planner infeasible, 3 validation failure.  Progress goes to
stderr; result data goes to files.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import fileio
from .constraints import check_trajectory
from .ddp import build_stage, dp_solve, make_grid
from .errors import InfeasiblePlanError, OptiwbError, ProblemFormatError, SmoothingError
from .model import GridSpec, PlannerConfig
from .objective import trajectory_cost
from .smoothing import smooth_optimize

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_VIOLATIONS = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _progress(message):
    print(message, file=sys.stderr)


def _override_config(config: PlannerConfig, args) -> PlannerConfig:
    from dataclasses import replace

    grid = config.grid
    updates = {}
    for name in ("dx", "dy", "dh"):
        value = getattr(args, f"grid_{name}", None)
        if value is not None:
            if value <= 0:
                raise _UsageError(f"--grid-{name} must be positive")
            updates[name] = value
    for name in ("x_range", "y_range", "h_range"):
        value = getattr(args, f"grid_{name[0]}_range", None)
        if value is not None:
            updates[name] = (value[0], value[1])
    if updates:
        grid = replace(grid, **updates)
        config = replace(config, grid=grid)
    if getattr(args, "sigma", None) is not None:
        if not 0.0 <= args.sigma <= 1.0:
            raise _UsageError("--sigma must lie in [0, 1]")
        config = replace(config, sigma=args.sigma)
    return config


def _print_overrides(args):
    shown = []
    for name in ("sigma", "grid_dx", "grid_dy", "grid_dh"):
        value = getattr(args, name, None)
        if value is not None:
            shown.append(f"{name.replace('_', '-')}={value}")
    for name in ("grid_x_range", "grid_y_range", "grid_h_range"):
        value = getattr(args, name, None)
        if value is not None:
            shown.append(f"{name.replace('_', '-')}={value[0]}:{value[1]}")
    if shown:
        _progress("overrides: " + " ".join(shown))


def _cost_table(rows):
    lines = ["stage        total        I_TV       I_SNV"]
    for name, cost in rows:
        lines.append(
            f"{name:<10} {cost.total:>11.6f} {cost.tv_integral:>11.6f} {cost.snv_integral:>11.6f}"
        )
    return "\n".join(lines)


def cmd_plan(args) -> int:
    try:
        model, scene, task, config = fileio.load_problem(args.problem)
        config = _override_config(config, args)
    except ProblemFormatError as exc:
        for err in exc.errors:
            _progress(f"input error: {err}")
        return EXIT_INPUT
    _print_overrides(args)
    try:
        _progress("grid search...")
        solution = dp_solve(model, scene, task, config)
        rows = [("grid", solution.cost)]
        if args.ddp_only or task.n_segments == 0:
            if not args.ddp_only:
                _progress("single waypoint: skipping smoothing")
            fileio.save_plan(args.out, solution, sample_rate=args.seed_sample_rate)
        else:
            _progress("smoothing...")
            result = smooth_optimize(model, scene, task, solution, config)
            rows.append(("smoothed", result.cost))
            fileio.save_plan(args.out, result, sample_rate=args.seed_sample_rate)
    except ValueError as exc:
        _progress(f"input error: {exc}")
        return EXIT_INPUT
    except (InfeasiblePlanError, SmoothingError) as exc:
        _progress(f"infeasible: {exc}")
        return EXIT_INFEASIBLE
    print(_cost_table(rows))
    _progress(f"plan written to {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        model, scene, task, config = fileio.load_problem(args.problem)
        plan = fileio.load_plan(args.plan)
    except ProblemFormatError as exc:
        for err in exc.errors:
            _progress(f"input error: {err}")
        return EXIT_INPUT
    samples = args.samples or config.smoothing.samples_per_interval
    tol = config.smoothing.constraint_tol
    if plan.trajectory is not None:
        traj = plan.trajectory
    else:
        from .model import JointTrajectory

        traj = JointTrajectory.from_samples(plan.discrete)
    report = check_trajectory(
        model, scene, traj, samples_per_interval=samples,
        rolling_tol=tol, tol=tol,
    )
    cost = trajectory_cost(model, scene, traj, config.sigma, samples)
    print(_cost_table([("checked", cost)]))
    if report.feasible:
        _progress("plan verifies: no violations")
        return EXIT_OK
    print("violations:")
    for v in report.violations:
        print(f"  {v.constraint_id:<24} t={v.where:<10.4f} magnitude={v.magnitude:.6g}")
    return EXIT_VIOLATIONS


def cmd_grid_info(args) -> int:
    try:
        model, scene, task, config = fileio.load_problem(args.problem)
    except ProblemFormatError as exc:
        for err in exc.errors:
            _progress(f"input error: {err}")
        return EXIT_INPUT
    n = len(task.waypoints)
    if args.stage is not None and not 0 <= args.stage < n:
        _progress(f"input error: stage {args.stage} outside 0..{n - 1}")
        return EXIT_INPUT
    grid = make_grid(model, task, config)
    shape = grid.shape
    print(f"grid: {shape[0]} x {shape[1]} x {shape[2]} = {int(np.prod(shape))} cells")
    stages = [args.stage] if args.stage is not None else range(n)
    print("stage   feasible   pruned")
    for i in stages:
        try:
            nodes = build_stage(model, scene, task, grid, i, config)
            counts = {}
            feasible = len(nodes)
        except InfeasiblePlanError as exc:
            counts = exc.pruned
            feasible = 0
        detail = " ".join(f"{k}={v}" for k, v in sorted(counts.items())) if counts else ""
        print(f"{i:>5} {feasible:>10}   {detail}")
    return EXIT_OK


def cmd_export(args) -> int:
    try:
        model, scene, task, config = fileio.load_problem(args.problem)
        plan = fileio.load_plan(args.plan)
    except ProblemFormatError as exc:
        for err in exc.errors:
            _progress(f"input error: {err}")
        return EXIT_INPUT
    fileio.export_traces(args.out, plan, scene, model, sample_rate=args.sample_rate)
    _progress(f"traces written to {args.out}")
    return EXIT_OK


def _range_pair(text):
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected LO:HI")
    return (float(parts[0]), float(parts[1]))


def build_parser() -> _Parser:
    parser = _Parser(prog="optiwb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    plan = sub.add_parser("plan", help="run the two-stage planner")
    plan.add_argument("problem", help="problem file (optiwb-scene/1)")
    plan.add_argument("out", help="output plan file (optiwb-plan/1)")
    plan.add_argument("--ddp-only", action="store_true", help="skip the smoothing stage")
    plan.add_argument("--sigma", type=float, default=None, help="override the objective weight")
    plan.add_argument("--grid-dx", type=float, default=None)
    plan.add_argument("--grid-dy", type=float, default=None)
    plan.add_argument("--grid-dh", type=float, default=None)
    plan.add_argument("--grid-x-range", type=_range_pair, default=None, metavar="LO:HI")
    plan.add_argument("--grid-y-range", type=_range_pair, default=None, metavar="LO:HI")
    plan.add_argument("--grid-h-range", type=_range_pair, default=None, metavar="LO:HI")
    plan.add_argument(
        "--seed-sample-rate", type=float, default=10.0,
        help="sampling rate (Hz) of the exported trajectory",
    )
    plan.set_defaults(func=cmd_plan)

    validate = sub.add_parser("validate", help="re-check an existing plan")
    validate.add_argument("plan")
    validate.add_argument("problem")
    validate.add_argument("--samples", type=int, default=None, metavar="M")
    validate.set_defaults(func=cmd_validate)

    export = sub.add_parser("export", help="write CSV traces for a plan")
    export.add_argument("plan")
    export.add_argument("problem")
    export.add_argument("out")
    export.add_argument("--sample-rate", type=float, default=10.0)
    export.set_defaults(func=cmd_export)

    info = sub.add_parser("grid-info", help="per-stage feasibility diagnostics")
    info.add_argument("problem")
    info.add_argument("--stage", type=int, default=None)
    info.set_defaults(func=cmd_grid_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        _progress(f"input error: {exc}")
        return EXIT_INPUT
    except FileNotFoundError as exc:
        _progress(f"input error: {exc}")
        return EXIT_INPUT
    except OptiwbError as exc:
        _progress(f"error: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
