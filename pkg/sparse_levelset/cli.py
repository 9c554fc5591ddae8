"""Command-line front end.

    python -m sparse_levelset solve --problem gen:gauss-en --loss huber --sigma-ratio 0.05 --method pegasus
    python -m sparse_levelset experiment --grid grid.yml --parallel 4
    python -m sparse_levelset pareto --problem tiny.txt --loss student --grid-points 25
    python -m sparse_levelset recovery --seeds 10

CSV goes to stdout (or ``--csv``); diagnostics go to stderr.
Exit codes: 0 success, 2 usage or unsupported input, 3 numerical failure.
"""
import argparse
import csv
import logging
import os
import sys
from typing import List, Optional, Sequence

import numpy as np
import yaml

from sparse_levelset.config import SolverSettings, load_environment
from sparse_levelset.errors import (
    BracketError,
    DomainError,
    InvariantViolationError,
    NumericalFailureError,
    RankDeficiencyError,
    UnsupportedModelError,
)
from sparse_levelset.experiments import (
    DEFAULT_METHODS,
    DEFAULT_SIGMA_RATIOS,
    CellResult,
    ExperimentGrid,
    recovery_study,
    run_cell,
    run_grid,
)
from sparse_levelset.levelset import SigmaConfig, SigmaProblem, frames_tau, sample_pareto_curve
from sparse_levelset.losses import DEFAULT_DELTA, DEFAULT_NU, LossModel
from sparse_levelset.problems import PRESETS, load_source
from sparse_levelset.spg import TauConfig
from utils.grid_manager import list_problem_files, load_grid, save_grid

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

SOLVE_HEADER = ["problem", "M", "N", "loss", "sigma", "method", "rho_r", "x_norm1", "nnz", "tau_solves",
                "converged"]
EXPERIMENT_HEADER = ["problem", "M", "N", "loss", "sigma_ratio", "sigma", "method", "rho_r", "x_norm1", "nnz",
                     "tau_solves", "converged"]
PARETO_HEADER = ["tau", "nu"]
RECOVERY_HEADER = ["seed", "loss", "sigma", "rel_error", "nnz", "tau_solves", "converged"]

METHOD_TOKENS = ["rf", "illinois", "pegasus", "ab", "newton"]
LOSS_TOKENS = ["ls", "huber", "student"]


def format_value(value) -> str:
    """Locale-independent CSV cell; floats carry 17 significant digits."""
    if value is None:
        return "NA"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _row(result: CellResult, header: Sequence[str]) -> List[str]:
    values = {
        "problem": result.problem, "M": result.m, "N": result.n, "loss": result.loss,
        "sigma_ratio": result.sigma_ratio, "sigma": result.sigma, "method": result.method,
        "rho_r": result.rho_r, "x_norm1": result.x_norm1, "nnz": result.nnz,
        "tau_solves": result.tau_solves, "converged": result.converged, "rel_error": result.rel_error,
        "seed": result.problem.split("=", 1)[-1],
    }
    return [format_value(values[column]) for column in header]


def _write(args, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _add_solver_flags(parser: argparse.ArgumentParser, settings: SolverSettings) -> None:
    group = parser.add_argument_group("solver")
    group.add_argument("--max-iters", type=_positive_int, default=settings.max_iters,
                       help="SPG iteration cap per tau-solve (default: %(default)s)")
    group.add_argument("--opt-tol", type=_positive_float, default=settings.opt_tol,
                       help="SPG relative optimality tolerance (default: %(default)s)")
    group.add_argument("--ls-memory", type=_positive_int, default=settings.ls_memory,
                       help="Nonmonotone line-search memory (default: %(default)s)")
    group.add_argument("--ftol-rel", type=float, default=settings.ftol_rel,
                       help="Root accuracy on psi relative to sigma (default: %(default)s)")
    group.add_argument("--eps", type=_positive_float, default=None,
                       help="Bracket width tolerance on tau (default: 1e-6 * tau_MF)")
    group.add_argument("--max-root-iter", type=_positive_int, default=settings.max_root_iter,
                       help="Cap on tau-solves per sigma-solve (default: %(default)s)")
    group.add_argument("--no-warm-start", dest="warm_start", action="store_false", default=settings.warm_start,
                       help="Start every tau-solve from x = 0")
    group.add_argument("--allow-regularization", action="store_true",
                       help="Regularize a singular D D^T instead of failing")


def _add_loss_flags(parser: argparse.ArgumentParser, multiple: bool = False) -> None:
    if multiple:
        parser.add_argument("--losses", nargs="+", choices=LOSS_TOKENS, default=LOSS_TOKENS)
    else:
        parser.add_argument("--loss", choices=LOSS_TOKENS, default="ls", help="Misfit penalty (default: ls)")
    parser.add_argument("--delta", type=_positive_float, default=DEFAULT_DELTA, help="Huber knee (default: %(default)s)")
    parser.add_argument("--nu", type=_positive_float, default=DEFAULT_NU,
                        help="Student's t parameter (default: %(default)s)")


def build_parser(settings: Optional[SolverSettings] = None) -> argparse.ArgumentParser:
    settings = settings or SolverSettings()
    parser = argparse.ArgumentParser(
        prog="sparse_levelset",
        description="l1 recovery under a misfit constraint via bracketing root finding on the Pareto frontier.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More logging on stderr (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    presets = ", ".join(PRESETS)
    solve = sub.add_parser("solve", help="Solve one sigma-problem and print a CSV row")
    solve.add_argument("--problem", required=True,
                       help=f"Problem file or generator source 'gen:<preset|key=value,...>' (presets: {presets})")
    _add_loss_flags(solve)
    solve.add_argument("--sigma-ratio", type=_positive_float, required=True, help="sigma as a fraction of rho(y)")
    solve.add_argument("--method", choices=METHOD_TOKENS, default="illinois")
    solve.add_argument("--seed", type=int, default=None, help="Seed for generator sources")
    solve.add_argument("--csv", help="Write CSV here instead of stdout")
    _add_solver_flags(solve, settings)

    experiment = sub.add_parser("experiment", help="Run a (problem, ratio, method, loss) grid")
    experiment.add_argument("--grid", help="YAML grid file; overrides the list flags below")
    experiment.add_argument("--problems", nargs="+", default=["gen:gauss-en"],
                            help="Problem files, folders of problem files or generator sources")
    experiment.add_argument("--sigma-ratios", nargs="+", type=float, default=list(DEFAULT_SIGMA_RATIOS))
    experiment.add_argument("--methods", nargs="+", choices=METHOD_TOKENS, default=list(DEFAULT_METHODS))
    _add_loss_flags(experiment, multiple=True)
    experiment.add_argument("--parallel", type=_positive_int, default=1, help="Worker threads (default: 1)")
    experiment.add_argument("--save-grid", metavar="FOLDER", help="Also save the resolved grid as YAML in FOLDER")
    experiment.add_argument("--csv", help="Write CSV here instead of stdout")
    _add_solver_flags(experiment, settings)

    pareto = sub.add_parser("pareto", help="Sample nu(tau) on [0, tau_MF]")
    pareto.add_argument("--problem", required=True)
    _add_loss_flags(pareto)
    pareto.add_argument("--grid-points", type=_positive_int, default=25)
    pareto.add_argument("--seed", type=int, default=None)
    pareto.add_argument("--csv", help="Write CSV here instead of stdout")
    _add_solver_flags(pareto, settings)

    recovery = sub.add_parser("recovery", help="Outlier recovery study, sigma = rho(outliers)")
    recovery.add_argument("--seeds", type=_positive_int, default=10, help="Number of seeds (default: 10)")
    recovery.add_argument("--first-seed", type=int, default=0)
    recovery.add_argument("--method", choices=METHOD_TOKENS[:4], default="illinois")
    recovery.add_argument("--parallel", type=_positive_int, default=1)
    recovery.add_argument("--csv", help="Write CSV here instead of stdout")
    _add_solver_flags(recovery, settings)

    return parser


def _configs(args):
    cfg = TauConfig(max_iters=args.max_iters, opt_tol=args.opt_tol, ls_memory=args.ls_memory)
    options = SigmaConfig(eps=args.eps, ftol_rel=args.ftol_rel, max_root_iter=args.max_root_iter,
                          warm_start=args.warm_start, allow_regularization=args.allow_regularization)
    return cfg, options


def _source(problem: str, seed: Optional[int]) -> str:
    if seed is None:
        return problem
    if not problem.startswith("gen:"):
        logger.warning("--seed ignored for file problem %s", problem)
        return problem
    return f"{problem},seed={seed}"


def cmd_solve(args) -> int:
    cfg, options = _configs(args)
    source = _source(args.problem, args.seed)
    instance = load_source(source)
    model = LossModel.from_token(args.loss, delta=args.delta, nu=args.nu)
    if args.method == "newton" and not model.convex:
        raise UnsupportedModelError(f"Newton's method is not supported for the nonconvex {model.label!r} loss")
    result = run_cell(instance, source, args.sigma_ratio, args.method, model, cfg, options)
    _write(args, SOLVE_HEADER, [_row(result, SOLVE_HEADER)])
    return EXIT_OK


def _expand_problems(problems: Sequence[str]) -> List[str]:
    """Replace each folder by the problem files it holds."""
    expanded = []
    for problem in problems:
        if problem.startswith("gen:") or not os.path.isdir(problem):
            expanded.append(problem)
            continue
        found = list_problem_files(problem)
        if not found:
            raise DomainError(f"No problem files in folder {problem}")
        expanded.extend(found)
    return expanded


def cmd_experiment(args) -> int:
    cfg, options = _configs(args)
    if args.grid:
        try:
            data = load_grid(args.grid)
        except (ValueError, yaml.YAMLError) as e:
            raise DomainError(f"Invalid grid file {args.grid}: {e}")
    else:
        data = {
            "problems": args.problems,
            "sigma_ratios": args.sigma_ratios,
            "methods": args.methods,
            "losses": [{"name": token, "delta": args.delta, "nu": args.nu} for token in args.losses],
        }
    data["problems"] = _expand_problems(data["problems"])
    grid = ExperimentGrid.from_dict(data)

    if args.save_grid:
        filename = save_grid(dict(data), args.save_grid)
        logger.info("Saved grid to %s", os.path.join(args.save_grid, filename))

    results = run_grid(grid, cfg, options, parallel=args.parallel)
    _write(args, EXPERIMENT_HEADER, [_row(r, EXPERIMENT_HEADER) for r in results])
    return EXIT_OK


def cmd_pareto(args) -> int:
    cfg, options = _configs(args)
    if args.grid_points < 2:
        raise DomainError("--grid-points must be at least 2")
    instance = load_source(_source(args.problem, args.seed))
    model = LossModel.from_token(args.loss, delta=args.delta, nu=args.nu)
    prob = SigmaProblem(instance.d, instance.y, model, 0.0)
    taus = np.linspace(0.0, frames_tau(prob, options.allow_regularization), args.grid_points)
    curve = sample_pareto_curve(prob, taus, cfg, warm_start=options.warm_start)
    _write(args, PARETO_HEADER, [[format_value(t), format_value(v)] for t, v in curve])
    return EXIT_OK


def cmd_recovery(args) -> int:
    cfg, options = _configs(args)
    seeds = range(args.first_seed, args.first_seed + args.seeds)
    results = recovery_study(seeds, method=args.method, cfg=cfg, options=options, parallel=args.parallel)
    _write(args, RECOVERY_HEADER, [_row(r, RECOVERY_HEADER) for r in results])
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "experiment": cmd_experiment,
    "pareto": cmd_pareto,
    "recovery": cmd_recovery,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_environment()
    try:
        settings = SolverSettings.from_env()
    except DomainError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    parser = build_parser(settings)
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose >= 2 else logging.INFO if args.verbose == 1 else settings.log_level
    logging.basicConfig(level=level, stream=sys.stderr, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        return COMMANDS[args.command](args)
    except (DomainError, UnsupportedModelError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailureError, RankDeficiencyError, BracketError, InvariantViolationError) as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
