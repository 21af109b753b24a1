"""
Command-line interface.

    thermoctl check PROBLEM      existence verdict and structural conditions
    thermoctl solve PROBLEM      minimal time, control CSV, bang-bang verdict
    thermoctl scan PROBLEM       ball augmentations of omega satisfying (D2)
    thermoctl compare PROBLEM    full domain vs the problem's region

Exit codes: 0 success, 2 invalid problem file, 3 no optimal control,
4 no certified scan candidate, 5 numerical solver failure (the report
carries the error and, for the sphere descent, its restart count).
"""
import argparse
import dataclasses
import logging
import sys
from typing import List, Optional, Tuple

import numpy as np

import thermoctl.utils.mlflow as utils_mlflow
from thermoctl import reports
from thermoctl.bangbang import verify_bangbang
from thermoctl.conditions import (
    check_D1,
    check_D2,
    check_D2_tilde,
    classify_existence,
    general_position,
    kalman_rank,
)
from thermoctl.exceptions import (
    EmptyScanError,
    InfeasibleHorizonError,
    NonexistenceError,
    RootFindingError,
    SpecError,
    SphereConvergenceError,
)
from thermoctl.genericity import check_candidate, scan
from thermoctl.problem import ProblemSpec, load_problem
from thermoctl.reduced import ReducedSystem
from thermoctl.simulator import simulate_truncated, target_distance
from thermoctl.solver import (
    SolveReport,
    SolverSettings,
    brute_force_min_time,
    solve,
)
from thermoctl.spectral import ControlRegion


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SPEC = 2
EXIT_NO_CONTROL = 3
EXIT_NO_CANDIDATE = 4
EXIT_SOLVER_FAILURE = 5

LOG_FORMAT = "%(asctime)s %(name)-12s %(levelname)-8s %(message)s"
ORACLE_GRID_POINTS = 40


def _settings(spec: ProblemSpec, args) -> SolverSettings:
    return spec.settings(
        tol=args.tol,
        seed=args.seed,
        delta=args.delta,
        horizon_cap=args.horizon_cap,
        progress=not args.quiet,
    )


def _build(spec: ProblemSpec, region: Optional[ControlRegion] = None):
    """Region and reduced system, with model errors reported as spec errors"""
    try:
        region = region or spec.region()
        return region, spec.system(region)
    except SpecError:
        raise
    except ValueError as e:
        raise SpecError(str(e), path="$") from e


def _conditions_report(
    system: ReducedSystem, region: ControlRegion, delta: float
) -> dict:
    d2 = check_D2(system.coupling, delta=delta)
    return {
        "existence": classify_existence(system, region, delta).to_dict(),
        "D1": check_D1(system.eigenvalues, system.m),
        "D2": d2.to_dict(),
        "D2_tilde": check_D2_tilde(system.coupling, delta=delta),
        "coupling": system.coupling.tolist(),
        "general_position": general_position(
            system.drift, system.coupling, delta
        ).to_dict(),
        "kalman_rank": kalman_rank(system.drift, system.coupling),
        "delta": delta,
    }


def cmd_check(spec: ProblemSpec, args) -> Tuple[dict, int]:
    region, system = _build(spec)
    delta = _settings(spec, args).delta
    report = {"command": "check", "m": spec.m, "k": spec.k}
    report.update(_conditions_report(system, region, delta))
    report["tag"] = report["existence"]["tag"]
    return report, EXIT_OK


def _solve_summary(
    system: ReducedSystem, region: ControlRegion, settings: SolverSettings
) -> Tuple[dict, Optional[SolveReport]]:
    """Solve and verify; failures are reported, not raised"""
    verdict = classify_existence(system, region, settings.delta)
    summary = {"tag": verdict.tag.value, "solved": False}
    try:
        result = solve(system, region, settings)
    except NonexistenceError as e:
        summary["witness"] = e.witness
        return summary, None
    except InfeasibleHorizonError as e:
        summary["witness"] = str(e)
        return summary, None
    except SphereConvergenceError as e:
        summary.update({"error": str(e), "restarts": e.restarts})
        return summary, None
    except RootFindingError as e:
        summary["error"] = str(e)
        return summary, None
    summary.update(
        {
            "solved": True,
            "optimal_time": result.optimal_time,
            "terminal_error": result.terminal_error,
            "method": result.method.value,
            "labels": result.labels,
        }
    )
    if result.optimal_time > 0:
        bang = verify_bangbang(result.control, system.bounds)
        summary["is_bang_bang"] = bang.is_bang_bang
        summary["switching_counts"] = bang.switching_counts
        summary["bang_bang"] = bang.to_dict()
    else:
        summary["is_bang_bang"] = None
    return summary, result


def _oracle_report(
    spec: ProblemSpec, system: ReducedSystem, optimal_time: float, args
) -> dict:
    if spec.oracle.horizons is not None:
        lo, hi, count = spec.oracle.horizons
    else:
        lo, hi, count = 0.5 * optimal_time, 2.0 * optimal_time, (
            ORACLE_GRID_POINTS
        )
    try:
        result = brute_force_min_time(
            system,
            spec.oracle.segments,
            np.linspace(lo, hi, count),
            progress=not args.quiet,
        )
    except ValueError as e:
        return {"error": str(e)}
    return {
        "time": result.time,
        "segments": result.segments,
        "grid_step": result.grid_step,
        "gap": None if result.time is None else result.time - optimal_time,
    }


def cmd_solve(spec: ProblemSpec, args) -> Tuple[dict, int]:
    region, system = _build(spec)
    settings = _settings(spec, args)
    summary, result = _solve_summary(system, region, settings)
    report = {"command": "solve", "m": spec.m, "k": spec.k}
    report.update(summary)
    if result is None and "error" in summary:
        logger.error(f"Solver failure: {summary['error']}")
        return report, EXIT_SOLVER_FAILURE
    if result is None:
        logger.warning(f"No optimal control: {summary.get('witness')}")
        return report, EXIT_NO_CONTROL
    report["dual_direction"] = result.to_dict()["dual_direction"]
    report["feasibility_margin"] = result.feasibility_margin
    report["bracket"] = result.to_dict()["bracket"]
    reports.write_control_csv(
        result.control, reports.output_path(args.out_dir, "control.csv")
    )
    trajectory = simulate_truncated(
        spec.basis(), region, result.control, spec.y0
    )
    report["target_distance"] = target_distance(
        trajectory.final_state, spec.m
    )
    reports.write_frame(
        trajectory.to_frame(),
        reports.output_path(args.out_dir, "trajectory.csv"),
    )
    if args.oracle:
        report["oracle"] = _oracle_report(
            spec, system, result.optimal_time, args
        )
    return report, EXIT_OK


def cmd_scan(spec: ProblemSpec, args) -> Tuple[dict, int]:
    region, _ = _build(spec)
    grid = spec.scan_grid(delta=args.delta)
    basis = spec.basis()
    report = {"command": "scan", "grid": grid.to_dict()}
    try:
        result = scan(basis, region, grid, progress=not args.quiet)
    except EmptyScanError as e:
        report["error"] = str(e)
        return report, EXIT_NO_CANDIDATE
    report.update(result.to_dict())
    reports.write_frame(
        result.table,
        reports.output_path(args.out_dir, "scan.csv"),
        columns=["x", "rho", "min_magnitude"],
    )
    if result.best is None:
        return report, EXIT_NO_CANDIDATE
    augmented, coupling = check_candidate(
        basis, region, result.best, spec.m, grid.columns
    )
    report["augmented_region"] = augmented.to_json()
    report["augmented_D2"] = check_D2(coupling, delta=grid.delta).to_dict()
    return report, EXIT_OK


def cmd_compare(spec: ProblemSpec, args) -> Tuple[dict, int]:
    if spec.is_full_domain:
        raise SpecError(
            "$.omega: compare needs a proper control region", path="$.omega"
        )
    settings = _settings(spec, args)
    report = {"command": "compare", "m": spec.m, "k": spec.k}
    for name, region in (
        ("full", spec.full_region()),
        ("proper", spec.region()),
    ):
        _, system = _build(spec, region)
        summary, _ = _solve_summary(system, region, settings)
        report[name] = summary
    report["verdicts"] = {
        name: {
            "tag": report[name]["tag"],
            "solved": report[name]["solved"],
            "is_bang_bang": report[name].get("is_bang_bang"),
        }
        for name in ("full", "proper")
    }
    return report, EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "solve": cmd_solve,
    "scan": cmd_scan,
    "compare": cmd_compare,
}


def _metrics(report: dict) -> dict:
    keys = (
        "optimal_time",
        "terminal_error",
        "target_distance",
        "zero_set_fraction",
    )
    return {k: report.get(k) for k in keys if isinstance(report.get(k), float)}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("problem", help="Problem file (JSON)")
    common.add_argument("--tol", type=float, help="Bisection tolerance")
    common.add_argument("--seed", type=int, help="Seed of the sphere starts")
    common.add_argument(
        "--delta", type=float, help="Threshold of (D2), (D2~) and the scan"
    )
    common.add_argument(
        "--horizon-cap",
        type=float,
        help="Horizon doubling stops beyond this multiple of T_hi",
    )
    common.add_argument(
        "--out-dir", default=".", help="Directory of the output files"
    )
    common.add_argument(
        "-v", "--verbose", action="store_true", help="Debug logging"
    )
    common.add_argument(
        "-q", "--quiet", action="store_true", help="No progress bars"
    )
    common.add_argument("--mlflow-uri", help="Track the run in MLflow")
    common.add_argument(
        "--mlflow-expe", default="thermoctl", help="MLflow experiment name"
    )
    parser = argparse.ArgumentParser(
        prog="thermoctl",
        description="Time-optimal control of spectrally reduced heat"
        " equations",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser(
        "check", parents=[common], help="Existence and structural conditions"
    )
    solve_parser = subparsers.add_parser(
        "solve", parents=[common], help="Minimal time and optimal control"
    )
    solve_parser.add_argument(
        "--oracle",
        action="store_true",
        help="Also run the exhaustive vertex-control oracle",
    )
    subparsers.add_parser(
        "scan", parents=[common], help="Genericity scan of ball augmentations"
    )
    subparsers.add_parser(
        "compare", parents=[common], help="Full domain vs proper region"
    )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format=LOG_FORMAT,
    )
    try:
        spec = load_problem(args.problem)
        report, code = COMMANDS[args.command](spec, args)
    except SpecError as e:
        sys.stderr.write(f"Invalid problem at {e.path}: {e}\n")
        return EXIT_SPEC
    report["exit_code"] = code
    reports.write_json(
        report, reports.output_path(args.out_dir, f"{args.command}.json")
    )
    sys.stdout.write(reports.dumps_report(report) + "\n")
    if args.mlflow_uri:
        params = {
            "problem": spec.to_dict(),
            "settings": dataclasses.asdict(_settings(spec, args)),
        }
        utils_mlflow.log_command_run(
            tracking_uri=args.mlflow_uri,
            expe_name=args.mlflow_expe,
            command=args.command,
            params=params,
            metrics=_metrics(report),
            report=report,
        )
    return code
