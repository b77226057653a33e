"""Command-line front end: solve one case or compare linear-solver paths.

Two subcommands. `solve` loads a case, builds the requested model, runs
the interior-point solver, and emits a machine-parseable convergence
log, a timing table, and an optional solution file. `compare` runs the
same model through every applicable linear-solver path and reports
objective deltas, iteration counts, and per-phase times; on SCOPF
models it additionally checks that the Schur complement checksums for
1 and 4 workers are bitwise identical.

Exit codes: 0 optimal, 1 solver non-success (or a failed comparison),
2 input error (bad flags, unreadable or invalid case, incompatible
option combinations). Timing output goes to stdout only, so re-running
an identical configuration reproduces the log file byte for byte.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from .grid import (CaseError, GridCase, build_mpopf, build_opf, build_scopf,
                   load_case, storage_matrix)
from .ipm import ConvergenceReport, IpmOptions, solve

LOG_COLUMNS = ("iter", "objective", "inf_pr", "inf_du", "mu", "alpha",
               "delta_w")
PHASES = ("init", "kkt-assembly", "sc-assembly", "sc-solve", "local-solve")

# flag name -> IpmOptions field
_OPTION_FLAGS = {
    "tol": "eps_tol",
    "mu0": "mu_0",
    "mu_strategy": "mu_strategy",
    "inertia_mode": "inertia_mode",
    "linear_solver": "linear_solver",
    "sc_mode": "sc_mode",
    "workers": "workers",
    "mem_save": "mem_save",
    "max_iter": "max_iter",
}


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--case", required=True, help="path to a case file")
    p.add_argument("--model", choices=("opf", "scopf", "mpopf"),
                   default="opf")
    p.add_argument("--periods", type=int, default=None,
                   help="horizon length for mpopf (default: the case's "
                        "PERIODS entry)")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=None,
                   help="termination tolerance on the optimality error")
    p.add_argument("--mu0", type=float, default=None,
                   help="initial barrier parameter")
    p.add_argument("--mu-strategy",
                   choices=("monotone", "mehrotra", "quality"), default=None)
    p.add_argument("--inertia-mode", choices=("inertia", "curvature"),
                   default=None)
    p.add_argument("--sc-mode", choices=("backsolve", "augmented"),
                   default=None)
    p.add_argument("--workers", type=int, default=None,
                   help="worker count for the Schur paths")
    p.add_argument("--mem-save", action="store_true", default=None,
                   help="refactorize diagonal blocks during the back "
                        "substitution instead of holding every factor")
    p.add_argument("--max-iter", type=int, default=None)


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridipm",
        description="structure-exploiting interior-point OPF solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one case")
    _add_model_flags(p_solve)
    _add_solver_flags(p_solve)
    p_solve.add_argument("--linear-solver",
                         choices=("direct", "schur", "schur-structured"),
                         default=None)
    p_solve.add_argument("--log", default=None,
                         help="write the convergence log to this file")
    p_solve.add_argument("--solution", default=None,
                         help="write bus/generator/storage results to "
                              "this file")

    p_cmp = sub.add_parser(
        "compare", help="run every applicable linear-solver path")
    _add_model_flags(p_cmp)
    _add_solver_flags(p_cmp)
    return parser


def options_from_args(args: argparse.Namespace) -> IpmOptions:
    kwargs = {}
    for flag, field in _OPTION_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            kwargs[field] = value
    return IpmOptions(**kwargs)


def build_problem(case: GridCase, model: str, periods: Optional[int]):
    if model != "mpopf" and periods is not None:
        raise ValueError("--periods only applies to the mpopf model")
    if model == "opf":
        return build_opf(case)
    if model == "scopf":
        return build_scopf(case).problem
    return build_mpopf(case, periods).problem


def format_log(report: ConvergenceReport) -> str:
    lines = [" ".join(LOG_COLUMNS)]
    for row in report.log:
        lines.append("{iter:d} {objective:.10e} {inf_pr:.6e} {inf_du:.6e} "
                     "{mu:.6e} {alpha:.6e} {delta_w:.6e}".format(**row))
    return "\n".join(lines) + "\n"


def format_timings(timings: dict) -> str:
    lines = ["phase         seconds"]
    for phase in PHASES:
        lines.append(f"{phase:<13} {timings.get(phase, 0.0):8.3f}")
    return "\n".join(lines) + "\n"


def write_solution(path, case: GridCase, model: str, problem,
                   report: ConvergenceReport) -> None:
    ev = problem.evaluator
    x = report.iterate.x
    base = case.base_mva
    n_out = len(ev.blocks) if model == "mpopf" else 1
    states = [ev.blocks[t].unpack(x[ev.cols[t]]) for t in range(n_out)]

    lines = [f"# solution for {problem.name}",
             f"OBJECTIVE {report.objective:.10g}",
             "BUS", "# period  bus  v_pu  theta_rad"]
    for t, (theta, v, _, _) in enumerate(states):
        for b, bus in enumerate(case.buses):
            lines.append(f"{t + 1}  {bus.id}  {v[b]:.10g}  {theta[b]:.10g}")
    lines.append("END")

    lines += ["GEN", "# period  gen  p_mw  q_mvar"]
    for t, (_, _, p, q) in enumerate(states):
        for g in range(case.n_gen):
            lines.append(f"{t + 1}  {g + 1}  {base * p[g]:.10g}  "
                         f"{base * q[g]:.10g}")
    lines.append("END")

    if model == "mpopf" and case.n_storage:
        lines += ["STORAGE", "# unit  period  e_mwh"]
        b_s = base * storage_matrix(case)
        level = np.array([s.e_0 for s in case.storage])
        for t, (_, _, p, _) in enumerate(states):
            level = level + b_s @ p[case.n_gen:]
            for i in range(case.n_storage):
                lines.append(f"{i + 1}  {t + 1}  {level[i]:.10g}")
        lines.append("END")
    Path(path).write_text("\n".join(lines) + "\n")


def compare_paths(case: GridCase, model: str, periods: Optional[int] = None,
                  options: Optional[IpmOptions] = None) -> dict:
    """Solve one model through every applicable linear-solver path.

    Returns a dict with one entry per path (status, objective,
    iterations, timings), the relative objective deltas against the
    direct path, and for SCOPF models whether the Schur complement
    checksums of 1- and 4-worker runs are bitwise identical.
    """
    base_opts = options if options is not None else IpmOptions()
    paths = ["direct", "schur"]
    if model == "mpopf":
        paths.append("schur-structured")

    problem = build_problem(case, model, periods)
    runs = []
    for path in paths:
        report = solve(problem, replace(base_opts, linear_solver=path))
        runs.append({"path": path, "status": report.status,
                     "objective": report.objective,
                     "iterations": report.iterations,
                     "timings": report.timings})

    reference = runs[0]["objective"]
    deltas = {r["path"]: abs(r["objective"] - reference)
              / max(1.0, abs(reference)) for r in runs}

    checksums_match = None
    if model == "scopf":
        sums = []
        for workers in (1, 4):
            opts = replace(base_opts, linear_solver="schur", workers=workers)
            sums.append(solve(problem, opts).sc_checksums)
        checksums_match = bool(sums[0]) and sums[0] == sums[1]

    ok = all(r["status"] == "optimal" for r in runs)
    if checksums_match is not None:
        ok = ok and checksums_match
    return {"paths": runs, "deltas": deltas,
            "checksums_match": checksums_match, "ok": ok}


def _cmd_solve(args: argparse.Namespace) -> int:
    case = load_case(args.case)
    problem = build_problem(case, args.model, args.periods)
    report = solve(problem, options_from_args(args))

    log_text = format_log(report)
    if args.log:
        Path(args.log).write_text(log_text)
    else:
        sys.stdout.write(log_text)
    sys.stdout.write(format_timings(report.timings))
    sys.stdout.write(f"status     {report.status}\n"
                     f"iterations {report.iterations}\n"
                     f"objective  {report.objective:.10g}\n")
    if args.solution:
        if report.iterate is None:
            print("error: no iterate to write", file=sys.stderr)
            return 1
        write_solution(args.solution, case, args.model, problem, report)
    return 0 if report.status == "optimal" else 1


def _cmd_compare(args: argparse.Namespace) -> int:
    case = load_case(args.case)
    result = compare_paths(case, args.model, args.periods,
                           options_from_args(args))
    sys.stdout.write(f"{'path':<18} {'status':<22} {'iters':>5} "
                     f"{'objective':>18} {'delta':>10}\n")
    for run in result["paths"]:
        sys.stdout.write(
            f"{run['path']:<18} {run['status']:<22} {run['iterations']:>5} "
            f"{run['objective']:>18.10g} "
            f"{result['deltas'][run['path']]:>10.2e}\n")
    for run in result["paths"]:
        sys.stdout.write(f"\n[{run['path']}]\n")
        sys.stdout.write(format_timings(run["timings"]))
    if result["checksums_match"] is not None:
        verdict = ("identical" if result["checksums_match"]
                   else "DIFFERENT")
        sys.stdout.write(f"\nschur checksums, workers 1 vs 4: {verdict}\n")
    return 0 if result["ok"] else 1


def main(argv=None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:        # argparse already printed the message
        return int(exc.code or 0)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        return _cmd_compare(args)
    except (CaseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
