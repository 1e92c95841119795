"""Command-line front end.

``ppi solve | oracle | compare | gradcheck --input SOURCE``, where SOURCE is
a problem JSON file, an EDPOZ system JSON file (recognized by its
``units`` key) or the name of a bundled system. Every command writes one
JSON document; runs with the same inputs produce byte-identical output.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .dispatch import build_edpoz, bundled_instances, system_from_dict
from .gradcheck import GRADCHECK_TOL, gradcheck
from .oracle import EnumerationCapError, NoFeasibleCombination, oracle_best, solve_all, best_of
from .problem import ProblemError, problem_from_dict
from .reformulate import build_equivalent
from .solver import SolveReport, SolverConfig, solve

SCHEMA_VERSION = 1
#: Relative objective gap accepted by ``compare``.
COMPARE_RTOL = 1e-4

EXIT_OK, EXIT_INPUT, EXIT_FAILED, EXIT_CAP = 0, 1, 2, 3


class InputError(Exception):
    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = list(violations)


def load_input(source: str):
    """Problem for a file path or bundled system name."""
    path = Path(source)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{source}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                             f"{exc.msg}") from None
        try:
            if isinstance(data, dict) and "units" in data:
                return build_edpoz(system_from_dict(data))
            return problem_from_dict(data)
        except ProblemError as exc:
            raise InputError(f"{source}: {exc}", exc.violations) from None
    bundled = bundled_instances()
    if source in bundled:
        return build_edpoz(bundled[source])
    raise InputError(
        f"{source}: no such file and not a bundled system (choose from {', '.join(bundled)})"
    )


def relative_gap(value: float, reference: float) -> float:
    return abs(value - reference) / max(1.0, abs(reference))


# ----------------------------------------------------------------- reports

def _envelope(command: str, source: str, cfg: Optional[SolverConfig]) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "command": command, "input": source}
    if cfg is not None:
        out["config"] = cfg.to_dict()
    return out


def solve_report_dict(report: SolveReport) -> dict:
    return {
        "success": report.success,
        "converged": report.converged,
        "objective": report.objective,
        "assignment": report.assignment,
        "residuals": {
            "max_eq": report.max_eq_residual,
            "max_ineq": report.max_ineq_violation,
            "max_ppi": report.max_ppi_residual,
            "max_bound": report.max_bound_violation,
        },
        "zones": {
            name: None if z is None else {"zone_index": z.zone_index, "alpha": z.alpha}
            for name, z in report.zones.items()
        },
        "best_start": report.best_start,
        "starts": [
            {
                "index": s.index,
                "seed_zones": s.seed_zones,
                "status": s.status,
                "converged": s.converged,
                "feasible": s.feasible,
                "iterations": s.iterations,
                "outer_iterations": s.outer_iterations,
                "final_penalty": s.final_penalty,
                "objective": s.objective,
                "max_residual": s.max_residual,
                "stationarity": s.stationarity,
            }
            for s in report.starts
        ],
    }


def _combo_rows(table) -> list[dict]:
    return [
        {
            "index": r.index,
            "combo": r.combo,
            "feasible": r.feasible,
            "converged": r.converged,
            "objective": r.objective,
            "max_residual": r.max_residual,
            "point": r.point,
        }
        for r in table
    ]


def _emit(doc: dict, output: Optional[str]) -> None:
    text = json.dumps(doc, indent=2, allow_nan=False, default=_json_default) + "\n"
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json_default(obj):
    # numpy scalars that slipped through
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


# ---------------------------------------------------------------- commands

def _config(args) -> SolverConfig:
    return SolverConfig(
        multistarts=args.multistarts,
        outer_iters=args.outer_iters,
        inner_iters=args.inner_iters,
        penalty_init=args.penalty_init,
        penalty_growth=args.penalty_growth,
        constraint_tol=args.tol,
        grad_tol=args.grad_tol,
        step_init=args.step_init,
        seed=args.seed,
    )


def cmd_solve(args) -> int:
    cfg = _config(args)
    problem = load_input(args.input)
    report = solve(build_equivalent(problem), cfg)
    doc = _envelope("solve", args.input, cfg)
    doc.update(solve_report_dict(report))
    for s in doc["starts"]:
        s["stationarity"] = _finite_or_none(s["stationarity"])
    _emit(doc, args.output)
    return EXIT_OK if report.success else EXIT_FAILED


def cmd_oracle(args) -> int:
    cfg = _config(args)
    problem = load_input(args.input)
    table = solve_all(problem, cfg)
    best = best_of(table)
    doc = _envelope("oracle", args.input, cfg)
    doc.update({
        "feasible": best is not None,
        "objective": None if best is None else best.objective,
        "combo": None if best is None else best.combo,
        "point": None if best is None else best.point,
        "best_index": None if best is None else best.index,
        "combinations": _combo_rows(table),
    })
    _emit(doc, args.output)
    return EXIT_OK if best is not None else EXIT_FAILED


def cmd_compare(args) -> int:
    cfg = _config(args)
    problem = load_input(args.input)
    eq = build_equivalent(problem)
    report = solve(eq, cfg)
    doc = _envelope("compare", args.input, cfg)
    try:
        oracle = oracle_best(problem, cfg)
    except NoFeasibleCombination as exc:
        doc.update({"agree": False, "error": str(exc)})
        _emit(doc, args.output)
        return EXIT_FAILED
    gap = relative_gap(report.objective, oracle.objective)
    ppi_zones = report.zone_indices()
    agree = report.success and gap <= COMPARE_RTOL and ppi_zones == oracle.combo
    doc.update({
        "agree": agree,
        "relative_gap": gap,
        "tolerance": COMPARE_RTOL,
        "ppi": {"success": report.success, "objective": report.objective,
                "zones": ppi_zones, "assignment": report.assignment},
        "oracle": {"objective": oracle.objective, "zones": oracle.combo,
                   "assignment": oracle.point},
    })
    _emit(doc, args.output)
    return EXIT_OK if agree else EXIT_FAILED


def cmd_gradcheck(args) -> int:
    problem = load_input(args.input)
    report = gradcheck(build_equivalent(problem), samples=args.samples, seed=args.seed)
    doc = _envelope("gradcheck", args.input, None)
    doc.update({
        "samples": report.samples,
        "seed": args.seed,
        "neighborhoods": report.neighborhoods,
        "worst_relative_error": report.worst,
        "worst_by_row": {
            "objective": report.worst_objective,
            "eq": report.worst_eq,
            "ineq": report.worst_ineq,
            "ppi": report.worst_ppi,
        },
        "tolerance": GRADCHECK_TOL,
        "passed": report.passed,
    })
    _emit(doc, args.output)
    return EXIT_OK if report.passed else EXIT_FAILED


# ------------------------------------------------------------------ parser

def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    d = SolverConfig()
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--multistarts", type=int, default=d.multistarts)
    p.add_argument("--tol", type=float, default=d.constraint_tol,
                   help="constraint tolerance (default %(default)s)")
    p.add_argument("--grad-tol", type=float, default=d.grad_tol)
    p.add_argument("--outer-iters", type=int, default=d.outer_iters)
    p.add_argument("--inner-iters", type=int, default=d.inner_iters)
    p.add_argument("--penalty-init", type=float, default=d.penalty_init)
    p.add_argument("--penalty-growth", type=float, default=d.penalty_growth)
    p.add_argument("--step-init", type=float, default=d.step_init)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppi",
        description="Solve problems with prohibited operating zones through the PPI reformulation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (
        ("solve", cmd_solve, "multistart solve of the smooth equivalent problem"),
        ("oracle", cmd_oracle, "enumerate zone combinations and solve each"),
        ("compare", cmd_compare, "run both routes and compare objective and zones"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--input", required=True, help="problem/system JSON file or bundled name")
        p.add_argument("--output", help="write the JSON report here instead of stdout")
        _add_solver_flags(p)
        p.set_defaults(func=fn)
    p = sub.add_parser("gradcheck", help="finite-difference check of all analytic gradients")
    p.add_argument("--input", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_INPUT
    except EnumerationCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ValueError as exc:  # invalid flag values such as a nonpositive tolerance
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
