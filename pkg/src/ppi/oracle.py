"""Brute-force reference optimum by enumerating zone combinations.

Each combination boxes every zoned variable to one allowed zone and
solves the resulting continuous problem with the same augmented
Lagrangian used by :mod:`ppi.solver`, so disagreements between the two
routes point at the reformulation rather than at the optimizer.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._parallel import ordered_map
from .problem import Assignment, CallbackProblem, NlpdfrProblem
from .reformulate import build_equivalent
from .solver import SmoothModel, SolverConfig, augmented_lagrangian, bound_midpoint, residuals

#: Largest number of zone combinations the oracle will enumerate.
COMBINATION_CAP = 100_000


class EnumerationCapError(ValueError):
    """The product of zone counts exceeds :data:`COMBINATION_CAP`."""


class NoFeasibleCombination(RuntimeError):
    """Every zone combination failed the feasibility test."""


@dataclass(frozen=True)
class CombinationResult:
    index: int
    combo: dict[str, int]
    point: Assignment
    objective: float
    feasible: bool
    converged: bool
    max_residual: float


@dataclass(frozen=True)
class OracleResult:
    point: Assignment
    objective: float
    combo: dict[str, int]
    best_index: int
    table: list[CombinationResult]


def combination_count(problem) -> int:
    return math.prod(len(v.zones) for v in problem.variables if v.zoned)


def enumerate_combinations(problem: NlpdfrProblem | CallbackProblem) -> list[dict[str, int]]:
    """All zone-index maps, lexicographic in variable name and then zone index."""
    count = combination_count(problem)
    if count > COMBINATION_CAP:
        raise EnumerationCapError(
            f"{count} zone combinations exceed the enumeration cap of {COMBINATION_CAP}"
        )
    zoned = sorted((v for v in problem.variables if v.zoned), key=lambda v: v.name)
    names = [v.name for v in zoned]
    ranges = [range(1, len(v.zones) + 1) for v in zoned]
    return [dict(zip(names, idx)) for idx in itertools.product(*ranges)]


def solve_combination(problem, combo: dict[str, int], cfg: SolverConfig = SolverConfig(),
                      index: int = 0) -> CombinationResult:
    """Solve the continuous problem with every zoned variable boxed to ``combo``."""
    boxed = problem.with_zones_boxed(combo)
    eq = build_equivalent(boxed)
    model = SmoothModel.from_equivalent(eq)
    x0 = np.array([bound_midpoint(v.lower, v.upper) for v in boxed.variables])
    local = augmented_lagrangian(model, x0, cfg)
    res = residuals(eq, local.x)
    feasible = res.worst <= cfg.constraint_tol
    return CombinationResult(
        index=index,
        combo=dict(combo),
        point=boxed.to_assignment(local.x),
        objective=boxed.objective_value(local.x),
        feasible=feasible,
        converged=feasible and local.converged,
        max_residual=res.worst,
    )


def solve_all(problem, cfg: SolverConfig = SolverConfig()) -> list[CombinationResult]:
    combos = enumerate_combinations(problem)
    return ordered_map(lambda k: solve_combination(problem, combos[k], cfg, k), range(len(combos)))


def best_of(table: list[CombinationResult]) -> Optional[CombinationResult]:
    """Lowest objective among feasible rows; ties go to the lowest index."""
    feasible = [r for r in table if r.feasible]
    if not feasible:
        return None
    return min(feasible, key=lambda r: (r.objective, r.index))


def oracle_best(problem, cfg: SolverConfig = SolverConfig()) -> OracleResult:
    table = solve_all(problem, cfg)
    best = best_of(table)
    if best is None:
        worst = min(r.max_residual for r in table)
        raise NoFeasibleCombination(
            f"none of the {len(table)} zone combinations is feasible "
            f"(smallest residual {worst:.3e})"
        )
    return OracleResult(best.point, best.objective, best.combo, best.index, table)
