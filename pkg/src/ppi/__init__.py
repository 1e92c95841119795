"""PPI reformulation of nonlinear programs with prohibited operating zones.

A variable restricted to a union of disjoint intervals is replaced by a
smooth equality ``m(p, alpha) = 0`` over interpolation coordinates
``alpha`` in the unit box, turning the disjunctive problem into an
ordinary smooth NLP that gradient-based solvers can handle.
"""
from .core import (
    CorruptInput,
    InvalidZoneSet,
    NotAMember,
    PpiEvaluation,
    ZoneSet,
    heaviside,
    is_member,
    min_abs_ppi_over_alpha_grid,
    ppi_eval,
    recover_alpha,
    segment_eval,
    switch_bracket,
)
from .dispatch import (
    SystemSpec,
    UnitSpec,
    build_edpoz,
    bundled_instances,
    random_system,
)
from .oracle import (
    EnumerationCapError,
    NoFeasibleCombination,
    enumerate_combinations,
    oracle_best,
    solve_combination,
)
from .problem import (
    CallbackProblem,
    EqConstraint,
    IneqConstraint,
    NlpdfrProblem,
    ProblemError,
    QuadraticObjective,
    VariableSpec,
    evaluate,
    validate,
)
from .reformulate import EquivalentNlp, build_equivalent, eval_extended, extract_solution, lift
from .solver import SolveReport, SolverConfig, seed_starts, solve

__version__ = "0.1.0"
