"""Problem data model: quadratic objective, quadratic equalities, linear inequalities.

A problem minimizes ``c0 + c.z + z.Q.z`` subject to equalities
``a.z + z.B.z = b`` and inequalities ``a.z <= b`` where every variable
either carries plain interval bounds or a zone set (a union of disjoint
allowed intervals).

Problems with arbitrary smooth functions are supported through
:class:`CallbackProblem`, which exposes the same evaluation methods but
cannot be written to disk.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Annotated, Callable, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .core import ZoneSet, is_member, zone_violations

SYMMETRY_TOL = 1e-12

Assignment = dict[str, float]


class ProblemError(ValueError):
    """Invalid problem data; ``violations`` lists every broken rule."""

    def __init__(self, message: str, violations: Sequence[str] = ()):
        super().__init__(message)
        self.violations = list(violations)


@dataclass(frozen=True)
class VariableSpec:
    name: str
    bounds: Optional[tuple[float, float]] = None
    zones: Optional[tuple[tuple[float, float], ...]] = None

    @property
    def zoned(self) -> bool:
        return self.zones is not None

    @property
    def kind(self) -> str:
        return "continuous-with-zones" if self.zoned else "continuous-with-bounds"

    def zone_set(self) -> ZoneSet:
        if self.zones is None:
            raise ValueError(f"variable {self.name!r} has no zones")
        return ZoneSet(self.zones)

    @property
    def lower(self) -> float:
        if self.zones is not None:
            return self.zones[0][0]
        return -math.inf if self.bounds is None else self.bounds[0]

    @property
    def upper(self) -> float:
        if self.zones is not None:
            return self.zones[-1][1]
        return math.inf if self.bounds is None else self.bounds[1]


@dataclass(frozen=True)
class QuadraticObjective:
    c0: float
    c: tuple[float, ...]
    Q: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class EqConstraint:
    a: tuple[float, ...]
    b: float
    B: Optional[tuple[tuple[float, ...], ...]] = None


@dataclass(frozen=True)
class IneqConstraint:
    a: tuple[float, ...]
    b: float


class _VariableBlock:
    """Shared variable bookkeeping for file-backed and callback problems."""

    variables: tuple[VariableSpec, ...]

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def dim(self) -> int:
        return len(self.variables)

    def index(self, name: str) -> int:
        return self.names.index(name)

    @property
    def zoned_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.zoned]

    def lower_bounds(self) -> np.ndarray:
        return np.array([v.lower for v in self.variables], dtype=float)

    def upper_bounds(self) -> np.ndarray:
        return np.array([v.upper for v in self.variables], dtype=float)

    def to_vector(self, point: Mapping[str, float]) -> np.ndarray:
        missing = [n for n in self.names if n not in point]
        if missing:
            raise KeyError(f"assignment is missing variables: {missing}")
        extra = sorted(set(point) - set(self.names))
        if extra:
            raise KeyError(f"assignment has unknown variables: {extra}")
        z = np.array([float(point[n]) for n in self.names])
        if not np.all(np.isfinite(z)):
            raise ValueError("assignment values must be finite")
        return z

    def to_assignment(self, z: Sequence[float]) -> Assignment:
        return {n: float(v) for n, v in zip(self.names, z)}

    def with_zones_boxed(self, combo: Mapping[str, int]):
        """Copy in which each zoned variable is replaced by bounds of its chosen zone (1-based)."""
        new_vars = []
        for v in self.variables:
            if v.zoned:
                lo, hi = v.zones[combo[v.name] - 1]
                new_vars.append(VariableSpec(v.name, bounds=(lo, hi)))
            else:
                new_vars.append(v)
        return replace(self, variables=tuple(new_vars))

    def _variable_violations(self) -> list[str]:
        out = []
        seen = set()
        for v in self.variables:
            where = f"variables[{v.name!r}]"
            if v.name in seen:
                out.append(f"{where}: duplicate variable name")
            seen.add(v.name)
            if v.bounds is None and v.zones is None:
                continue  # free variable
            if v.bounds is not None and v.zones is not None:
                out.append(f"{where}: give either bounds or zones, not both")
            elif v.zones is not None:
                out.extend(f"{where}.zones: {msg}" for msg in zone_violations(v.zones))
            elif not v.bounds[0] <= v.bounds[1]:
                out.append(f"{where}.bounds: lower exceeds upper")
        return out


@dataclass(frozen=True)
class NlpdfrProblem(_VariableBlock):
    """Quadratic program whose zoned variables must stay inside their allowed zones."""

    variables: tuple[VariableSpec, ...]
    objective: QuadraticObjective
    eq_constraints: tuple[EqConstraint, ...] = ()
    ineq_constraints: tuple[IneqConstraint, ...] = ()

    # dense arrays, built once
    @cached_property
    def _c(self) -> np.ndarray:
        return np.array(self.objective.c, dtype=float)

    @cached_property
    def _Q(self) -> np.ndarray:
        return np.array(self.objective.Q, dtype=float).reshape(self.dim, self.dim)

    @cached_property
    def _eq_arrays(self):
        n = self.dim
        A = np.array([e.a for e in self.eq_constraints], dtype=float).reshape(-1, n)
        b = np.array([e.b for e in self.eq_constraints], dtype=float)
        Bs = [None if e.B is None else np.array(e.B, dtype=float) for e in self.eq_constraints]
        return A, b, Bs

    @cached_property
    def _ineq_arrays(self):
        n = self.dim
        A = np.array([e.a for e in self.ineq_constraints], dtype=float).reshape(-1, n)
        b = np.array([e.b for e in self.ineq_constraints], dtype=float)
        return A, b

    def objective_value(self, z: np.ndarray) -> float:
        return float(self.objective.c0 + self._c @ z + z @ self._Q @ z)

    def objective_grad(self, z: np.ndarray) -> np.ndarray:
        return self._c + (self._Q + self._Q.T) @ z

    def eq_values(self, z: np.ndarray) -> np.ndarray:
        A, b, Bs = self._eq_arrays
        out = A @ z - b
        for j, B in enumerate(Bs):
            if B is not None:
                out[j] += z @ B @ z
        return out

    def eq_jacobian(self, z: np.ndarray) -> np.ndarray:
        A, _, Bs = self._eq_arrays
        J = A.copy()
        for j, B in enumerate(Bs):
            if B is not None:
                J[j] += (B + B.T) @ z
        return J

    def ineq_values(self, z: np.ndarray) -> np.ndarray:
        """``a.z - b``; nonpositive entries are satisfied."""
        A, b = self._ineq_arrays
        return A @ z - b

    def ineq_jacobian(self, z: np.ndarray) -> np.ndarray:
        return self._ineq_arrays[0].copy()


@dataclass(frozen=True)
class CallbackProblem(_VariableBlock):
    """Problem with caller-supplied C1 functions and their gradients.

    ``eq`` returns the equality residuals ``g(z)`` and ``ineq`` the values
    ``h(z)`` with ``h(z) <= 0`` required; the Jacobians have one row per
    constraint. Omitted constraint callables mean no constraints of that kind.
    """

    variables: tuple[VariableSpec, ...]
    objective: Callable[[np.ndarray], float]
    objective_gradient: Callable[[np.ndarray], np.ndarray]
    eq: Optional[Callable[[np.ndarray], np.ndarray]] = None
    eq_jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    ineq: Optional[Callable[[np.ndarray], np.ndarray]] = None
    ineq_jac: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None)

    def objective_value(self, z):
        return float(self.objective(z))

    def objective_grad(self, z):
        return np.asarray(self.objective_gradient(z), dtype=float)

    def eq_values(self, z):
        return np.zeros(0) if self.eq is None else np.atleast_1d(np.asarray(self.eq(z), float))

    def eq_jacobian(self, z):
        if self.eq_jac is None:
            return np.zeros((0, self.dim))
        return np.asarray(self.eq_jac(z), dtype=float).reshape(-1, self.dim)

    def ineq_values(self, z):
        return np.zeros(0) if self.ineq is None else np.atleast_1d(np.asarray(self.ineq(z), float))

    def ineq_jacobian(self, z):
        if self.ineq_jac is None:
            return np.zeros((0, self.dim))
        return np.asarray(self.ineq_jac(z), dtype=float).reshape(-1, self.dim)


def _matrix_violations(where: str, M, n: int) -> list[str]:
    rows = list(M)
    if len(rows) != n or any(len(r) != n for r in rows):
        return [f"{where}: must be {n}x{n}"]
    arr = np.array(rows, dtype=float)
    if not np.all(np.isfinite(arr)):
        return [f"{where}: entries must be finite"]
    asym = float(np.max(np.abs(arr - arr.T))) if n else 0.0
    if asym > SYMMETRY_TOL:
        return [f"{where}: not symmetric (max |M_ij - M_ji| = {asym:.3g})"]
    return []


def validate(problem: NlpdfrProblem) -> list[str]:
    """List every violated structural rule; empty means the problem is well formed."""
    out = problem._variable_violations()
    n = problem.dim
    obj = problem.objective
    if len(obj.c) != n:
        out.append(f"objective.c: length {len(obj.c)} != {n} variables")
    out += _matrix_violations("objective.Q", obj.Q, n)
    for j, e in enumerate(problem.eq_constraints):
        if len(e.a) != n:
            out.append(f"eq_constraints[{j}].a: length {len(e.a)} != {n} variables")
        if e.B is not None:
            out += _matrix_violations(f"eq_constraints[{j}].B", e.B, n)
    for j, e in enumerate(problem.ineq_constraints):
        if len(e.a) != n:
            out.append(f"ineq_constraints[{j}].a: length {len(e.a)} != {n} variables")
    return out


@dataclass(frozen=True)
class Evaluation:
    objective: float
    eq_residuals: list[float]
    ineq_slacks: list[float]
    zone_feasible: bool


def evaluate(problem: NlpdfrProblem | CallbackProblem, point: Mapping[str, float]) -> Evaluation:
    """Objective, equality residuals, inequality slacks and zone feasibility at a point.

    Slacks are ``b - a.z`` (``-h(z)`` for callback problems); nonnegative
    means satisfied.
    """
    z = problem.to_vector(point)
    zone_ok = all(
        is_member(v.zone_set(), z[i], 0.0).inside
        for i, v in enumerate(problem.variables)
        if v.zoned
    )
    return Evaluation(
        objective=problem.objective_value(z),
        eq_residuals=[float(r) for r in problem.eq_values(z)],
        ineq_slacks=[float(-h) for h in problem.ineq_values(z)],
        zone_feasible=zone_ok,
    )


# ---------------------------------------------------------------- file format

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)


# JSON has no tuples and strict mode refuses to coerce lists into them
Pair = Annotated[list[float], Field(min_length=2, max_length=2)]
OptionalPair = Annotated[list[Optional[float]], Field(min_length=2, max_length=2)]


class _VariableModel(_Strict):
    name: str
    bounds: Optional[OptionalPair] = None
    zones: Optional[list[Pair]] = None


class _ObjectiveModel(_Strict):
    c0: float = 0.0
    c: list[float]
    Q: list[list[float]]


class _EqModel(_Strict):
    a: list[float]
    B: Optional[list[list[float]]] = None
    b: float


class _IneqModel(_Strict):
    a: list[float]
    b: float


class _ProblemModel(_Strict):
    variables: list[_VariableModel]
    objective: _ObjectiveModel
    eq_constraints: list[_EqModel] = []
    ineq_constraints: list[_IneqModel] = []


def _tuplify(M):
    return None if M is None else tuple(tuple(float(x) for x in row) for row in M)


def problem_from_dict(data: Mapping) -> NlpdfrProblem:
    """Build and validate a problem from its JSON document; raises :class:`ProblemError`."""
    try:
        m = _ProblemModel.model_validate(data)
    except ValidationError as exc:
        msgs = [
            f"{'.'.join(str(x) for x in err['loc']) or '<root>'}: {err['msg']}"
            for err in exc.errors()
        ]
        raise ProblemError("problem document does not match the schema", msgs) from None
    variables = []
    for v in m.variables:
        bounds = None
        if v.bounds is not None:
            lo, hi = v.bounds
            bounds = (-math.inf if lo is None else float(lo), math.inf if hi is None else float(hi))
        zones = None if v.zones is None else tuple((float(lo), float(hi)) for lo, hi in v.zones)
        variables.append(VariableSpec(v.name, bounds=bounds, zones=zones))
    problem = NlpdfrProblem(
        variables=tuple(variables),
        objective=QuadraticObjective(
            float(m.objective.c0), tuple(float(x) for x in m.objective.c), _tuplify(m.objective.Q)
        ),
        eq_constraints=tuple(
            EqConstraint(tuple(float(x) for x in e.a), float(e.b), _tuplify(e.B))
            for e in m.eq_constraints
        ),
        ineq_constraints=tuple(
            IneqConstraint(tuple(float(x) for x in e.a), float(e.b)) for e in m.ineq_constraints
        ),
    )
    problems = validate(problem)
    if problems:
        raise ProblemError("problem failed validation", problems)
    return problem


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


def problem_to_dict(problem: NlpdfrProblem) -> dict:
    variables = []
    for v in problem.variables:
        entry: dict = {"name": v.name}
        if v.zones is not None:
            entry["zones"] = [list(z) for z in v.zones]
        elif v.bounds is not None:
            entry["bounds"] = [_finite_or_none(v.bounds[0]), _finite_or_none(v.bounds[1])]
        variables.append(entry)
    eqs = []
    for e in problem.eq_constraints:
        entry = {"a": list(e.a), "b": e.b}
        if e.B is not None:
            entry["B"] = [list(r) for r in e.B]
        eqs.append(entry)
    return {
        "variables": variables,
        "objective": {
            "c0": problem.objective.c0,
            "c": list(problem.objective.c),
            "Q": [list(r) for r in problem.objective.Q],
        },
        "eq_constraints": eqs,
        "ineq_constraints": [{"a": list(e.a), "b": e.b} for e in problem.ineq_constraints],
    }


def loads(text: str, source: str = "<string>") -> NlpdfrProblem:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemError(
            f"{source}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            [f"line {exc.lineno}, column {exc.colno}: {exc.msg}"],
        ) from None
    try:
        return problem_from_dict(data)
    except ProblemError as exc:
        raise ProblemError(f"{source}: {exc}", exc.violations) from None


def dumps(problem: NlpdfrProblem) -> str:
    # float repr is the shortest decimal that round-trips exactly
    return json.dumps(problem_to_dict(problem), indent=2) + "\n"


def load(path) -> NlpdfrProblem:
    path = Path(path)
    return loads(path.read_text(encoding="utf-8"), source=str(path))


def save(problem: NlpdfrProblem, path) -> None:
    problems = validate(problem)
    if problems:
        raise ProblemError("refusing to save an invalid problem", problems)
    Path(path).write_text(dumps(problem), encoding="utf-8")
