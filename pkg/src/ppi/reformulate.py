"""Smooth equivalent of a zoned problem.

Every zoned variable ``p_k`` gains a block of interpolation coordinates
``alpha^k`` in the unit box and one equality ``m(p_k, alpha^k) = 0``; the
disjunctive zone constraint itself disappears. The extended vector is laid
out as ``[z_1, ..., z_n, alpha^{k_1}, alpha^{k_2}, ...]`` in declaration
order of the zoned variables.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from .core import ZoneSet, is_member, ppi_unchecked, recover_alpha
from .problem import Assignment, CallbackProblem, NlpdfrProblem, ProblemError, validate

#: Distance (variable units) within which a solution value is matched to a zone.
ZONE_MATCH_TOL = 1e-6


class ZoneMatchError(ValueError):
    """A zoned coordinate of a candidate solution lies in a prohibited zone."""


class PpiRow(NamedTuple):
    name: str
    p_index: int
    alpha: slice
    zone: ZoneSet


@dataclass(frozen=True)
class EquivalentNlp:
    base: NlpdfrProblem | CallbackProblem
    ppi_constraints: tuple[PpiRow, ...]
    extended_dim: int

    @property
    def alpha_layout(self) -> dict[str, slice]:
        return {row.name: row.alpha for row in self.ppi_constraints}

    @property
    def n_alpha(self) -> int:
        return self.extended_dim - self.base.dim

    def lower_bounds(self) -> np.ndarray:
        """Box of the extended vector.

        Zoned coordinates get the hull of their zones, which every point with
        ``m = 0`` satisfies anyway; alpha coordinates get ``[0, 1]``.
        """
        return np.concatenate([self.base.lower_bounds(), np.zeros(self.n_alpha)])

    def upper_bounds(self) -> np.ndarray:
        return np.concatenate([self.base.upper_bounds(), np.ones(self.n_alpha)])

    def split(self, w: np.ndarray) -> np.ndarray:
        return np.asarray(w, dtype=float)[: self.base.dim]


@dataclass(frozen=True)
class ExtendedEvaluation:
    objective: float
    objective_grad: np.ndarray
    eq_values: np.ndarray
    eq_jac: np.ndarray
    ineq_values: np.ndarray
    ineq_jac: np.ndarray
    ppi_values: np.ndarray
    ppi_jac: np.ndarray


@dataclass(frozen=True)
class ZoneAssignment:
    zone_index: int
    alpha: float


@dataclass(frozen=True)
class Extraction:
    assignment: Assignment
    zones: dict[str, ZoneAssignment]


def build_equivalent(problem: NlpdfrProblem | CallbackProblem) -> EquivalentNlp:
    if isinstance(problem, NlpdfrProblem):
        problems = validate(problem)
    else:
        problems = problem._variable_violations()
    if problems:
        raise ProblemError("cannot reformulate an invalid problem", problems)
    rows = []
    offset = problem.dim
    for i, v in enumerate(problem.variables):
        if not v.zoned:
            continue
        zone = v.zone_set()
        rows.append(PpiRow(v.name, i, slice(offset, offset + zone.size), zone))
        offset += zone.size
    return EquivalentNlp(problem, tuple(rows), offset)


def _check_point(eq: EquivalentNlp, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (eq.extended_dim,):
        raise ValueError(f"extended point must have {eq.extended_dim} coordinates, got {w.shape}")
    a = w[eq.base.dim:]
    if np.any(a < 0.0) or np.any(a > 1.0):
        raise ValueError("alpha coordinates must lie in [0, 1]")
    return w


def pad(eq: EquivalentNlp, J: np.ndarray) -> np.ndarray:
    """Extend base-variable Jacobian rows with zero alpha columns."""
    J = np.atleast_2d(J)
    out = np.zeros((J.shape[0], eq.extended_dim))
    out[:, : eq.base.dim] = J
    return out


def ppi_values(eq: EquivalentNlp, w: np.ndarray) -> np.ndarray:
    """Values of all ``m = 0`` rows at an extended point inside the box."""
    wl = w.tolist()
    return np.array([
        ppi_unchecked(row.zone.intervals, wl[row.p_index], wl[row.alpha])[0]
        for row in eq.ppi_constraints
    ])


def ppi_rows(eq: EquivalentNlp, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and extended-space Jacobian of all ``m = 0`` rows."""
    vals = np.zeros(len(eq.ppi_constraints))
    jac = np.zeros((len(eq.ppi_constraints), eq.extended_dim))
    wl = w.tolist()
    for r, row in enumerate(eq.ppi_constraints):
        vals[r], jac[r, row.p_index], jac[r, row.alpha] = ppi_unchecked(
            row.zone.intervals, wl[row.p_index], wl[row.alpha], True
        )
    return vals, jac


def eval_extended(eq: EquivalentNlp, w) -> ExtendedEvaluation:
    w = _check_point(eq, w)
    z = eq.split(w)
    base = eq.base
    grad = np.zeros(eq.extended_dim)
    grad[: base.dim] = base.objective_grad(z)
    ppi_vals, ppi_jac = ppi_rows(eq, w)
    return ExtendedEvaluation(
        objective=base.objective_value(z),
        objective_grad=grad,
        eq_values=base.eq_values(z),
        eq_jac=pad(eq, base.eq_jacobian(z).reshape(-1, base.dim)),
        ineq_values=base.ineq_values(z),
        ineq_jac=pad(eq, base.ineq_jacobian(z).reshape(-1, base.dim)),
        ppi_values=ppi_vals,
        ppi_jac=ppi_jac,
    )


def lift(eq: EquivalentNlp, point: Mapping[str, float]) -> np.ndarray:
    """Extended point for a zone-feasible assignment (alpha via recover_alpha)."""
    z = eq.base.to_vector(point)
    w = np.concatenate([z, np.zeros(eq.n_alpha)])
    for row in eq.ppi_constraints:
        w[row.alpha] = recover_alpha(row.zone, z[row.p_index])
    return w


def extract_solution(eq: EquivalentNlp, w, tol: float = ZONE_MATCH_TOL) -> Extraction:
    """Map an extended point back to the original variables and report active zones."""
    w = _check_point(eq, w)
    z = eq.split(w)
    zones = {}
    for row in eq.ppi_constraints:
        p = z[row.p_index]
        inside, j = is_member(row.zone, p, tol)
        if not inside:
            raise ZoneMatchError(
                f"{row.name} = {p!r} matches no allowed zone of {row.zone.intervals} "
                f"within {tol}"
            )
        lo, hi = row.zone.intervals[j - 1]
        zones[row.name] = ZoneAssignment(j, min(1.0, max(0.0, (p - lo) / (hi - lo))))
    return Extraction(eq.base.to_assignment(z), zones)
