"""Multistart augmented Lagrangian solver for the smooth equivalent problem.

Equalities (original ones and the ``m = 0`` rows) and inequalities are
handled by a Powell-Hestenes-Rockafellar augmented Lagrangian. Each
subproblem is minimized over the variable box by projected gradient
steps with Barzilai-Borwein trial lengths and halving backtracking on the
Armijo condition. The PPI rows are only C1, so no curvature information
is used.
"""
from __future__ import annotations

import collections
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from ._parallel import ordered_map
from .core import ppi_eval, recover_alpha
from .problem import Assignment, evaluate
from .reformulate import (
    EquivalentNlp,
    ZoneAssignment,
    ZoneMatchError,
    extract_solution,
    pad,
    ppi_rows,
    ppi_values,
)

ARMIJO = 1e-4
#: Number of past merit values the Armijo test compares against.
NONMONOTONE_MEMORY = 10
PENALTY_MAX = 1e12
#: Required reduction of the constraint violation per outer iteration before
#: the penalty is left unchanged.
VIOLATION_DECREASE = 0.25
#: Relative objective change between two feasible outer iterations below
#: which a start is declared stalled.
STALL_RTOL = 1e-10
_BB_MIN, _BB_MAX = 1e-12, 1e12
_SEED_REDRAWS = 1000


@dataclass(frozen=True)
class SolverConfig:
    multistarts: int = 8
    outer_iters: int = 30
    inner_iters: int = 500
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    constraint_tol: float = 1e-7
    grad_tol: float = 1e-6
    step_init: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("multistarts", "outer_iters", "inner_iters"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not self.penalty_init > 0 or not self.step_init > 0:
            raise ValueError("penalty_init and step_init must be positive")
        if not self.penalty_growth > 1:
            raise ValueError("penalty_growth must exceed 1")
        for name in ("constraint_tol", "grad_tol"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


class SmoothModel:
    """Objective and constraint callbacks on a boxed vector.

    ``eq`` rows must vanish and ``ineq`` rows must be nonpositive.
    """

    def __init__(self, lower, upper, objective, objective_grad, eq, eq_jac, ineq, ineq_jac,
                 scale=None):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        # characteristic size of each coordinate; steps are taken in x / scale
        self.scale = np.ones_like(self.lower) if scale is None else np.asarray(scale, float)
        self.objective = objective
        self.objective_grad = objective_grad
        self.eq = eq
        self.eq_jac = eq_jac
        self.ineq = ineq
        self.ineq_jac = ineq_jac

    def project(self, x):
        return np.minimum(np.maximum(x, self.lower), self.upper)

    @classmethod
    def from_equivalent(cls, eq: EquivalentNlp) -> "SmoothModel":
        base = eq.base
        n = base.dim

        def eq_values(w):
            return np.concatenate([base.eq_values(w[:n]), ppi_values(eq, w)])

        def eq_jac(w):
            J = pad(eq, base.eq_jacobian(w[:n]).reshape(-1, n))
            if eq.ppi_constraints:
                J = np.vstack([J, ppi_rows(eq, w)[1]])
            return J

        def objective_grad(w):
            g = np.zeros(eq.extended_dim)
            g[:n] = base.objective_grad(w[:n])
            return g

        scale = np.ones(eq.extended_dim)
        for row in eq.ppi_constraints:
            scale[row.alpha] = 1.0 / np.asarray(row.zone.widths)
        return cls(
            eq.lower_bounds(),
            eq.upper_bounds(),
            lambda w: base.objective_value(w[:n]),
            objective_grad,
            eq_values,
            eq_jac,
            lambda w: base.ineq_values(w[:n]),
            lambda w: pad(eq, base.ineq_jacobian(w[:n]).reshape(-1, n)),
            scale,
        )


@dataclass
class LocalResult:
    x: np.ndarray
    iterations: int
    outer_iterations: int
    stationarity: float
    violation: float
    penalties: list[float]
    converged: bool
    stalled: bool = False

    @property
    def status(self) -> str:
        if self.converged:
            return "converged"
        return "stalled" if self.stalled else "iteration_limit"


def _max_violation(ce, ci) -> float:
    v = 0.0
    if ce.size:
        v = float(np.max(np.abs(ce)))
    if ci.size:
        v = max(v, float(np.max(ci)))
    return v


def _stationarity(model: SmoothModel, x, g) -> float:
    """Largest projected-gradient component in scaled coordinates."""
    pg = (model.project(x - model.scale**2 * g) - x) / model.scale
    return float(np.max(np.abs(pg), initial=0.0))


def _gradient_scale(model: SmoothModel, x) -> float:
    """Stationarity is judged relative to the objective gradient size."""
    g = model.objective_grad(x) / model.scale
    return max(1.0, float(np.max(np.abs(g), initial=0.0)))


def augmented_lagrangian(
    model: SmoothModel,
    x0,
    cfg: SolverConfig,
    record: Optional[Callable[[np.ndarray], None]] = None,
) -> LocalResult:
    """Locally solve ``min f s.t. eq = 0, ineq <= 0, lower <= x <= upper``.

    ``record`` is called with every accepted inner iterate.
    """
    x = model.project(np.asarray(x0, dtype=float))
    metric = model.scale**2
    m_eq = model.eq(x).size
    m_in = model.ineq(x).size
    lam = np.zeros(m_eq)
    mu = np.zeros(m_in)
    rho = float(cfg.penalty_init)
    penalties = []
    prev_violation = math.inf
    total_iters = 0
    stationarity = math.inf
    violation = math.inf
    converged = False
    stalled = False
    prev_objective = None
    outer = 0

    for outer in range(1, cfg.outer_iters + 1):
        penalties.append(rho)

        def value(y):
            ce = model.eq(y)
            ci = model.ineq(y)
            v = model.objective(y) + lam @ ce + 0.5 * rho * (ce @ ce)
            if m_in:
                s = np.maximum(0.0, mu + rho * ci)
                v += (s @ s - mu @ mu) / (2.0 * rho)
            return v, ce, ci

        def gradient(y, ce, ci):
            g = model.objective_grad(y)
            if m_eq:
                g = g + model.eq_jac(y).T @ (lam + rho * ce)
            if m_in:
                g = g + model.ineq_jac(y).T @ np.maximum(0.0, mu + rho * ci)
            return g

        L, ce, ci = value(x)
        g = gradient(x, ce, ci)
        # loose subproblems early, the target tolerance once multipliers settle
        inner_tol = max(cfg.grad_tol, 10.0 ** -outer)
        t = cfg.step_init
        history = collections.deque([L], maxlen=NONMONOTONE_MEMORY)
        for _ in range(cfg.inner_iters):
            stationarity = _stationarity(model, x, g) / _gradient_scale(model, x)
            if stationarity <= inner_tol:
                break
            direction = metric * g
            reference = max(history)
            while True:
                x_new = model.project(x - t * direction)
                step = x_new - x
                L_new, ce_new, ci_new = value(x_new)
                if L_new <= reference + ARMIJO * (g @ step) or t < _BB_MIN:
                    break
                t *= 0.5
            if not np.any(step):
                break
            total_iters += 1
            g_new = gradient(x_new, ce_new, ci_new)
            sy = step @ (g_new - g)
            ss = step @ (step / metric)
            t = min(_BB_MAX, max(_BB_MIN, ss / sy)) if sy > 0 else _BB_MAX
            x, L, ce, ci, g = x_new, L_new, ce_new, ci_new, g_new
            history.append(L)
            if record is not None:
                record(x.copy())
        else:
            stationarity = _stationarity(model, x, g) / _gradient_scale(model, x)

        violation = _max_violation(ce, ci)
        # the inner stationarity is measured on the Lagrangian with the updated multipliers
        lam = lam + rho * ce
        if m_in:
            mu = np.maximum(0.0, mu + rho * ci)
        if violation <= cfg.constraint_tol:
            if stationarity <= cfg.grad_tol:
                converged = True
                break
            f = model.objective(x)
            if prev_objective is not None and \
                    abs(f - prev_objective) <= STALL_RTOL * max(1.0, abs(f)):
                stalled = True
                break
            prev_objective = f
        else:
            prev_objective = None
        if violation > cfg.constraint_tol and violation > VIOLATION_DECREASE * prev_violation:
            rho = min(PENALTY_MAX, rho * cfg.penalty_growth)
        prev_violation = violation

    return LocalResult(x, total_iters, outer, stationarity, violation, penalties, converged,
                       stalled)


# ------------------------------------------------------------------ multistart

@dataclass(frozen=True)
class Residuals:
    max_eq: float
    max_ineq: float
    max_ppi: float
    max_bound: float

    @property
    def worst(self) -> float:
        return max(self.max_eq, self.max_ineq, self.max_ppi, self.max_bound)


def residuals(eq: EquivalentNlp, w: np.ndarray) -> Residuals:
    """Constraint residuals recomputed through the problem evaluator and the PPI core."""
    base = eq.base
    z = np.asarray(w[: base.dim], dtype=float)
    ev = evaluate(base, base.to_assignment(z))
    max_eq = max((abs(r) for r in ev.eq_residuals), default=0.0)
    max_ineq = max((max(0.0, -s) for s in ev.ineq_slacks), default=0.0)
    bound = float(np.max(np.maximum(eq.lower_bounds() - w, w - eq.upper_bounds()), initial=0.0))
    max_ppi = 0.0
    for row in eq.ppi_constraints:
        alpha = np.clip(w[row.alpha], 0.0, 1.0)
        max_ppi = max(max_ppi, abs(ppi_eval(row.zone, z[row.p_index], alpha).value))
    return Residuals(max_eq, max_ineq, max_ppi, max(0.0, bound))


@dataclass
class StartDiagnostics:
    index: int
    seed_zones: dict[str, int]
    iterations: int
    outer_iterations: int
    status: str
    converged: bool
    feasible: bool
    final_penalty: float
    penalties: list[float]
    objective: float
    max_residual: float
    stationarity: float


@dataclass
class SolveReport:
    """Best point over all starts.

    ``success`` means the recomputed residuals of the returned point pass
    ``constraint_tol``; ``converged`` additionally requires the winning
    start to have met the stationarity tolerance.
    """

    assignment: Assignment
    objective: float
    max_eq_residual: float
    max_ineq_violation: float
    max_ppi_residual: float
    max_bound_violation: float
    zones: dict[str, Optional[ZoneAssignment]]
    starts: list[StartDiagnostics]
    best_start: int
    success: bool
    converged: bool
    point: np.ndarray
    config: SolverConfig
    wall_time: float = field(default=0.0, compare=False)

    def zone_indices(self) -> dict[str, Optional[int]]:
        return {k: (None if v is None else v.zone_index) for k, v in self.zones.items()}


def bound_midpoint(lo: float, hi: float) -> float:
    if math.isfinite(lo) and math.isfinite(hi):
        return 0.5 * (lo + hi)
    if math.isfinite(lo):
        return lo
    if math.isfinite(hi):
        return hi
    return 0.0


def seed_zone_choices(eq: EquivalentNlp, cfg: SolverConfig) -> list[dict[str, int]]:
    """Zone index per zoned variable for every start; start 0 uses zone 1 everywhere.

    Later starts draw each zone uniformly. A draw that repeats an earlier
    combination is discarded while unused combinations remain, so small
    combination spaces are covered without duplicates.
    """
    rng = np.random.default_rng(cfg.seed)
    rows = eq.ppi_constraints
    total = math.prod(row.zone.size for row in rows)
    first = tuple(1 for _ in rows)
    seen = {first}
    picks = [first]
    for _ in range(1, cfg.multistarts):
        for _ in range(_SEED_REDRAWS):
            combo = tuple(int(rng.integers(1, row.zone.size + 1)) for row in rows)
            if combo not in seen or len(seen) >= total:
                break
        seen.add(combo)
        picks.append(combo)
    return [{row.name: j for row, j in zip(rows, combo)} for combo in picks]


def seed_starts(eq: EquivalentNlp, cfg: SolverConfig) -> list[np.ndarray]:
    base = eq.base
    starts = []
    for combo in seed_zone_choices(eq, cfg):
        w = np.zeros(eq.extended_dim)
        for i, v in enumerate(base.variables):
            if not v.zoned:
                w[i] = bound_midpoint(v.lower, v.upper)
        for row in eq.ppi_constraints:
            p = row.zone.midpoint(combo[row.name])
            w[row.p_index] = p
            w[row.alpha] = recover_alpha(row.zone, p)
        starts.append(w)
    return starts


def _rank(diag: StartDiagnostics):
    if diag.feasible:
        return (0, diag.objective, 0.0, diag.index)
    return (1, diag.max_residual, diag.objective, diag.index)


def _zones_of(eq: EquivalentNlp, w: np.ndarray) -> dict[str, Optional[ZoneAssignment]]:
    """Zone per zoned variable; ``None`` where the value is in a prohibited band."""
    try:
        return dict(extract_solution(eq, w).zones)
    except ZoneMatchError:
        pass
    zones: dict[str, Optional[ZoneAssignment]] = {}
    for row in eq.ppi_constraints:
        single = EquivalentNlp(eq.base, (row,), eq.extended_dim)
        try:
            zones[row.name] = extract_solution(single, w).zones[row.name]
        except ZoneMatchError:
            zones[row.name] = None
    return zones


def solve(eq: EquivalentNlp, cfg: SolverConfig = SolverConfig()) -> SolveReport:
    t0 = time.perf_counter()
    model = SmoothModel.from_equivalent(eq)
    starts = seed_starts(eq, cfg)
    combos = seed_zone_choices(eq, cfg)

    def run(k: int):
        local = augmented_lagrangian(model, starts[k], cfg)
        res = residuals(eq, local.x)
        feasible = res.worst <= cfg.constraint_tol
        diag = StartDiagnostics(
            index=k,
            seed_zones=combos[k],
            iterations=local.iterations,
            outer_iterations=local.outer_iterations,
            status=local.status,
            converged=feasible and local.converged,
            feasible=feasible,
            final_penalty=local.penalties[-1],
            penalties=local.penalties,
            objective=eq.base.objective_value(local.x[: eq.base.dim]),
            max_residual=res.worst,
            stationarity=local.stationarity,
        )
        return local.x, res, diag

    results = ordered_map(run, range(len(starts)))
    best = min(range(len(results)), key=lambda k: _rank(results[k][2]))
    x, res, diag = results[best]
    return SolveReport(
        assignment=eq.base.to_assignment(x[: eq.base.dim]),
        objective=diag.objective,
        max_eq_residual=res.max_eq,
        max_ineq_violation=res.max_ineq,
        max_ppi_residual=res.max_ppi,
        max_bound_violation=res.max_bound,
        zones=_zones_of(eq, x),
        starts=[r[2] for r in results],
        best_start=best,
        success=diag.feasible,
        converged=diag.converged,
        point=x,
        config=cfg,
        wall_time=time.perf_counter() - t0,
    )
