"""Economic dispatch with prohibited operating zones (EDPOZ).

Units have quadratic fuel costs ``a p^2 + b p + c`` and generation limits
``[p_min, p_max]`` with optional open prohibited bands strictly inside.
Demand balance is ``sum(p) - p.B.p = demand`` where ``B`` is an optional
symmetric loss-coefficient matrix (1/MW).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from .problem import (
    Pair,
    EqConstraint,
    NlpdfrProblem,
    ProblemError,
    QuadraticObjective,
    VariableSpec,
    validate,
)


class DispatchError(ValueError):
    pass


@dataclass(frozen=True)
class UnitSpec:
    name: str
    a: float
    b: float
    c: float
    p_min: float
    p_max: float
    bands: tuple[tuple[float, float], ...] = ()

    def check(self) -> None:
        if not self.p_min < self.p_max:
            raise DispatchError(f"unit {self.name}: p_min must be below p_max")
        if self.a < 0:
            raise DispatchError(f"unit {self.name}: quadratic cost coefficient must be >= 0")
        prev_hi = self.p_min
        for lo, hi in self.bands:
            if not lo < hi:
                raise DispatchError(f"unit {self.name}: band ({lo}, {hi}) is empty")
            if lo <= prev_hi:
                what = "touches the lower generation limit" if prev_hi == self.p_min else \
                    "overlaps or touches the previous band"
                raise DispatchError(
                    f"unit {self.name}: band ({lo}, {hi}) {what} (zero-width allowed zone)"
                )
            prev_hi = hi
        if self.bands and self.bands[-1][1] >= self.p_max:
            lo, hi = self.bands[-1]
            raise DispatchError(
                f"unit {self.name}: band ({lo}, {hi}) reaches the upper generation limit "
                f"{self.p_max} (zero-width allowed zone)"
            )

    def allowed_zones(self) -> tuple[tuple[float, float], ...]:
        edges = [self.p_min]
        for lo, hi in self.bands:
            edges += [lo, hi]
        edges.append(self.p_max)
        return tuple((edges[i], edges[i + 1]) for i in range(0, len(edges), 2))


@dataclass(frozen=True)
class SystemSpec:
    units: tuple[UnitSpec, ...]
    demand: float
    loss_matrix: Optional[tuple[tuple[float, ...], ...]] = None

    def check(self) -> None:
        if not self.units:
            raise DispatchError("system has no units")
        names = [u.name for u in self.units]
        if len(set(names)) != len(names):
            raise DispatchError("unit names must be unique")
        if not self.demand > 0:
            raise DispatchError("demand must be positive")
        for u in self.units:
            u.check()
        if self.loss_matrix is not None:
            B = np.array(self.loss_matrix, dtype=float)
            n = len(self.units)
            if B.shape != (n, n):
                raise DispatchError(f"loss matrix must be {n}x{n}")
            if np.max(np.abs(B - B.T)) > 1e-12:
                raise DispatchError("loss matrix must be symmetric")
            if np.min(np.linalg.eigvalsh(B)) < -1e-12:
                raise DispatchError("loss matrix must be positive semidefinite")


def build_edpoz(system: SystemSpec) -> NlpdfrProblem:
    system.check()
    n = len(system.units)
    variables = []
    for u in system.units:
        if u.bands:
            variables.append(VariableSpec(u.name, zones=u.allowed_zones()))
        else:
            variables.append(VariableSpec(u.name, bounds=(u.p_min, u.p_max)))
    Q = tuple(
        tuple(system.units[i].a if i == j else 0.0 for j in range(n)) for i in range(n)
    )
    B = None
    if system.loss_matrix is not None:
        B = tuple(tuple(-float(x) for x in row) for row in system.loss_matrix)
    problem = NlpdfrProblem(
        variables=tuple(variables),
        objective=QuadraticObjective(
            c0=float(sum(u.c for u in system.units)),
            c=tuple(float(u.b) for u in system.units),
            Q=Q,
        ),
        eq_constraints=(EqConstraint(a=(1.0,) * n, b=float(system.demand), B=B),),
    )
    problems = validate(problem)
    if problems:  # unreachable when system.check() passes
        raise ProblemError("EDPOZ construction produced an invalid problem", problems)
    return problem


def losses(system: SystemSpec, p: Sequence[float]) -> float:
    if system.loss_matrix is None:
        return 0.0
    p = np.asarray(p, dtype=float)
    return float(p @ np.array(system.loss_matrix) @ p)


def bundled_instances() -> dict[str, SystemSpec]:
    """Desk-scale systems shipped with the package, keyed by name."""
    ed2 = SystemSpec(
        units=(
            UnitSpec("g1", a=0.1, b=2.0, c=0.0, p_min=10.0, p_max=50.0, bands=((20.0, 30.0),)),
            UnitSpec("g2", a=0.05, b=3.0, c=0.0, p_min=10.0, p_max=60.0),
        ),
        demand=60.0,
    )
    # classic three-unit cost data; bands make the unconstrained dispatch infeasible
    ed3poz2 = SystemSpec(
        units=(
            UnitSpec("g1", 0.001562, 7.92, 561.0, 150.0, 600.0, ((250.0, 300.0), (380.0, 420.0))),
            UnitSpec("g2", 0.00194, 7.85, 310.0, 100.0, 400.0, ((180.0, 220.0), (320.0, 350.0))),
            UnitSpec("g3", 0.00482, 7.97, 78.0, 50.0, 200.0, ((90.0, 110.0), (140.0, 160.0))),
        ),
        demand=850.0,
    )
    ed3loss = SystemSpec(
        units=(
            UnitSpec("g1", 0.001562, 7.92, 561.0, 150.0, 600.0, ((400.0, 450.0),)),
            UnitSpec("g2", 0.00194, 7.85, 310.0, 100.0, 400.0, ((250.0, 290.0),)),
            UnitSpec("g3", 0.00482, 7.97, 78.0, 50.0, 200.0, ((100.0, 130.0),)),
        ),
        demand=850.0,
        loss_matrix=(
            (6.76e-05, 9.53e-06, -5.07e-06),
            (9.53e-06, 5.21e-05, 9.01e-06),
            (-5.07e-06, 9.01e-06, 2.94e-05),
        ),
    )
    return {"ed2": ed2, "ed3poz2": ed3poz2, "ed3loss": ed3loss}


def random_system(seed: int, n_units: int = 3, n_bands: int = 2) -> SystemSpec:
    """Seeded random EDPOZ system with ``n_bands`` bands per unit and feasible demand."""
    rng = np.random.default_rng(seed)
    units = []
    for k in range(n_units):
        p_min = float(np.round(rng.uniform(50, 150), 1))
        p_max = float(np.round(p_min + rng.uniform(250, 450), 1))
        # cut the range into 2*n_bands+1 pieces; odd pieces become bands
        weights = rng.uniform(1.0, 2.0, 2 * n_bands + 1)
        weights[1::2] *= 0.3
        edges = p_min + (p_max - p_min) * np.cumsum(weights) / weights.sum()
        bands = tuple(
            (float(np.round(edges[2 * i], 1)), float(np.round(edges[2 * i + 1], 1)))
            for i in range(n_bands)
        )
        units.append(
            UnitSpec(
                f"g{k + 1}",
                a=float(np.round(rng.uniform(0.001, 0.008), 6)),
                b=float(np.round(rng.uniform(6.0, 10.0), 3)),
                c=float(np.round(rng.uniform(50, 500), 1)),
                p_min=p_min,
                p_max=p_max,
                bands=bands,
            )
        )
    lo = sum(u.p_min for u in units)
    hi = sum(u.p_max for u in units)
    demand = float(np.round(rng.uniform(lo + 0.2 * (hi - lo), lo + 0.8 * (hi - lo)), 1))
    return SystemSpec(tuple(units), demand)


# ---------------------------------------------------------------- file format

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)


class _UnitModel(_Strict):
    name: str
    a: float
    b: float
    c: float = 0.0
    p_min: float
    p_max: float
    bands: list[Pair] = []


class _SystemModel(_Strict):
    units: list[_UnitModel]
    demand: float
    B: Optional[list[list[float]]] = None


def system_from_dict(data) -> SystemSpec:
    try:
        m = _SystemModel.model_validate(data)
    except ValidationError as exc:
        msgs = [f"{'.'.join(str(x) for x in e['loc']) or '<root>'}: {e['msg']}" for e in exc.errors()]
        raise ProblemError("system document does not match the schema", msgs) from None
    spec = SystemSpec(
        units=tuple(
            UnitSpec(u.name, float(u.a), float(u.b), float(u.c), float(u.p_min), float(u.p_max),
                     tuple((float(lo), float(hi)) for lo, hi in u.bands))
            for u in m.units
        ),
        demand=float(m.demand),
        loss_matrix=None if m.B is None else tuple(tuple(float(x) for x in r) for r in m.B),
    )
    try:
        spec.check()
    except DispatchError as exc:
        raise ProblemError("invalid system", [str(exc)]) from None
    return spec


def system_to_dict(system: SystemSpec) -> dict:
    out = {
        "units": [
            {"name": u.name, "a": u.a, "b": u.b, "c": u.c, "p_min": u.p_min,
             "p_max": u.p_max, "bands": [list(b) for b in u.bands]}
            for u in system.units
        ],
        "demand": system.demand,
    }
    if system.loss_matrix is not None:
        out["B"] = [list(r) for r in system.loss_matrix]
    return out


def load_system(path) -> SystemSpec:
    return system_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_system(system: SystemSpec, path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(system), indent=2) + "\n", encoding="utf-8")
