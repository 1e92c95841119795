"""Finite-difference verification of the analytic derivatives.

Two kinds of checks are provided:

* :func:`gradcheck` compares every analytic gradient of an extended
  problem (objective, equalities, inequalities and the ``m = 0`` rows)
  against central differences, at random points and in deterministic
  neighborhoods of every zone boundary.
* :func:`breakpoint_jumps` measures how much the PPI gradient changes
  across a segment image ``p = d_j``; for a C1 function the jump is
  ``O(eps)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ZoneSet, ppi_unchecked, segment_eval, switch_bracket
from .reformulate import EquivalentNlp, pad

#: Central-difference step.
FD_STEP = 1e-6
#: Minimum distance between a sampled p and any segment image.
MIN_BREAKPOINT_DISTANCE = 1e-4
#: Target worst relative error.
GRADCHECK_TOL = 1e-5


def relative_error(analytic, numeric) -> float:
    a = np.asarray(analytic, dtype=float)
    f = np.asarray(numeric, dtype=float)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(f)))
    return float(np.max(np.abs(a - f) / denom, initial=0.0))


def central_difference(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                       h: float = FD_STEP) -> np.ndarray:
    """Jacobian of a vector function, one row per output."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.atleast_1d(fn(x + e)) - np.atleast_1d(fn(x - e))) / (2.0 * h))
    if not cols:
        return np.zeros((np.atleast_1d(fn(x)).size, 0))
    return np.stack(cols, axis=-1)


def breakpoint_margin(zone: ZoneSet, h: float = FD_STEP) -> float:
    """Distance from every ``d_i`` that keeps an ``h`` stencil on one polynomial piece.

    Perturbing ``alpha_i`` by ``h`` moves ``d_i`` by ``h * width_i``, so
    wide zones need a proportionally larger exclusion band.
    """
    return max(MIN_BREAKPOINT_DISTANCE, 10.0 * h * max(zone.widths))


def _ppi_value(zone: ZoneSet):
    ivs = zone.intervals
    n = zone.size

    def f(x):
        return ppi_unchecked(ivs, float(x[0]), x[1 : n + 1].tolist())[0]

    return f


def ppi_gradient_error(zone: ZoneSet, p: float, alpha: Sequence[float],
                       h: float = FD_STEP) -> float:
    """Worst relative error of ``(grad_p, grad_alpha)`` against central differences."""
    _, gp, ga = ppi_unchecked(zone.intervals, float(p), list(alpha), True)
    x = np.concatenate([[p], np.asarray(alpha, dtype=float)])
    fd = central_difference(_ppi_value(zone), x, h)[0]
    return relative_error(np.concatenate([[gp], ga]), fd)


def _far_from_images(zone: ZoneSet, p: float, alpha, margin: float) -> bool:
    return all(abs(p - segment_eval(zone, i, a)) >= margin
               for i, a in enumerate(alpha, start=1))


def sample_ppi_point(zone: ZoneSet, rng: np.random.Generator, margin: float | None = None):
    """Random ``(p, alpha)`` with ``p`` in the padded hull and away from every ``d_i``."""
    margin = breakpoint_margin(zone) if margin is None else margin
    lo, hi = zone.span
    while True:
        alpha = rng.uniform(0.0, 1.0, zone.size)
        p = float(rng.uniform(lo - 1.0, hi + 1.0))
        if _far_from_images(zone, p, alpha, margin):
            return p, alpha


def boundary_neighborhoods(zone: ZoneSet, margin: float | None = None):
    """Deterministic ``(p, alpha)`` pairs on both sides of every zone boundary.

    For zone ``j`` and ``alpha_j`` in ``{0, 1}`` the image ``d_j`` sits on
    the zone boundary; ``p`` is placed two margins to either side with
    the remaining coordinates at 0.5.
    """
    margin = breakpoint_margin(zone) if margin is None else margin
    out = []
    for j in range(1, zone.size + 1):
        for aj in (0.0, 1.0):
            alpha = np.full(zone.size, 0.5)
            alpha[j - 1] = aj
            d = segment_eval(zone, j, aj)
            for side in (-1.0, 1.0):
                out.append((d + side * 2.0 * margin, alpha.copy()))
    return out


# -------------------------------------------------------------- full problem

@dataclass(frozen=True)
class GradcheckReport:
    samples: int
    neighborhoods: int
    worst: float
    worst_objective: float
    worst_eq: float
    worst_ineq: float
    worst_ppi: float
    tolerance: float = GRADCHECK_TOL

    @property
    def passed(self) -> bool:
        return self.worst <= self.tolerance


def _box_sampler(lower: float, upper: float, rng):
    if math.isfinite(lower) and math.isfinite(upper):
        return float(rng.uniform(lower, upper))
    centre = lower if math.isfinite(lower) else (upper if math.isfinite(upper) else 0.0)
    return float(rng.uniform(centre - 1.0, centre + 1.0))


def _base_rows(eq: EquivalentNlp):
    base = eq.base
    n = base.dim
    return {
        "objective": (lambda w: np.array([base.objective_value(w[:n])]),
                      lambda w: base.objective_grad(w[:n]).reshape(1, n)),
        "eq": (lambda w: np.asarray(base.eq_values(w[:n])),
               lambda w: base.eq_jacobian(w[:n]).reshape(-1, n)),
        "ineq": (lambda w: np.asarray(base.ineq_values(w[:n])),
                 lambda w: base.ineq_jacobian(w[:n]).reshape(-1, n)),
    }


def _point_errors(eq: EquivalentNlp, w: np.ndarray, h: float) -> dict[str, float]:
    n = eq.base.dim
    errs = {}
    for key, (fn, jac) in _base_rows(eq).items():
        if jac(w).size == 0:
            errs[key] = 0.0
            continue
        fd = central_difference(lambda y: fn(np.concatenate([y, w[n:]])), w[:n], h)
        errs[key] = relative_error(pad(eq, jac(w))[:, :n], fd)
    ppi = 0.0
    for row in eq.ppi_constraints:
        ppi = max(ppi, ppi_gradient_error(row.zone, w[row.p_index], w[row.alpha], h))
    errs["ppi"] = ppi
    return errs


def extended_points(eq: EquivalentNlp, samples: int, seed: int = 0):
    """Random extended points followed by boundary neighborhoods of every zoned variable."""
    rng = np.random.default_rng(seed)
    base = eq.base
    points = []
    for _ in range(samples):
        w = np.zeros(eq.extended_dim)
        for i, v in enumerate(base.variables):
            w[i] = _box_sampler(v.lower, v.upper, rng)
        for row in eq.ppi_constraints:
            w[row.p_index], w[row.alpha] = sample_ppi_point(row.zone, rng)
        points.append(w)
    centre = points[0].copy() if points else np.array(
        [_box_sampler(v.lower, v.upper, rng) for v in base.variables]
        + [0.5] * eq.n_alpha
    )
    neighborhoods = []
    for row in eq.ppi_constraints:
        for p, alpha in boundary_neighborhoods(row.zone):
            w = centre.copy()
            w[row.p_index] = p
            w[row.alpha] = alpha
            neighborhoods.append(w)
    return points, neighborhoods


def gradcheck(eq: EquivalentNlp, samples: int = 1000, seed: int = 0,
              h: float = FD_STEP) -> GradcheckReport:
    if samples < 0:
        raise ValueError("samples must be nonnegative")
    points, neighborhoods = extended_points(eq, samples, seed)
    worst = {"objective": 0.0, "eq": 0.0, "ineq": 0.0, "ppi": 0.0}
    for w in points + neighborhoods:
        for key, err in _point_errors(eq, w, h).items():
            worst[key] = max(worst[key], err)
    return GradcheckReport(
        samples=len(points),
        neighborhoods=len(neighborhoods),
        worst=max(worst.values()),
        worst_objective=worst["objective"],
        worst_eq=worst["eq"],
        worst_ineq=worst["ineq"],
        worst_ppi=worst["ppi"],
    )


# ---------------------------------------------------------------- breakpoints

def case_family(zone: ZoneSet, j: int) -> str:
    """``"first"`` for j = 1, ``"last"`` for j = NP + 1, ``"interior"`` otherwise."""
    if j == 1:
        return "first"
    if j == zone.size:
        return "last"
    return "interior"


@dataclass(frozen=True)
class BreakpointJump:
    j: int
    family: str
    eps: float
    p_star: float
    alpha: tuple[float, ...]
    jump_p: float
    jump_alpha: tuple[float, ...]
    bracket: float | None

    @property
    def worst(self) -> float:
        return max((self.jump_p,) + self.jump_alpha)


def breakpoint_jumps(zone: ZoneSet, j: int, alpha: Sequence[float],
                     eps_values: Sequence[float] = (1e-3, 1e-4, 1e-5)) -> list[BreakpointJump]:
    """Gradient differences across ``p* = d_j(alpha_j)`` for each ``eps``.

    ``bracket`` is the switched ``dm/dp`` bracket at ``p*`` for interior
    switches (``2 <= j <= NP``) and ``None`` where no switch exists.
    """
    alpha = tuple(float(a) for a in alpha)
    p_star = segment_eval(zone, j, alpha[j - 1])
    bracket = switch_bracket(zone, j, p_star, alpha) if 2 <= j <= zone.n_prohibited else None
    out = []
    for eps in eps_values:
        _, gp_r, ga_r = ppi_unchecked(zone.intervals, p_star + eps, alpha, True)
        _, gp_l, ga_l = ppi_unchecked(zone.intervals, p_star - eps, alpha, True)
        out.append(BreakpointJump(
            j=j,
            family=case_family(zone, j),
            eps=float(eps),
            p_star=p_star,
            alpha=alpha,
            jump_p=abs(gp_r - gp_l),
            jump_alpha=tuple(abs(r - l) for r, l in zip(ga_r, ga_l)),
            bracket=bracket,
        ))
    return out
