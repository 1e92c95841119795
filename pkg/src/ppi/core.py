"""Piecewise polynomial interpolation (PPI) of a single zoned variable.

A variable ``p`` restricted to a union of disjoint closed intervals
``[lo_1, hi_1] U ... U [lo_{n}, hi_{n}]`` is represented through one
interpolation coordinate ``alpha_i`` in ``[0, 1]`` per interval. Each
coordinate maps onto its interval through the segment map
``d_i(alpha_i) = alpha_i * hi_i + (1 - alpha_i) * lo_i`` and the PPI
function ``m(p, alpha)`` vanishes exactly when ``p`` equals one of the
segment images. ``m`` is a Heaviside-gated sum of quadratics

    m = -q(1, 2) + sum_{i=2}^{NP} (-1)^i [q(i-1, i) + q(i, i+1)] u(p, d_i)

with ``q(a, b) = (p - d_a)(p - d_b) / (d_b - d_a)`` and ``NP = n - 1`` the
number of prohibited zones. It is continuously differentiable in
``(p, alpha)``.

Zone indices are 1-based throughout the public API.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "InvalidZoneSet",
    "CorruptInput",
    "NotAMember",
    "ZoneSet",
    "PpiEvaluation",
    "Membership",
    "zone_violations",
    "segment_eval",
    "heaviside",
    "ppi_eval",
    "ppi_unchecked",
    "ppi_value_batch",
    "switch_bracket",
    "is_member",
    "recover_alpha",
    "min_abs_ppi_over_alpha_grid",
    "min_abs_ppi_random_alpha",
    "MAX_GRID_AXES",
    "FREE_ALPHA",
]

#: Exhaustive alpha grids are only built up to this many axes.
MAX_GRID_AXES = 4
#: Value given to the alpha coordinates of zones that do not contain p.
FREE_ALPHA = 0.5


class InvalidZoneSet(ValueError):
    """Raised when interval data does not describe a valid zone set."""


class CorruptInput(ValueError):
    """Raised when an internal invariant (e.g. a nonzero denominator) fails."""


class NotAMember(ValueError):
    """Raised when a value lies in a prohibited zone."""


def zone_violations(intervals: Sequence[Sequence[float]]) -> list[str]:
    """Return human-readable violations of the zone set rules.

    An empty list means the intervals are finite, at least two, each of
    positive width, and strictly interleaved
    ``lo_1 < hi_1 < lo_2 < ... < hi_n``.
    """
    problems = []
    if len(intervals) < 2:
        problems.append(
            f"need at least 2 allowed zones (one prohibited zone), got {len(intervals)}"
        )
    for i, iv in enumerate(intervals, start=1):
        if len(iv) != 2:
            problems.append(f"zone {i}: expected [lower, upper], got {list(iv)!r}")
            continue
        lo, hi = iv
        if not (math.isfinite(lo) and math.isfinite(hi)):
            problems.append(f"zone {i}: bounds must be finite")
        elif not hi - lo > 0:
            problems.append(f"zone {i}: width must be positive (lower={lo}, upper={hi})")
    for i in range(1, len(intervals)):
        prev, cur = intervals[i - 1], intervals[i]
        if len(prev) == 2 and len(cur) == 2 and not prev[1] < cur[0]:
            problems.append(
                f"zones {i} and {i + 1}: ordering requires upper_{i} < lower_{i + 1} "
                f"(got {prev[1]} >= {cur[0]})"
            )
    return problems


@dataclass(frozen=True)
class ZoneSet:
    """Ordered allowed intervals of one variable; their gaps are the prohibited zones."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ivs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        problems = zone_violations(ivs)
        if problems:
            raise InvalidZoneSet("; ".join(problems))

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> "ZoneSet":
        return cls(tuple((lo, hi) for lo, hi in pairs))

    @property
    def size(self) -> int:
        """Number of allowed zones, ``NP + 1``."""
        return len(self.intervals)

    @property
    def n_prohibited(self) -> int:
        return len(self.intervals) - 1

    @property
    def lower(self) -> tuple[float, ...]:
        return tuple(lo for lo, _ in self.intervals)

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(hi for _, hi in self.intervals)

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in self.intervals)

    @property
    def span(self) -> tuple[float, float]:
        return self.intervals[0][0], self.intervals[-1][1]

    def gaps(self) -> list[tuple[float, float]]:
        """Prohibited open bands ``(upper_i, lower_{i+1})``."""
        return [
            (self.intervals[i][1], self.intervals[i + 1][0])
            for i in range(self.n_prohibited)
        ]

    def midpoint(self, index: int) -> float:
        lo, hi = self.intervals[index - 1]
        return 0.5 * (lo + hi)


@dataclass(frozen=True)
class PpiEvaluation:
    value: float
    grad_p: float
    grad_alpha: tuple[float, ...]


class Membership(NamedTuple):
    inside: bool
    zone_index: int | None


def segment_eval(zone: ZoneSet, i: int, alpha_i: float) -> float:
    """Image of ``alpha_i`` under the linear map of ``[0, 1]`` onto zone ``i``."""
    if not 1 <= i <= zone.size:
        raise IndexError(f"zone index {i} out of range 1..{zone.size}")
    if not 0.0 <= alpha_i <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha_i}")
    lo, hi = zone.intervals[i - 1]
    return alpha_i * hi + (1.0 - alpha_i) * lo


def heaviside(p: float, d: float) -> int:
    """Unit step with ``heaviside(d, d) == 1``."""
    return 1 if p - d >= 0 else 0


def _checked_alpha(zone: ZoneSet, alpha: Sequence[float]) -> tuple[float, ...]:
    alpha = tuple(float(a) for a in alpha)
    if len(alpha) != zone.size:
        raise ValueError(f"alpha has length {len(alpha)}, zone set has {zone.size} zones")
    for i, a in enumerate(alpha, start=1):
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"alpha_{i} = {a} outside [0, 1]")
    return alpha


def _terms(n: int):
    """Signed quadratic terms of m as ``(sign, a, b, gate)`` with 0-based indices.

    ``gate`` is the index whose segment image switches the term on, or
    ``None`` for the ungated leading term.
    """
    yield -1.0, 0, 1, None
    for i in range(2, n):  # 1-based i = 2..NP
        sign = 1.0 if i % 2 == 0 else -1.0
        g = i - 1
        yield sign, g - 1, g, g
        yield sign, g, g + 1, g


def ppi_eval(zone: ZoneSet, p: float, alpha: Sequence[float]) -> PpiEvaluation:
    """Value and analytic partial derivatives of ``m(p, alpha)``.

    The derivatives are obtained term by term from the gated sum; the
    Heaviside factors are treated as locally constant, which is exact
    because every switched bracket vanishes together with its first
    derivatives on the switching surface ``p = d_i``.
    """
    alpha = _checked_alpha(zone, alpha)
    value, grad_p, grad_alpha = ppi_unchecked(zone.intervals, float(p), alpha, True)
    return PpiEvaluation(value, grad_p, tuple(grad_alpha))


@functools.lru_cache(maxsize=None)
def _term_list(n: int) -> tuple:
    return tuple(_terms(n))


def ppi_unchecked(intervals, p: float, alpha, gradient: bool = False):
    """Inner loop of :func:`ppi_eval` without domain checks.

    Returns ``(value, grad_p, grad_alpha)``; the gradients are ``None``
    unless ``gradient`` is set. Used on hot paths where the caller
    guarantees the inputs.
    """
    d = [a * hi + (1.0 - a) * lo for a, (lo, hi) in zip(alpha, intervals)]
    value = 0.0
    grad_p = 0.0
    grad_d = [0.0] * len(d)
    for sign, a, b, g in _term_list(len(d)):
        if g is not None and p - d[g] < 0:
            continue
        denom = d[b] - d[a]
        if not denom > 0:
            raise CorruptInput(
                f"nonpositive denominator d_{b + 1} - d_{a + 1} = {denom}"
            )
        rb = (p - d[b]) / denom
        value += sign * (p - d[a]) * rb
        if gradient:
            ra = (p - d[a]) / denom
            grad_p += sign * (2.0 * p - d[a] - d[b]) / denom
            grad_d[a] += sign * rb * rb
            grad_d[b] -= sign * ra * ra
    if not gradient:
        return value, None, None
    return value, grad_p, [gd * (hi - lo) for gd, (lo, hi) in zip(grad_d, intervals)]


def ppi_value_batch(zone: ZoneSet, p: float, alphas: np.ndarray) -> np.ndarray:
    """Vectorized ``m(p, alpha)`` for each row of ``alphas`` (shape ``(N, size)``).

    No domain checks beyond shape; callers are expected to pass rows in the
    unit box.
    """
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim != 2 or alphas.shape[1] != zone.size:
        raise ValueError(f"alphas must have shape (N, {zone.size})")
    lo = np.asarray(zone.lower)
    hi = np.asarray(zone.upper)
    d = alphas * hi + (1.0 - alphas) * lo
    out = np.zeros(alphas.shape[0])
    for sign, a, b, g in _terms(zone.size):
        term = sign * (p - d[:, a]) * (p - d[:, b]) / (d[:, b] - d[:, a])
        if g is None:
            out += term
        else:
            out += np.where(p - d[:, g] >= 0, term, 0.0)
    return out


def switch_bracket(zone: ZoneSet, i: int, p: float, alpha: Sequence[float]) -> float:
    """Bracketed ``dm/dp`` contribution gated by ``u(p, d_i)``, for ``2 <= i <= NP``.

    Equals 0 whenever ``p == d_i``, which is what keeps ``dm/dp``
    continuous across the switch.
    """
    if not 2 <= i <= zone.n_prohibited:
        raise IndexError(f"switch index {i} out of range 2..{zone.n_prohibited}")
    alpha = _checked_alpha(zone, alpha)
    dm1, di, dp1 = (segment_eval(zone, j, alpha[j - 1]) for j in (i - 1, i, i + 1))
    return (2 * p - di - dm1) / (di - dm1) + (2 * p - di - dp1) / (dp1 - di)


def is_member(zone: ZoneSet, p: float, tol: float = 0.0) -> Membership:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    for i, (lo, hi) in enumerate(zone.intervals, start=1):
        if lo - tol <= p <= hi + tol:
            return Membership(True, i)
    return Membership(False, None)


def recover_alpha(zone: ZoneSet, p: float) -> tuple[float, ...]:
    """Interpolation coordinates placing a segment image exactly at ``p``.

    The containing zone gets ``(p - lo) / (hi - lo)``; all other
    coordinates are free and set to :data:`FREE_ALPHA`.
    """
    inside, j = is_member(zone, p, 0.0)
    if not inside:
        raise NotAMember(f"p = {p} lies in a prohibited zone of {zone.intervals}")
    lo, hi = zone.intervals[j - 1]
    alpha = [FREE_ALPHA] * zone.size
    alpha[j - 1] = min(1.0, max(0.0, (p - lo) / (hi - lo)))
    return tuple(alpha)


def min_abs_ppi_over_alpha_grid(zone: ZoneSet, p: float, grid_points_per_axis: int) -> float:
    """Minimum of ``|m(p, alpha)|`` over a full tensor grid of the unit box."""
    if grid_points_per_axis < 2:
        raise ValueError("grid_points_per_axis must be at least 2")
    if zone.size > MAX_GRID_AXES:
        raise ValueError(
            f"exhaustive grid limited to {MAX_GRID_AXES} axes, zone set has {zone.size}; "
            "use min_abs_ppi_random_alpha"
        )
    axis = np.linspace(0.0, 1.0, grid_points_per_axis)
    grid = np.array(list(itertools.product(axis, repeat=zone.size)))
    return float(np.min(np.abs(ppi_value_batch(zone, p, grid))))


def min_abs_ppi_random_alpha(
    zone: ZoneSet, p: float, samples: int = 100_000, seed: int = 0
) -> float:
    """Minimum of ``|m(p, alpha)|`` over uniformly sampled alpha (any dimension)."""
    rng = np.random.default_rng(seed)
    alphas = rng.random((samples, zone.size))
    return float(np.min(np.abs(ppi_value_batch(zone, p, alphas))))
