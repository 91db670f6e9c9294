"""Exact single-round hedging game over a finite return support.

The trader picks a hedge Delta, nature picks a return r_i, and the trader
pays v_i - r_i * Delta. The minimax value equals the largest expectation of
v over zero-mean measures on the support, i.e. the upper concave envelope
of the points (r_i, v_i) evaluated at r = 0; the hedge is the slope of the
envelope segment straddling zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, NoRiskNeutralMeasure, ValidationError

ENVELOPE_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteSupport:
    returns: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        returns = tuple(float(r) for r in self.returns)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "returns", returns)
        object.__setattr__(self, "values", values)
        if len(returns) != len(values):
            raise ValidationError("returns and values must have equal length")
        if any(b <= a for a, b in zip(returns, returns[1:])):
            raise ValidationError("returns must be strictly increasing")
        if not returns or returns[0] >= 0 or returns[-1] <= 0:
            raise NoRiskNeutralMeasure(
                "support needs a negative and a positive return; the dual program is infeasible"
            )


@dataclass(frozen=True)
class RiskNeutralMeasure:
    support: tuple[float, ...]
    weights: tuple[float, ...]

    def mean(self) -> float:
        return float(sum(w * r for w, r in zip(self.weights, self.support)))

    def expectation(self, values: Sequence[float]) -> float:
        return float(sum(w * v for w, v in zip(self.weights, values)))


@dataclass(frozen=True)
class SingleRoundSolution:
    price: float
    hedge: float
    measure: RiskNeutralMeasure
    binding: tuple[int, ...]


def _upper_hull(xs: Sequence[float], ys: Sequence[float]) -> list[int]:
    """Vertices of the upper concave hull (monotone chain over sorted x).

    A point on or below the line through its neighbours is dropped, using a
    cross-product test so near-duplicate x values cannot leave a reflex
    vertex behind.
    """
    hull: list[int] = []
    for k in range(len(xs)):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            cross = (xs[j] - xs[i]) * (ys[k] - ys[i]) - (ys[j] - ys[i]) * (xs[k] - xs[i])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(k)
    return hull


def _on_segment(xs, ys, a: int, b: int, k: int) -> float:
    """Height of point k below the chord a-b (negative if above)."""
    lam = (xs[k] - xs[a]) / (xs[b] - xs[a])
    return ys[a] + lam * (ys[b] - ys[a]) - ys[k]


def envelope_at_zero(points: Sequence[tuple[float, float]]) -> tuple[float, int, int]:
    """Value at 0 of the upper concave envelope of ``points``.

    Returns ``(value, left, right)``; ``left == right`` when a support point
    at exactly 0 attains the envelope. Among pairs that tie within
    ENVELOPE_TOL the one with the smallest gap x_right - x_left is reported.
    Runs in O(b).
    """
    xs = [float(p[0]) for p in points]
    ys = [float(p[1]) for p in points]
    if len(xs) < 2 or xs[0] >= 0 or xs[-1] <= 0:
        raise DomainError("points must straddle 0")
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise DomainError("x-coordinates must be strictly increasing")
    hull = _upper_hull(xs, ys)
    a, b = next((a, b) for a, b in zip(hull, hull[1:]) if xs[a] <= 0 < xs[b])
    if xs[a] == 0.0:
        return ys[a], a, a
    # tightest pair: original points on the segment closest to 0 on each side
    left, right = a, b
    for k in range(a + 1, b):
        if abs(_on_segment(xs, ys, a, b, k)) <= ENVELOPE_TOL:
            if xs[k] == 0.0:
                return ys[k], k, k
            if xs[k] < 0:
                left = k
            elif right == b:
                right = k
    ra, rb = xs[left], xs[right]
    value = ys[left] + (-ra / (rb - ra)) * (ys[right] - ys[left])
    return value, left, right


def _solve(returns: tuple[float, ...], values: tuple[float, ...]) -> SingleRoundSolution:
    points = list(zip(returns, values))
    value, left, right = envelope_at_zero(points)
    if left == right:
        # nature stays put; report the slope of the envelope just left of 0
        hull = _upper_hull(returns, values)
        prev = max(k for k in hull if returns[k] < 0)
        hedge = (values[left] - values[prev]) / (returns[left] - returns[prev])
        measure = RiskNeutralMeasure((0.0,), (1.0,))
        return SingleRoundSolution(value, hedge, measure, (left,))
    r1, r2 = returns[left], returns[right]
    v1, v2 = values[left], values[right]
    w1 = r2 / (r2 - r1)
    w2 = -r1 / (r2 - r1)
    hedge = (v2 - v1) / (r2 - r1)
    measure = RiskNeutralMeasure((r1, r2), (w1, w2))
    return SingleRoundSolution(value, hedge, measure, (left, right))


def solve_upper(support: DiscreteSupport) -> SingleRoundSolution:
    """min over Delta of max over i of v_i - r_i * Delta, with its dual measure."""
    return _solve(support.returns, support.values)


def solve_lower(support: DiscreteSupport) -> SingleRoundSolution:
    """max over Delta of min over i of v_i - r_i * Delta (lower convex envelope)."""
    neg = _solve(support.returns, tuple(-v for v in support.values))
    return SingleRoundSolution(-neg.price, -neg.hedge, neg.measure, neg.binding)


def envelope_values(returns: np.ndarray, values: np.ndarray, lower: bool = False) -> np.ndarray:
    """Row-wise envelope value at 0 for a batch of supports sharing ``returns``.

    ``values`` has shape (n, b). Uses the fact that extreme zero-mean measures
    on a finite support are a point mass at 0 or a two-point measure
    straddling 0, so the envelope is the best such chord. Duplicate return
    values are allowed (combined point families).
    """
    returns = np.asarray(returns, dtype=float)
    values = np.asarray(values, dtype=float)
    neg = np.flatnonzero(returns < 0)
    pos = np.flatnonzero(returns > 0)
    zero = np.flatnonzero(returns == 0)
    if neg.size == 0 or pos.size == 0:
        raise NoRiskNeutralMeasure("support needs a negative and a positive return")
    rn = returns[neg][:, None]
    rp = returns[pos][None, :]
    wp = -rn / (rp - rn)  # weight on the positive return
    vn = values[:, neg][:, :, None]
    vp = values[:, pos][:, None, :]
    chords = (vn + wp * (vp - vn)).reshape(values.shape[0], -1)
    if zero.size:
        chords = np.concatenate([chords, values[:, zero]], axis=1)
    return chords.min(axis=1) if lower else chords.max(axis=1)
