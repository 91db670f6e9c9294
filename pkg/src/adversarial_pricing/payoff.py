"""Terminal payoffs g(S_T) with the metadata the engines dispatch on."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, ValidationError


class PayoffKind(str, enum.Enum):
    CALL = "call"
    PUT = "put"
    FORWARD = "forward"
    STRADDLE = "straddle"
    BUTTERFLY = "butterfly"
    DIGITAL_RAMP = "digital_ramp"
    TABLE = "table"


class Shape(str, enum.Enum):
    CONVEX = "convex"
    CONCAVE = "concave"
    GENERAL = "general"


_STRIKE_COUNT = {
    PayoffKind.CALL: 1,
    PayoffKind.PUT: 1,
    PayoffKind.FORWARD: 1,
    PayoffKind.STRADDLE: 1,
    PayoffKind.BUTTERFLY: 3,
    PayoffKind.DIGITAL_RAMP: 2,
    PayoffKind.TABLE: 0,
}


@dataclass(frozen=True)
class Payoff:
    """Single-asset terminal payoff.

    ``lipschitz``, ``monotone_nondecreasing`` and ``shape`` are declarations;
    use :func:`validate_metadata` to spot-check them against the function.

    Butterfly with strikes (K1, K2, K3) is the tent that is zero outside
    [K1, K3] and peaks at K2 with value K2 - K1. Digital ramp with strikes
    (K1, K2) rises linearly from 0 at K1 to 1 at K2. Table payoffs are
    linearly interpolated between knots and constant beyond the end knots.
    """

    kind: PayoffKind
    strikes: tuple[float, ...] = ()
    table: tuple[tuple[float, float], ...] | None = None
    lipschitz: float = 1.0
    monotone_nondecreasing: bool = False
    shape: Shape = Shape.GENERAL
    _xs: np.ndarray = field(init=False, repr=False, compare=False)
    _ys: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        kind = PayoffKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "shape", Shape(self.shape))
        strikes = tuple(float(k) for k in self.strikes)
        object.__setattr__(self, "strikes", strikes)
        if len(strikes) != _STRIKE_COUNT[kind]:
            raise ValidationError(
                f"{kind.value} payoff needs {_STRIKE_COUNT[kind]} strike(s), got {len(strikes)}"
            )
        if any(not np.isfinite(k) or k <= 0 for k in strikes):
            raise ValidationError(f"strikes must be positive, got {strikes}")
        if any(b <= a for a, b in zip(strikes, strikes[1:])):
            raise ValidationError(f"strikes must be strictly increasing, got {strikes}")
        if not (np.isfinite(self.lipschitz) and self.lipschitz > 0):
            raise ValidationError(f"lipschitz must be a positive real, got {self.lipschitz}")

        if kind is PayoffKind.TABLE:
            if not self.table or len(self.table) < 2:
                raise ValidationError("table payoff needs at least two knots")
            knots = tuple((float(p), float(v)) for p, v in self.table)
            xs = np.array([p for p, _ in knots])
            ys = np.array([v for _, v in knots])
            if np.any(xs <= 0) or not np.all(np.isfinite(xs)) or not np.all(np.isfinite(ys)):
                raise ValidationError("table knot prices must be positive and finite")
            if np.any(np.diff(xs) <= 0):
                raise ValidationError("table knot prices must be strictly increasing")
            object.__setattr__(self, "table", knots)
        elif self.table is not None:
            raise ValidationError(f"{kind.value} payoff does not take a knot table")
        else:
            xs, ys = self._knots_for(kind, strikes)
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_ys", ys)

    @staticmethod
    def _knots_for(kind: PayoffKind, strikes: tuple[float, ...]) -> tuple[np.ndarray, np.ndarray]:
        # Bounded-support kinds reduce to tables; call/put/forward/straddle
        # stay closed-form.
        if kind is PayoffKind.BUTTERFLY:
            k1, k2, k3 = strikes
            return np.array([k1, k2, k3]), np.array([0.0, k2 - k1, 0.0])
        if kind is PayoffKind.DIGITAL_RAMP:
            k1, k2 = strikes
            return np.array([k1, k2]), np.array([0.0, 1.0])
        return np.empty(0), np.empty(0)

    # -- constructors -------------------------------------------------
    @classmethod
    def call(cls, strike: float) -> "Payoff":
        return cls(PayoffKind.CALL, (strike,), lipschitz=1.0, monotone_nondecreasing=True, shape=Shape.CONVEX)

    @classmethod
    def put(cls, strike: float) -> "Payoff":
        return cls(PayoffKind.PUT, (strike,), lipschitz=1.0, monotone_nondecreasing=False, shape=Shape.CONVEX)

    @classmethod
    def forward(cls, strike: float) -> "Payoff":
        return cls(PayoffKind.FORWARD, (strike,), lipschitz=1.0, monotone_nondecreasing=True, shape=Shape.CONVEX)

    @classmethod
    def straddle(cls, strike: float) -> "Payoff":
        return cls(PayoffKind.STRADDLE, (strike,), lipschitz=1.0, shape=Shape.CONVEX)

    @classmethod
    def butterfly(cls, k1: float, k2: float, k3: float) -> "Payoff":
        slope = max(1.0, (k2 - k1) / (k3 - k2))
        return cls(PayoffKind.BUTTERFLY, (k1, k2, k3), lipschitz=slope, shape=Shape.GENERAL)

    @classmethod
    def digital_ramp(cls, k1: float, k2: float) -> "Payoff":
        return cls(
            PayoffKind.DIGITAL_RAMP, (k1, k2), lipschitz=1.0 / (k2 - k1),
            monotone_nondecreasing=True, shape=Shape.GENERAL,
        )

    @classmethod
    def from_table(
        cls,
        knots: Sequence[tuple[float, float]],
        lipschitz: float | None = None,
        monotone_nondecreasing: bool | None = None,
        shape: Shape | str = Shape.GENERAL,
    ) -> "Payoff":
        """Table payoff; undeclared L and monotonicity are read off the knots."""
        xs = np.array([float(p) for p, _ in knots])
        ys = np.array([float(v) for _, v in knots])
        if lipschitz is None:
            slopes = np.abs(np.diff(ys) / np.diff(xs)) if len(xs) > 1 else np.zeros(1)
            lipschitz = float(max(slopes.max(), 1e-12))
        if monotone_nondecreasing is None:
            monotone_nondecreasing = bool(np.all(np.diff(ys) >= 0))
        return cls(
            PayoffKind.TABLE, (), tuple(zip(xs.tolist(), ys.tolist())),
            lipschitz=lipschitz, monotone_nondecreasing=monotone_nondecreasing, shape=Shape(shape),
        )

    # -- evaluation ---------------------------------------------------
    @property
    def is_linear(self) -> bool:
        return self.kind is PayoffKind.FORWARD

    @property
    def is_convex(self) -> bool:
        return self.shape is Shape.CONVEX or self.is_linear

    @property
    def is_concave(self) -> bool:
        return self.shape is Shape.CONCAVE or self.is_linear

    def kinks(self) -> tuple[float, ...]:
        """Prices where the piecewise-linear payoff changes slope."""
        if self.kind is PayoffKind.FORWARD:
            return ()
        if self.kind in (PayoffKind.CALL, PayoffKind.PUT, PayoffKind.STRADDLE):
            return self.strikes
        return tuple(float(x) for x in self._xs)

    def __call__(self, price):
        """Vectorised evaluation; no domain check (engines pass positive prices)."""
        x = np.asarray(price, dtype=float)
        kind = self.kind
        if kind is PayoffKind.CALL:
            out = np.maximum(x - self.strikes[0], 0.0)
        elif kind is PayoffKind.PUT:
            out = np.maximum(self.strikes[0] - x, 0.0)
        elif kind is PayoffKind.FORWARD:
            out = x - self.strikes[0]
        elif kind is PayoffKind.STRADDLE:
            out = np.abs(x - self.strikes[0])
        else:
            out = np.interp(x, self._xs, self._ys)
        if out.ndim == 0:
            return float(out)
        return out

    def eval(self, price: float) -> float:
        if not price >= 0:
            raise DomainError(f"payoff evaluated at negative price {price}")
        return float(self(price))


def evaluate(payoff: Payoff, price: float) -> float:
    return payoff.eval(price)


@dataclass(frozen=True)
class Violation:
    kind: str  # "lipschitz" | "monotone" | "convex" | "concave"
    witness: tuple[float, ...]
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    probes: int
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def of_kind(self, kind: str) -> list[Violation]:
        return [v for v in self.violations if v.kind == kind]


def validate_metadata(
    payoff: Payoff,
    probe_count: int,
    price_range: tuple[float, float] | None = None,
    rtol: float = 1e-9,
) -> ValidationReport:
    """Spot-check the declared Lipschitz constant, monotonicity and shape.

    Probes ``probe_count`` evenly spaced prices on ``price_range`` plus every
    kink inside it, and reports the first witness of each violated
    declaration. Never raises on a bad payoff and never mutates it.
    """
    if probe_count < 2:
        raise ValidationError("probe_count must be at least 2")
    if price_range is None:
        kinks = payoff.kinks() or (1.0,)
        price_range = (0.0, 2.0 * max(kinks))
    lo, hi = price_range
    if not 0 <= lo < hi:
        raise ValidationError(f"bad price range {price_range}")
    xs = np.linspace(lo, hi, probe_count)
    inside = [k for k in payoff.kinks() if lo < k < hi]
    xs = np.unique(np.concatenate([xs, inside]))
    ys = payoff(xs)
    dx = np.diff(xs)
    dy = np.diff(ys)
    scale = max(1.0, float(np.max(np.abs(ys))))
    violations: list[Violation] = []

    slopes = dy / dx
    bad = np.flatnonzero(np.abs(slopes) > payoff.lipschitz * (1 + rtol) + rtol)
    if bad.size:
        i = int(bad[np.argmax(np.abs(slopes[bad]))])
        violations.append(Violation(
            "lipschitz", (float(xs[i]), float(xs[i + 1])),
            f"slope {abs(slopes[i]):.6g} exceeds declared L={payoff.lipschitz:.6g}",
        ))

    if payoff.monotone_nondecreasing:
        bad = np.flatnonzero(dy < -rtol * scale)
        if bad.size:
            i = int(bad[0])
            violations.append(Violation(
                "monotone", (float(xs[i]), float(xs[i + 1])),
                f"g decreases from {ys[i]:.6g} to {ys[i + 1]:.6g}",
            ))

    if payoff.shape is not Shape.GENERAL and len(xs) >= 3:
        # chord value at the middle point of each consecutive triple
        w = dx[:-1] / (xs[2:] - xs[:-2])
        chord = (1 - w) * ys[:-2] + w * ys[2:]
        gap = ys[1:-1] - chord
        tol = rtol * scale
        bad = np.flatnonzero(gap > tol) if payoff.shape is Shape.CONVEX else np.flatnonzero(gap < -tol)
        if bad.size:
            i = int(bad[0])
            violations.append(Violation(
                payoff.shape.value, (float(xs[i]), float(xs[i + 1]), float(xs[i + 2])),
                f"middle value {ys[i + 1]:.6g} vs chord {chord[i]:.6g}",
            ))

    return ValidationReport(probes=len(xs), violations=tuple(violations))
