"""Multinomial-tree approximation for general Lipschitz payoffs.

Nature's continuous return interval is replaced by an arithmetic grid with
step epsilon, and the game is solved by backward induction with an exact
single-round solve per node. Restricting nature can only lower the upper
bound, so the result undershoots the true bound by at most O(sqrt(eps) L tau S0).

Two engines share the recursion:

* ``EXACT`` walks every reachable price. For uniform sets states recombine by
  the multiset of chosen return indices; non-uniform sets are path-keyed.
* ``GRID`` carries the value function on a log-spaced price grid and linearly
  interpolates it, which keeps the cost polynomial for any tau.
"""

from __future__ import annotations

import enum
import math
from bisect import insort
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Sequence, Union

import numpy as np

from .equilibrium import DiscreteSupport, SingleRoundSolution, envelope_values, solve_lower, solve_upper
from .errors import SizeLimit, ValidationError
from .lattice import GameSpec

EPSILON_CONSTANT = 1.0 / 8.0
GRID_FACTOR = 4
_SNAP = 1e-12
_CHUNK = 4096


class Engine(str, enum.Enum):
    EXACT = "exact"
    GRID = "grid"


@dataclass(frozen=True)
class DiscretizedSet:
    epsilon: float
    returns: tuple[float, ...]

    @property
    def size(self) -> int:
        return len(self.returns)

    @property
    def zeta_lower(self) -> float:
        return -self.returns[0]

    @property
    def zeta_upper(self) -> float:
        return self.returns[-1]


def discretize(zeta_lower: float, zeta_upper: float, epsilon: float) -> DiscretizedSet:
    """Returns {-zl, -zl + eps, ...} with zu appended when the grid misses it.

    Points are generated as ``k * eps - zl`` so that halving epsilon yields a
    superset in floating point as well.
    """
    if not (zeta_lower > 0 and zeta_upper > 0):
        raise ValidationError("interval bounds must be positive")
    width = zeta_lower + zeta_upper
    if not 0 < epsilon < width:
        raise ValidationError(
            f"epsilon={epsilon} must lie in (0, zeta_lower + zeta_upper = {width}); "
            "the discretization would be degenerate"
        )
    n = int(math.floor(width / epsilon + 1e-9))
    snap = _SNAP * max(1.0, width)
    pts = []
    for k in range(n + 1):
        r = k * epsilon - zeta_lower
        if abs(r) <= snap:
            r = 0.0
        if abs(r - zeta_upper) <= snap:
            r = zeta_upper
        pts.append(r)
    if pts[-1] < zeta_upper:
        pts.append(zeta_upper)
    return DiscretizedSet(float(epsilon), tuple(pts))


def epsilon_for_target(delta: float, lipschitz: float, tau: int, c: float = EPSILON_CONSTANT) -> float:
    """Step that targets an additive error of delta * S0: c * delta^2 / (L^2 tau^2)."""
    if not (delta > 0 and lipschitz > 0 and tau >= 1):
        raise ValidationError("delta, L must be positive and tau >= 1")
    return c * delta**2 / (lipschitz**2 * tau**2)


def delta_budget(epsilon: float, lipschitz: float, tau: int, s0: float, c: float = EPSILON_CONSTANT) -> float:
    """Inverse of :func:`epsilon_for_target`, in currency: delta * S0."""
    return lipschitz * tau * math.sqrt(epsilon / c) * s0


@dataclass
class ValueGrid:
    """Value function of one round on increasing log-prices.

    ``h`` is the log spacing for the grid engine and ``None`` for the exact
    engine, whose points are the (irregular) reachable prices.
    """

    round: int
    log_prices: np.ndarray
    values: np.ndarray
    h: float | None = None

    @property
    def prices(self) -> np.ndarray:
        return np.exp(self.log_prices)

    def max_slope(self) -> float:
        x = self.prices
        if x.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.values)) / np.diff(x)))

    def is_nondecreasing(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.values) >= -tol * max(1.0, float(np.max(np.abs(self.values))))))


@dataclass(frozen=True)
class ExactLimits:
    max_tau: int = 6
    max_support: int = 12
    max_states: int = 2_000_000


@dataclass
class ApproximationResult:
    price: float
    hedge: float
    engine: Engine
    epsilon: float
    delta_budget: float
    solution: SingleRoundSolution | None = None
    grids: list[ValueGrid] | None = None

    def to_dict(self) -> dict:
        return {
            "price": self.price,
            "hedge": self.hedge,
            "engine": self.engine.value,
            "epsilon": self.epsilon,
            "delta_budget": self.delta_budget,
        }


SetsArg = Union[DiscretizedSet, Sequence[DiscretizedSet], float]


def per_round_sets(spec: GameSpec, sets: SetsArg) -> list[DiscretizedSet]:
    """Normalise ``sets`` to one DiscretizedSet per round and check it fits ``spec``."""
    if isinstance(sets, (int, float)):
        out = [discretize(zl, zu, float(sets)) for zl, zu in zip(spec.zeta_lower, spec.zeta_upper)]
    elif isinstance(sets, DiscretizedSet):
        out = [sets] * spec.tau
    else:
        out = list(sets)
        if len(out) != spec.tau:
            raise ValidationError(f"expected {spec.tau} per-round sets, got {len(out)}")
    eps = {s.epsilon for s in out}
    if len(eps) != 1:
        raise ValidationError("epsilon must be the same in every round")
    for t, (s, zl, zu) in enumerate(zip(out, spec.zeta_lower, spec.zeta_upper)):
        if abs(s.returns[0] + zl) > 1e-12 or abs(s.returns[-1] - zu) > 1e-12:
            raise ValidationError(
                f"round {t + 1} set spans [{s.returns[0]}, {s.returns[-1]}], spec says [{-zl}, {zu}]"
            )
    return out


# -- shared backward induction ------------------------------------------------

@dataclass
class Induction:
    """Raw output of :func:`backward_induction` (used by the American engine)."""

    solution: SingleRoundSolution
    price: float
    grids: list[ValueGrid]
    exercise: list[np.ndarray] = field(default_factory=list)


def _root_solve(returns: Sequence[float], values: np.ndarray, lower: bool) -> SingleRoundSolution:
    support = DiscreteSupport(tuple(returns), tuple(float(v) for v in values))
    return solve_lower(support) if lower else solve_upper(support)


def _apply_exercise(cont: np.ndarray, intrinsic: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Ties resolve to continuation; the tolerance absorbs chord round-off.
    tol = 1e-12 * np.maximum(1.0, np.abs(cont))
    ex = intrinsic > cont + tol
    return np.where(ex, intrinsic, cont), ex


def _envelope_rows(returns: np.ndarray, vals: np.ndarray, lower: bool, threads: int) -> np.ndarray:
    n = vals.shape[0]
    if n <= _CHUNK or threads <= 1:
        chunks = [vals[i:i + _CHUNK] for i in range(0, n, _CHUNK)] or [vals]
        return np.concatenate([envelope_values(returns, c, lower) for c in chunks])
    bounds = list(range(0, n, _CHUNK)) + [n]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(lambda ab: envelope_values(returns, vals[ab[0]:ab[1]], lower), zip(bounds, bounds[1:]))
        return np.concatenate(list(parts))


def backward_induction(
    spec: GameSpec,
    sets: SetsArg,
    engine: Engine | str = Engine.GRID,
    *,
    lower: bool = False,
    exercise: bool = False,
    limits: ExactLimits | None = None,
    grid_factor: int = GRID_FACTOR,
    threads: int = 1,
) -> Induction:
    engine = Engine(engine)
    rounds = per_round_sets(spec, sets)
    if engine is Engine.EXACT:
        return _exact(spec, rounds, lower, exercise, limits or ExactLimits())
    return _grid(spec, rounds, lower, exercise, grid_factor, threads)


def _exact_levels(spec: GameSpec, rounds: list[DiscretizedSet], limits: ExactLimits):
    """Reachable prices per level and child indices into the next level."""
    tau = spec.tau
    b = max(s.size for s in rounds)
    if tau > limits.max_tau or b > limits.max_support:
        raise SizeLimit(
            f"exact engine limited to tau <= {limits.max_tau} and support <= {limits.max_support} "
            f"(got tau={tau}, support={b})"
        )
    s0 = spec.s0
    if spec.is_uniform:
        factors = [1.0 + r for r in rounds[0].returns]
        b = len(factors)
        if math.comb(tau + b - 1, b - 1) > limits.max_states:
            raise SizeLimit(f"exact engine would need more than {limits.max_states} states")
        keys = [list(combinations_with_replacement(range(b), t)) for t in range(tau + 1)]
        prices = [np.array([s0 * math.prod(factors[i] for i in m) for m in level]) for level in keys]
        children = []
        for t in range(tau):
            index = {m: j for j, m in enumerate(keys[t + 1])}
            kids = np.empty((len(keys[t]), b), dtype=np.int64)
            for j, m in enumerate(keys[t]):
                for i in range(b):
                    child = list(m)
                    insort(child, i)
                    kids[j, i] = index[tuple(child)]
            children.append(kids)
        return prices, children

    total = math.prod(s.size for s in rounds)
    if total > limits.max_states:
        raise SizeLimit(f"non-uniform exact engine would need {total} > {limits.max_states} leaves")
    prices = [np.array([s0])]
    children = []
    for s in rounds:
        x = prices[-1]
        factors = 1.0 + np.asarray(s.returns)
        prices.append((x[:, None] * factors[None, :]).ravel())
        children.append(np.arange(x.size * s.size).reshape(x.size, s.size))
    return prices, children


def _sorted_unique(x: np.ndarray) -> np.ndarray:
    """Index array that sorts x and drops repeated prices."""
    order = np.argsort(x, kind="stable")
    keep = np.concatenate([[True], np.diff(x[order]) > 0])
    return order[keep]


def _to_value_grid(t: int, x: np.ndarray, v: np.ndarray, h: float | None) -> ValueGrid:
    sel = _sorted_unique(x)
    return ValueGrid(t, np.log(x[sel]), v[sel], h)


def _exact(spec, rounds, lower, exercise, limits) -> Induction:
    g = spec.payoff
    prices, children = _exact_levels(spec, rounds, limits)
    tau = spec.tau
    values = g(prices[tau])
    grids = [_to_value_grid(tau, prices[tau], values, None)]
    flags = [np.ones(grids[0].values.size, dtype=bool)] if exercise else []
    for t in range(tau - 1, 0, -1):
        r = np.asarray(rounds[t].returns)
        cont = envelope_values(r, values[children[t]], lower)
        if exercise:
            cont, ex = _apply_exercise(cont, g(prices[t]))
            flags.append(ex[_sorted_unique(prices[t])])
        values = cont
        grids.append(_to_value_grid(t, prices[t], values, None))
    sol = _root_solve(rounds[0].returns, values[children[0][0]], lower)
    price = sol.price
    if exercise:
        intrinsic = float(g(spec.s0))
        price, ex = _apply_exercise(np.array([price]), np.array([intrinsic]))
        price = float(price[0])
        flags.append(ex)
    grids.append(ValueGrid(0, np.array([math.log(spec.s0)]), np.array([price]), None))
    grids.reverse()
    flags.reverse()
    return Induction(sol, price, grids, flags)


def grid_indices(spec: GameSpec, rounds: Sequence[DiscretizedSet], h: float) -> list[np.ndarray]:
    """Integer log-grid indices per round (price = S0 * exp(k h)).

    Round t covers every price reachable after t moves plus t + 2 cells of
    padding, so values feeding the root never touch the constant
    extrapolation at the grid edges.
    """
    lo = hi = 0.0
    out = [np.arange(-2, 3)]
    for t, s in enumerate(rounds, start=1):
        lo += math.log1p(s.returns[0])
        hi += math.log1p(s.returns[-1])
        pad = t + 2
        out.append(np.arange(math.floor(lo / h) - pad, math.ceil(hi / h) + pad + 1))
    return out


def interpolate_next(x: np.ndarray, returns: np.ndarray, next_prices: np.ndarray, next_values: np.ndarray) -> np.ndarray:
    """Next-round values at x * (1 + r), linear in price between grid points."""
    query = x[:, None] * (1.0 + returns[None, :])
    return np.interp(query.ravel(), next_prices, next_values).reshape(query.shape)


def _next_values(t, tau, payoff, x, returns, next_prices, next_values):
    # The terminal value function is the payoff itself: evaluate it exactly.
    if t + 1 == tau:
        return payoff(x[:, None] * (1.0 + returns[None, :]))
    return interpolate_next(x, returns, next_prices, next_values)


def _grid(spec, rounds, lower, exercise, grid_factor, threads) -> Induction:
    g = spec.payoff
    tau = spec.tau
    h = rounds[0].epsilon / grid_factor
    ks = grid_indices(spec, rounds, h)
    prices = [spec.s0 * np.exp(k * h) for k in ks]
    values = g(prices[tau])
    grids = [ValueGrid(tau, math.log(spec.s0) + ks[tau] * h, values, h)]
    flags = [np.ones(values.size, dtype=bool)] if exercise else []
    for t in range(tau - 1, 0, -1):
        r = np.asarray(rounds[t].returns)
        nxt = _next_values(t, tau, g, prices[t], r, prices[t + 1], values)
        cont = _envelope_rows(r, nxt, lower, threads)
        if exercise:
            cont, ex = _apply_exercise(cont, g(prices[t]))
            flags.append(ex)
        values = cont
        grids.append(ValueGrid(t, math.log(spec.s0) + ks[t] * h, values, h))
    r0 = np.asarray(rounds[0].returns)
    root_row = _next_values(0, tau, g, np.array([spec.s0]), r0, prices[1], values)[0]
    sol = _root_solve(rounds[0].returns, root_row, lower)
    price = sol.price
    if exercise:
        p, ex = _apply_exercise(np.array([price]), np.array([float(g(spec.s0))]))
        price = float(p[0])
        flags.append(ex)
    grids.append(ValueGrid(0, np.array([math.log(spec.s0)]), np.array([price]), h))
    grids.reverse()
    flags.reverse()
    return Induction(sol, price, grids, flags)


def _result(spec, rounds_arg, engine, ind: Induction, keep_grids: bool) -> ApproximationResult:
    eps = per_round_sets(spec, rounds_arg)[0].epsilon
    budget = delta_budget(eps, spec.payoff.lipschitz, spec.tau, spec.s0)
    return ApproximationResult(
        price=ind.price,
        hedge=ind.solution.hedge,
        engine=Engine(engine),
        epsilon=eps,
        delta_budget=budget,
        solution=ind.solution,
        grids=ind.grids if keep_grids else None,
    )


def price_upper(
    spec: GameSpec,
    sets: SetsArg,
    engine: Engine | str = Engine.GRID,
    *,
    limits: ExactLimits | None = None,
    keep_grids: bool = False,
    grid_factor: int = GRID_FACTOR,
    threads: int = 1,
) -> ApproximationResult:
    """Upper bound of the discretized game (never above the continuous one)."""
    ind = backward_induction(spec, sets, engine, limits=limits, grid_factor=grid_factor, threads=threads)
    return _result(spec, sets, engine, ind, keep_grids)


def price_lower(
    spec: GameSpec,
    sets: SetsArg,
    engine: Engine | str = Engine.GRID,
    *,
    limits: ExactLimits | None = None,
    keep_grids: bool = False,
    grid_factor: int = GRID_FACTOR,
    threads: int = 1,
) -> ApproximationResult:
    """Lower bound of the discretized game; mirror of :func:`price_upper`."""
    ind = backward_induction(
        spec, sets, engine, lower=True, limits=limits, grid_factor=grid_factor, threads=threads
    )
    return _result(spec, sets, engine, ind, keep_grids)
