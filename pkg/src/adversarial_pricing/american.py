"""American exercise on top of the multinomial recursion.

For the upper bound nature also holds the exercise right, and the exercise
choice can be pulled out of the single-round min-max, so each node is worth
max(continuation envelope value, g(x)). For the lower bound the trader holds
the right, giving max(g(x), lower-envelope continuation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import GameSpec
from .multinomial import (
    Engine,
    ExactLimits,
    GRID_FACTOR,
    Induction,
    SetsArg,
    backward_induction,
    per_round_sets,
)


@dataclass
class AmericanResult:
    price: float
    hedge: float
    exercise_region: list[tuple[int, float, float]]
    engine: Engine
    epsilon: float

    def exercise_rounds(self) -> set[int]:
        return {t for t, _, _ in self.exercise_region}

    def to_dict(self) -> dict:
        return {
            "price": self.price,
            "hedge": self.hedge,
            "engine": self.engine.value,
            "epsilon": self.epsilon,
            "exercise_region": [list(r) for r in self.exercise_region],
        }


def _regions(ind: Induction) -> list[tuple[int, float, float]]:
    """Maximal runs of exercise-optimal grid points as (round, price_lo, price_hi)."""
    out = []
    for grid, flags in zip(ind.grids, ind.exercise):
        x = grid.prices
        idx = np.flatnonzero(flags)
        if idx.size == 0:
            continue
        breaks = np.flatnonzero(np.diff(idx) > 1)
        starts = np.concatenate([[idx[0]], idx[breaks + 1]])
        ends = np.concatenate([idx[breaks], [idx[-1]]])
        out.extend((grid.round, float(x[a]), float(x[b])) for a, b in zip(starts, ends))
    return out


def _run(spec, sets, engine, lower, limits, grid_factor, threads) -> AmericanResult:
    ind = backward_induction(
        spec, sets, engine, lower=lower, exercise=True,
        limits=limits, grid_factor=grid_factor, threads=threads,
    )
    eps = per_round_sets(spec, sets)[0].epsilon
    return AmericanResult(ind.price, ind.solution.hedge, _regions(ind), Engine(engine), eps)


def american_upper(
    spec: GameSpec,
    sets: SetsArg,
    engine: Engine | str = Engine.GRID,
    *,
    limits: ExactLimits | None = None,
    grid_factor: int = GRID_FACTOR,
    threads: int = 1,
) -> AmericanResult:
    return _run(spec, sets, engine, False, limits, grid_factor, threads)


def american_lower(
    spec: GameSpec,
    sets: SetsArg,
    engine: Engine | str = Engine.GRID,
    *,
    limits: ExactLimits | None = None,
    grid_factor: int = GRID_FACTOR,
    threads: int = 1,
) -> AmericanResult:
    return _run(spec, sets, engine, True, limits, grid_factor, threads)
