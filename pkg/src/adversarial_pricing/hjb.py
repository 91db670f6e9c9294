"""Finite-difference solver for the uncertain-volatility limit equation.

    G_t + 1/2 * nu_bar * x^2 G_xx * 1{G_xx >= 0} = 0,   G(T, x) = g(x)

solved backward in time with an explicit scheme in y = ln x, where
x^2 G_xx = G_yy - G_y. Where the value is locally convex it diffuses like
Black-Scholes with variance rate nu_bar = zeta_lower * zeta_upper; where it
is concave nature prefers to stand still and G does not move.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ValidationError
from .payoff import Payoff

WIDTH_SIGMAS = 6.0


@dataclass
class PdeGrid:
    log_prices: np.ndarray
    dy: float
    dt: float
    horizon: float
    nu_bar: float
    times: np.ndarray
    values: np.ndarray  # shape (len(times), len(log_prices))
    boundary_warning: bool = False

    @property
    def prices(self) -> np.ndarray:
        return np.exp(self.log_prices)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "x", "G"])
        x = self.prices
        for t, row in zip(self.times, self.values):
            for xi, gi in zip(x, row):
                writer.writerow([f"{t:.12g}", f"{xi:.12g}", f"{gi:.12g}"])
        return buf.getvalue()


def hjb_solve(
    s0: float,
    payoff: Payoff,
    zeta_lower: float,
    zeta_upper: float,
    horizon: float,
    *,
    dy: float = 0.005,
    half_width: float | None = None,
    cfl: float = 0.9,
    dt: float | None = None,
    snapshots: int = 11,
) -> tuple[float, PdeGrid]:
    """Value G(0, s0) and the stored surface.

    The log-price grid is centred on ln s0 (so s0 is a node) with half-width
    ``half_width`` (default 6 standard deviations of ln S_T at the cap
    volatility). ``dt`` defaults to ``cfl * dy**2 / nu_bar`` rounded down so
    that an integer number of steps lands exactly on t = 0.
    """
    if not (s0 > 0 and horizon > 0 and zeta_lower > 0 and zeta_upper > 0):
        raise ValidationError("s0, horizon and interval bounds must be positive")
    if not dy > 0:
        raise ValidationError("dy must be positive")
    nu_bar = zeta_lower * zeta_upper
    spread = math.sqrt(nu_bar * horizon)
    if half_width is None:
        half_width = WIDTH_SIGMAS * spread + 2 * dy
    warn = half_width < WIDTH_SIGMAS * spread

    limit = dy * dy / nu_bar
    if dt is None:
        dt = cfl * limit
    if dt > limit * (1 + 1e-12):
        raise ConfigurationError(f"explicit scheme unstable: dt={dt:.3g} exceeds dy^2/nu_bar={limit:.3g}")
    n_steps = max(1, math.ceil(horizon / dt))
    dt = horizon / n_steps

    n_side = math.ceil(half_width / dy)
    k = np.arange(-n_side, n_side + 1)
    y = math.log(s0) + k * dy
    x = np.exp(y)
    G = np.asarray(payoff(x), dtype=float).copy()
    centre = n_side

    snap_every = max(1, n_steps // max(1, snapshots - 1))
    times = [horizon]
    surface = [G.copy()]
    coef = 0.5 * nu_bar * dt
    for step in range(1, n_steps + 1):
        d2 = (G[2:] - 2 * G[1:-1] + G[:-2]) / (dy * dy)
        d1 = (G[2:] - G[:-2]) / (2 * dy)
        curvature = d2 - d1  # x^2 G_xx
        G[1:-1] += coef * np.maximum(curvature, 0.0)
        # zero price-space curvature at the edges: linear continuation in x
        G[0] = G[1] + (G[2] - G[1]) * (x[0] - x[1]) / (x[2] - x[1])
        G[-1] = G[-2] + (G[-2] - G[-3]) * (x[-1] - x[-2]) / (x[-2] - x[-3])
        if step % snap_every == 0 or step == n_steps:
            times.append(horizon - step * dt)
            surface.append(G.copy())

    grid = PdeGrid(
        log_prices=y, dy=dy, dt=dt, horizon=horizon, nu_bar=nu_bar,
        times=np.array(times), values=np.array(surface), boundary_warning=warn,
    )
    return float(G[centre]), grid
