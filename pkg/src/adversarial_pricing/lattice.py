"""Two-point (binomial) fast paths for convex and concave payoffs.

With a convex payoff nature's best reply at every node puts all its mass on
the two interval endpoints, so the upper bound is an ordinary binomial tree
expectation under the per-round zero-mean measure on {-zl, zu}. Concave
payoffs mirror this for the lower bound.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .errors import DomainError, ShapeMismatch, SizeLimit, ValidationError
from .payoff import Payoff, PayoffKind

NONUNIFORM_MAX_TAU = 22


@dataclass(frozen=True)
class GameSpec:
    """A tau-round game: per-round return intervals [-zeta_lower[t], zeta_upper[t]]."""

    s0: float
    tau: int
    zeta_lower: tuple[float, ...]
    zeta_upper: tuple[float, ...]
    payoff: Payoff

    def __post_init__(self) -> None:
        tau = int(self.tau)
        if tau < 1 or tau != self.tau:
            raise ValidationError(f"tau must be a positive integer, got {self.tau}")
        if not (np.isfinite(self.s0) and self.s0 > 0):
            raise ValidationError(f"s0 must be positive, got {self.s0}")
        zl = _broadcast(self.zeta_lower, tau, "zeta_lower")
        zu = _broadcast(self.zeta_upper, tau, "zeta_upper")
        for t, (a, b) in enumerate(zip(zl, zu)):
            if not 0 < a < 1:
                raise ValidationError(f"zeta_lower[{t}]={a} must lie in (0, 1)")
            if not b > 0:
                raise ValidationError(f"zeta_upper[{t}]={b} must be positive")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "s0", float(self.s0))
        object.__setattr__(self, "zeta_lower", zl)
        object.__setattr__(self, "zeta_upper", zu)

    @classmethod
    def uniform(cls, s0: float, tau: int, zeta_lower: float, zeta_upper: float, payoff: Payoff) -> "GameSpec":
        return cls(s0, tau, (zeta_lower,) * tau, (zeta_upper,) * tau, payoff)

    @property
    def is_uniform(self) -> bool:
        return len(set(self.zeta_lower)) == 1 and len(set(self.zeta_upper)) == 1


def _broadcast(z, tau: int, name: str) -> tuple[float, ...]:
    if np.isscalar(z):
        return (float(z),) * tau
    z = tuple(float(v) for v in z)
    if len(z) != tau:
        raise ValidationError(f"{name} has {len(z)} entries, expected tau={tau}")
    return z


@dataclass
class HedgeSchedule:
    """Delta_t (currency amount held over round t) at each reachable node.

    Keys are ``(t, node)`` with t = 1..tau the round the hedge is held for and
    ``node`` the state before the move: the up-move count for a recombining
    tree, or the path bits (first move most significant, 1 = up) otherwise.
    Values are ``(node_price, delta)``.
    """

    recombining: bool
    nodes: dict[tuple[int, int], tuple[float, float]] = field(default_factory=dict)

    def deltas_along(self, ups: Sequence[bool]) -> list[float]:
        out = []
        node = 0
        for t, up in enumerate(ups, start=1):
            out.append(self.nodes[(t, node)][1])
            node = node + int(up) if self.recombining else 2 * node + int(up)
        return out


def _two_point_tree(spec: GameSpec, want_hedges: bool) -> tuple[float, HedgeSchedule]:
    g = spec.payoff
    tau = spec.tau
    schedule = HedgeSchedule(recombining=spec.is_uniform)
    if spec.is_uniform:
        d, u = spec.zeta_lower[0], spec.zeta_upper[0]
        w_down, w_up = u / (d + u), d / (d + u)
        k = np.arange(tau + 1)
        prices = spec.s0 * (1 + u) ** k * (1 - d) ** (tau - k)
        values = g(prices)
        for t in range(tau - 1, -1, -1):
            if want_hedges:
                k = np.arange(t + 1)
                node_prices = spec.s0 * (1 + u) ** k * (1 - d) ** (t - k)
                deltas = (values[1:] - values[:-1]) / (d + u)
                for j in range(t + 1):
                    schedule.nodes[(t + 1, j)] = (float(node_prices[j]), float(deltas[j]))
            values = w_down * values[:-1] + w_up * values[1:]
        return float(values[0]), schedule

    if tau > NONUNIFORM_MAX_TAU:
        raise SizeLimit(
            f"non-uniform sets do not recombine; exact tree capped at tau <= {NONUNIFORM_MAX_TAU} (got {tau})"
        )
    levels = [np.array([spec.s0])]
    for t in range(tau):
        x = levels[-1]
        nxt = np.empty(2 * x.size)
        nxt[0::2] = x * (1 - spec.zeta_lower[t])
        nxt[1::2] = x * (1 + spec.zeta_upper[t])
        levels.append(nxt)
    values = g(levels[-1])
    for t in range(tau - 1, -1, -1):
        d, u = spec.zeta_lower[t], spec.zeta_upper[t]
        down, up = values[0::2], values[1::2]
        if want_hedges:
            deltas = (up - down) / (d + u)
            for j in range(deltas.size):
                schedule.nodes[(t + 1, j)] = (float(levels[t][j]), float(deltas[j]))
        values = (u / (d + u)) * down + (d / (d + u)) * up
    return float(values[0]), schedule


def binomial_upper(spec: GameSpec) -> tuple[float, HedgeSchedule]:
    """Upper bound and replicating hedges for a convex payoff."""
    if not spec.payoff.is_convex:
        raise ShapeMismatch("binomial_upper needs a convex payoff; use the multinomial engine")
    return _two_point_tree(spec, want_hedges=True)


def concave_upper(spec: GameSpec) -> float:
    if not spec.payoff.is_concave:
        raise ShapeMismatch("concave_upper needs a concave payoff")
    return spec.payoff.eval(spec.s0)


def bound_lower(spec: GameSpec) -> float:
    """Lower bound: g(S0) for convex payoffs, the two-point tree for concave ones."""
    if spec.payoff.is_convex:
        return spec.payoff.eval(spec.s0)
    if spec.payoff.is_concave:
        return _two_point_tree(spec, want_hedges=False)[0]
    raise ShapeMismatch("bound_lower needs a convex or concave payoff; use the multinomial engine")


def black_scholes(s0: float, payoff: Payoff, nu: float) -> float:
    """Zero-rate Black-Scholes value E[g(s0 * exp(sqrt(nu) Z - nu / 2))]."""
    if not nu > 0:
        raise DomainError(f"total variance must be positive, got {nu}")
    if not s0 > 0:
        raise DomainError(f"s0 must be positive, got {s0}")
    sd = math.sqrt(nu)
    if payoff.kind in (PayoffKind.CALL, PayoffKind.PUT):
        k = payoff.strikes[0]
        d1 = (math.log(s0 / k) + nu / 2) / sd
        d2 = d1 - sd
        if payoff.kind is PayoffKind.CALL:
            return float(s0 * norm.cdf(d1) - k * norm.cdf(d2))
        return float(k * norm.cdf(-d2) - s0 * norm.cdf(-d1))
    if payoff.kind is PayoffKind.FORWARD:
        return s0 - payoff.strikes[0]
    return lognormal_expectation(s0, payoff, nu)


def lognormal_expectation(s0: float, payoff: Payoff, nu: float, tol: float = 1e-10) -> float:
    """Adaptive quadrature of the lognormal expectation, split at payoff kinks."""
    sd = math.sqrt(nu)

    def integrand(z: float) -> float:
        return float(payoff(s0 * math.exp(sd * z - nu / 2))) * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)

    # Lipschitz payoffs grow at most like exp(sd * z); the Gaussian tail past
    # 12 + sd standard deviations is below 1e-19 of the total.
    z_max = 12.0 + sd
    cuts = sorted((math.log(k / s0) + nu / 2) / sd for k in payoff.kinks())
    edges = [-z_max, *[c for c in cuts if -z_max < c < z_max], z_max]
    total = 0.0
    for a, b in zip(edges, edges[1:]):
        if b <= a:
            continue
        val, _ = integrate.quad(integrand, a, b, epsabs=tol, epsrel=1e-12, limit=200)
        total += val
    return total


@dataclass(frozen=True)
class ScanRow:
    tau: int
    game_price: float
    bs_price: float
    abs_gap: float
    rel_gap: float


def convergence_scan(
    s0: float,
    payoff: Payoff,
    zeta_lower: float,
    zeta_upper: float,
    tau_list: Iterable[int],
) -> list[ScanRow]:
    """Binomial upper bound with per-step sets [-zl/sqrt(tau), zu/sqrt(tau)] vs Black-Scholes."""
    taus = [int(t) for t in tau_list]
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValidationError("tau_list must be strictly increasing")
    bs = black_scholes(s0, payoff, zeta_lower * zeta_upper)
    rows = []
    for tau in taus:
        root = math.sqrt(tau)
        spec = GameSpec.uniform(s0, tau, zeta_lower / root, zeta_upper / root, payoff)
        price, _ = _scan_price(spec)
        gap = abs(price - bs)
        rel = gap / abs(bs) if bs != 0 else (0.0 if gap == 0 else math.inf)
        rows.append(ScanRow(tau, price, bs, gap, rel))
    return rows


def _scan_price(spec: GameSpec) -> tuple[float, HedgeSchedule]:
    if not spec.payoff.is_convex:
        raise ShapeMismatch("convergence_scan needs a convex payoff")
    return _two_point_tree(spec, want_hedges=False)


def scan_to_csv(rows: Sequence[ScanRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tau", "game_price", "bs_price", "abs_gap", "rel_gap"])
    for r in rows:
        writer.writerow([r.tau] + [f"{v:.12g}" for v in (r.game_price, r.bs_price, r.abs_gap, r.rel_gap)])
    return buf.getvalue()
