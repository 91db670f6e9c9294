"""Price jumps layered on the adversarial game.

Random mode: with probability q the round's return is drawn from a fixed
discrete law Y instead of being chosen by nature. For convex payoffs nature
still uses only the interval endpoints, but the endpoint weights shift so
that the mixture keeps zero mean.

Adversarial mode: nature may, at most ``quota`` times, pick the return from
a wider set W instead of U. The value function grows a layer index m (jumps
left) and each node's envelope sees both point families.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from types import SimpleNamespace

import numpy as np

from .equilibrium import DiscreteSupport, SingleRoundSolution, solve_upper
from .errors import JumpFeasibility, ShapeMismatch, SizeLimit, ValidationError
from .lattice import GameSpec
from .multinomial import (
    GRID_FACTOR,
    DiscretizedSet,
    _envelope_rows,
    _next_values,
    discretize,
    grid_indices,
    per_round_sets,
)

MAX_JUMP_STATES = 2_000_000


class JumpMode(str, enum.Enum):
    RANDOM = "random"
    ADVERSARIAL = "adversarial"


@dataclass(frozen=True)
class JumpConfig:
    mode: JumpMode
    q: float = 0.0
    y_support: tuple[float, ...] = ()
    y_weights: tuple[float, ...] = ()
    w_zeta_lower: float = 0.0
    w_zeta_upper: float = 0.0
    quota: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", JumpMode(self.mode))
        object.__setattr__(self, "y_support", tuple(float(y) for y in self.y_support))
        object.__setattr__(self, "y_weights", tuple(float(w) for w in self.y_weights))
        if self.mode is JumpMode.RANDOM:
            if not 0 < self.q < 1:
                raise ValidationError(f"jump probability q={self.q} must lie in (0, 1)")
            if not self.y_support or len(self.y_support) != len(self.y_weights):
                raise ValidationError("y_support and y_weights must be non-empty and of equal length")
            if any(w < 0 for w in self.y_weights) or abs(sum(self.y_weights) - 1) > 1e-12:
                raise ValidationError("y_weights must be nonnegative and sum to 1")
            if any(y <= -1 for y in self.y_support):
                raise ValidationError("jump returns must exceed -1 to keep prices positive")
        else:
            if not (0 < self.w_zeta_lower < 1 and self.w_zeta_upper > 0):
                raise ValidationError("enlarged set needs w_zeta_lower in (0, 1) and w_zeta_upper > 0")
            if int(self.quota) != self.quota or self.quota < 0:
                raise ValidationError(f"quota must be a nonnegative integer, got {self.quota}")
            object.__setattr__(self, "quota", int(self.quota))

    @classmethod
    def random(cls, q: float, y_support, y_weights=None) -> "JumpConfig":
        y_support = tuple(y_support)
        if y_weights is None:
            y_weights = (1.0 / len(y_support),) * len(y_support)
        return cls(JumpMode.RANDOM, q=q, y_support=y_support, y_weights=tuple(y_weights))

    @classmethod
    def adversarial(cls, w_zeta_lower: float, w_zeta_upper: float, quota: int) -> "JumpConfig":
        return cls(JumpMode.ADVERSARIAL, w_zeta_lower=w_zeta_lower, w_zeta_upper=w_zeta_upper, quota=quota)

    @property
    def mean_jump(self) -> float:
        return float(np.dot(self.y_weights, self.y_support))


# -- random jumps ---------------------------------------------------------------

def jump_weights(zeta_lower: float, zeta_upper: float, jump: JumpConfig) -> tuple[float, float]:
    """Endpoint weights (on -zl, on +zu) making the jump mixture zero-mean."""
    q = jump.q
    target = -q * jump.mean_jump / (1 - q)  # mean the non-jump part must carry
    if not -zeta_lower < target < zeta_upper:
        raise JumpFeasibility(
            f"compensating mean {target:.6g} is outside (-{zeta_lower}, {zeta_upper}); "
            "no risk-neutral weights exist for this q and jump law"
        )
    w1 = (zeta_upper + q * jump.mean_jump / (1 - q)) / (zeta_lower + zeta_upper)
    return w1, 1.0 - w1


def round_mean(zeta_lower: float, zeta_upper: float, jump: JumpConfig) -> float:
    """Mean return of the full round measure; zero up to round-off."""
    w1, w2 = jump_weights(zeta_lower, zeta_upper, jump)
    return (1 - jump.q) * (w1 * -zeta_lower + w2 * zeta_upper) + jump.q * jump.mean_jump


def _round_moves(spec: GameSpec, jump: JumpConfig):
    """Per-round move returns [-zl, zu, y_1..y_k] and their probabilities."""
    q = jump.q
    out = []
    for zl, zu in zip(spec.zeta_lower, spec.zeta_upper):
        w1, w2 = jump_weights(zl, zu, jump)
        returns = (-zl, zu, *jump.y_support)
        probs = np.array([(1 - q) * w1, (1 - q) * w2, *(q * w for w in jump.y_weights)])
        out.append(SimpleNamespace(returns=returns, size=len(returns), probs=probs))
    return out


def random_jump_upper(spec: GameSpec, jump: JumpConfig, *, max_states: int = MAX_JUMP_STATES) -> float:
    """Upper bound for a convex payoff under the random jump model."""
    if jump.mode is not JumpMode.RANDOM:
        raise ValidationError("random_jump_upper needs a random-mode JumpConfig")
    if not spec.payoff.is_convex:
        raise ShapeMismatch("random jump model assumes a convex payoff; use adversarial mode for general payoffs")
    moves = _round_moves(spec, jump)
    g = spec.payoff
    tau = spec.tau

    if spec.is_uniform:
        # states recombine by the multiset of moves taken
        factors = [1.0 + r for r in moves[0].returns]
        m = len(factors)
        if math.comb(tau + m - 1, m - 1) > max_states:
            raise SizeLimit(f"random jump tree would need more than {max_states} states")
        keys = [list(combinations_with_replacement(range(m), t)) for t in range(tau + 1)]
        values = g(np.array([spec.s0 * math.prod(factors[i] for i in k) for k in keys[tau]]))
        for t in range(tau - 1, -1, -1):
            index = {k: j for j, k in enumerate(keys[t + 1])}
            kids = np.array([[index[tuple(sorted(k + (i,)))] for i in range(m)] for k in keys[t]])
            values = values[kids] @ moves[t].probs
        return float(values[0])

    total = math.prod(mv.size for mv in moves)
    if total > max_states:
        raise SizeLimit(f"non-uniform random jump tree would need {total} > {max_states} leaves")
    x = np.array([spec.s0])
    levels = [x]
    for mv in moves:
        x = (x[:, None] * (1.0 + np.asarray(mv.returns))[None, :]).ravel()
        levels.append(x)
    values = g(levels[-1])
    for t in range(tau - 1, -1, -1):
        values = values.reshape(-1, moves[t].size) @ moves[t].probs
    return float(values[0])


# -- adversarial jumps ------------------------------------------------------------

@dataclass
class AdversarialJumpResult:
    price: float
    hedge: float
    epsilon: float
    quota: int
    layer_prices: tuple[float, ...]  # root value with m = 0..quota jumps left

    def to_dict(self) -> dict:
        return {
            "price": self.price,
            "hedge": self.hedge,
            "epsilon": self.epsilon,
            "quota": self.quota,
            "layer_prices": list(self.layer_prices),
        }


def _merge_max(r_u, v_u, r_w, v_w):
    """Union of two point families, keeping the larger value at repeated returns."""
    best: dict[float, float] = {}
    for r, v in zip(list(r_u) + list(r_w), list(v_u) + list(v_w)):
        best[r] = max(v, best.get(r, -math.inf))
    rs = sorted(best)
    return tuple(rs), tuple(best[r] for r in rs)


def adversarial_jump_upper(
    spec: GameSpec,
    jump: JumpConfig,
    epsilon: float | DiscretizedSet,
    *,
    w_set: DiscretizedSet | None = None,
    grid_factor: int = GRID_FACTOR,
    threads: int = 1,
) -> AdversarialJumpResult:
    """Grid-engine value V(0, S0, quota) of the quota jump game."""
    if jump.mode is not JumpMode.ADVERSARIAL:
        raise ValidationError("adversarial_jump_upper needs an adversarial-mode JumpConfig")
    if jump.quota > spec.tau:
        raise ValidationError(f"quota={jump.quota} exceeds tau={spec.tau}")
    rounds = per_round_sets(spec, epsilon)
    eps = rounds[0].epsilon
    if w_set is None:
        w_set = discretize(jump.w_zeta_lower, jump.w_zeta_upper, eps)
    ell = jump.quota
    g = spec.payoff
    tau = spec.tau
    h = eps / grid_factor

    # Span: per round take the wider of U and W. With W inside U (or no
    # quota) this is the plain engine's grid, so the two agree bit for bit.
    if ell == 0:
        span_sets = rounds
    else:
        span_sets = [
            SimpleNamespace(returns=(min(s.returns[0], w_set.returns[0]), max(s.returns[-1], w_set.returns[-1])))
            for s in rounds
        ]
    ks = grid_indices(spec, span_sets, h)
    prices = [spec.s0 * np.exp(k * h) for k in ks]
    rw = np.asarray(w_set.returns)

    layers = [g(prices[tau]) for _ in range(ell + 1)]
    for t in range(tau - 1, 0, -1):
        ru = np.asarray(rounds[t].returns)
        x = prices[t]
        nxt_u = [_next_values(t, tau, g, x, ru, prices[t + 1], v) for v in layers]
        new = []
        for m in range(ell + 1):
            if m == 0:
                new.append(_envelope_rows(ru, nxt_u[0], False, threads))
                continue
            nxt_w = _next_values(t, tau, g, x, rw, prices[t + 1], layers[m - 1])
            both_r = np.concatenate([ru, rw])
            both_v = np.concatenate([nxt_u[m], nxt_w], axis=1)
            new.append(_envelope_rows(both_r, both_v, False, threads))
        layers = new

    root = np.array([spec.s0])
    ru0 = np.asarray(rounds[0].returns)
    sols: list[SingleRoundSolution] = []
    for m in range(ell + 1):
        vu = _next_values(0, tau, g, root, ru0, prices[1], layers[m])[0]
        if m == 0:
            rs, vs = tuple(rounds[0].returns), tuple(float(v) for v in vu)
        else:
            vw = _next_values(0, tau, g, root, rw, prices[1], layers[m - 1])[0]
            rs, vs = _merge_max(rounds[0].returns, vu, w_set.returns, vw)
        sols.append(solve_upper(DiscreteSupport(rs, vs)))
    top = sols[ell]
    return AdversarialJumpResult(top.price, top.hedge, eps, ell, tuple(s.price for s in sols))
