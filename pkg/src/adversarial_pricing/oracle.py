"""Slow, independent reference implementations.

Everything here works on the primal side: the two-variable LP
    min p  s.t.  p + r_i * Delta >= v_i
is solved by enumerating every pair of constraints, intersecting them and
keeping the cheapest feasible vertex. No code is shared with the envelope
solver in ``equilibrium`` so that agreement between the two is evidence.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .equilibrium import DiscreteSupport, RiskNeutralMeasure, SingleRoundSolution
from .errors import NoRiskNeutralMeasure, SizeLimit
from .lattice import GameSpec
from .multinomial import DiscretizedSet
from .payoff import Payoff

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class OracleLimits:
    max_tau_policy: int = 3
    max_tau: int = 6
    max_support: int = 12
    max_policy_support: int = 4


def _check(tau: int, b: int, max_tau: int, max_b: int) -> None:
    if tau > max_tau or b > max_b:
        raise SizeLimit(f"oracle limited to tau <= {max_tau}, support <= {max_b} (got tau={tau}, support={b})")


# -- single-round LP ----------------------------------------------------------------

def _lp_rows(returns: np.ndarray, values: np.ndarray, floor: np.ndarray | None = None) -> np.ndarray:
    """Optimal p for each row of ``values`` by vertex enumeration.

    ``floor`` adds the horizontal constraint p >= floor (immediate exercise).
    """
    r = np.asarray(returns, dtype=float)
    v = np.atleast_2d(np.asarray(values, dtype=float))
    if not (np.any(r < 0) and np.any(r > 0)):
        raise NoRiskNeutralMeasure("constraints never straddle 0: the hedging LP is unbounded below")
    n, b = v.shape
    cand_p, cand_d = [], []
    for i, j in itertools.combinations(range(b), 2):
        if r[i] == r[j]:
            continue
        d = (v[:, j] - v[:, i]) / (r[j] - r[i])
        cand_d.append(d)
        cand_p.append(v[:, i] - r[i] * d)
    if floor is not None:
        fl = np.broadcast_to(np.asarray(floor, dtype=float), (n,))
        for i in range(b):
            if r[i] == 0:
                continue
            d = (v[:, i] - fl) / r[i]
            cand_d.append(d)
            cand_p.append(fl.copy())
    P = np.stack(cand_p, axis=1)  # (n, k)
    D = np.stack(cand_d, axis=1)
    slack = P[:, :, None] + r[None, None, :] * D[:, :, None] - v[:, None, :]
    ok = np.all(slack >= -FEAS_TOL, axis=2)
    if floor is not None:
        ok &= P >= fl[:, None] - FEAS_TOL
    P = np.where(ok, P, np.inf)
    return P.min(axis=1)


def lp_exact(support: DiscreteSupport) -> SingleRoundSolution:
    """Cheapest superhedge price over all feasible constraint-pair vertices."""
    r = support.returns
    v = support.values
    best = None
    for i, j in itertools.combinations(range(len(r)), 2):
        d = (v[j] - v[i]) / (r[j] - r[i])
        p = v[i] - r[i] * d
        if all(p + rk * d - vk >= -FEAS_TOL for rk, vk in zip(r, v)):
            straddles = r[i] <= 0 <= r[j]
            key = (p, not straddles, r[j] - r[i])
            if best is None or key < best[0]:
                best = (key, i, j, p, d)
    if best is None:
        raise NoRiskNeutralMeasure("no feasible vertex")
    _, i, j, p, d = best
    if r[i] == 0 or r[j] == 0:
        k = i if r[i] == 0 else j
        return SingleRoundSolution(p, d, RiskNeutralMeasure((0.0,), (1.0,)), (k,))
    w1 = r[j] / (r[j] - r[i])
    return SingleRoundSolution(p, d, RiskNeutralMeasure((r[i], r[j]), (w1, 1 - w1)), (i, j))


def lp_exact_with_exercise(support: DiscreteSupport, intrinsic: float) -> float:
    """The LP with the extra constraint p >= intrinsic (holder may stop now)."""
    return float(_lp_rows(np.array(support.returns), np.array([support.values]), np.array([intrinsic]))[0])


def continuous_single_round(payoff: Payoff, x: float, zeta_lower: float, zeta_upper: float) -> float:
    """Single-round upper value over the whole interval [-zl, zu].

    For a piecewise-linear payoff the concave envelope of r -> g(x(1+r)) has
    its vertices among the interval ends and the kinks, so the LP over that
    finite support is exact.
    """
    pts = {-zeta_lower, zeta_upper, 0.0}
    pts.update(k / x - 1 for k in payoff.kinks() if -zeta_lower < k / x - 1 < zeta_upper)
    r = np.array(sorted(pts))
    return float(_lp_rows(r, payoff(x * (1 + r))[None, :])[0])


# -- multi-round games ----------------------------------------------------------------

def _tree(spec: GameSpec, sets: Sequence[DiscretizedSet]):
    """Reachable prices per level, keyed by move multiset (uniform sets) or path."""
    uniform = spec.is_uniform and len({s.returns for s in sets}) == 1
    levels: list[dict] = [{(): spec.s0}]
    for t in range(spec.tau):
        r = sets[t].returns
        nxt: dict = {}
        for key, x in levels[-1].items():
            for i in range(len(r)):
                child = tuple(sorted(key + (i,))) if uniform else key + (i,)
                nxt.setdefault(child, x * (1 + r[i]))
        levels.append(nxt)

    def kid(key, i):
        return tuple(sorted(key + (i,))) if uniform else key + (i,)

    return levels, kid


def _lower_rows(returns: np.ndarray, values: np.ndarray) -> np.ndarray:
    # max over Delta of min over r of v - r Delta, via the mirrored primal
    return -_lp_rows(returns, -np.atleast_2d(values))


def game_value_exact(spec: GameSpec, sets: Sequence[DiscretizedSet], american: bool = False,
                     limits: OracleLimits = OracleLimits(), lower: bool = False) -> float:
    """Exact discretized game value by per-node LP recursion.

    ``lower`` gives the lower bound; with ``american`` the trader then holds
    the exercise right and each node is max(g(x), lower continuation).
    """
    sets = list(sets)
    _check(spec.tau, max(s.size for s in sets), limits.max_tau, limits.max_support)
    g = spec.payoff
    levels, kid = _tree(spec, sets)
    vals = {k: float(g(x)) for k, x in levels[-1].items()}
    for t in range(spec.tau - 1, -1, -1):
        r = np.array(sets[t].returns)
        keys = list(levels[t])
        rows = np.array([[vals[kid(k, i)] for i in range(r.size)] for k in keys])
        intrinsic = np.array([float(g(levels[t][k])) for k in keys])
        if lower:
            p = _lower_rows(r, rows)
            if american:
                p = np.maximum(p, intrinsic)
        else:
            p = _lp_rows(r, rows, intrinsic if american else None)
        vals = dict(zip(keys, p))
    return float(vals[()])


def american_policy_enumeration(spec: GameSpec, sets: Sequence[DiscretizedSet],
                                limits: OracleLimits = OracleLimits(), lower: bool = False) -> float:
    """Max over every stopping policy of the policy's game value.

    A policy marks each non-terminal node as stop (value g(x)) or continue
    (value = LP over its children). All 2^nodes policies are evaluated at
    once, one row per policy. ``lower`` uses the lower-bound LP, i.e. the
    trader owns the exercise right.
    """
    sets = list(sets)
    _check(spec.tau, max(s.size for s in sets), limits.max_tau_policy, limits.max_policy_support)
    g = spec.payoff
    levels, kid = _tree(spec, sets)
    inner = [k for lv in levels[:-1] for k in lv]
    n_nodes = len(inner)
    if n_nodes > 20:
        raise SizeLimit(f"{n_nodes} decision nodes is too many to enumerate")
    bit = {k: j for j, k in enumerate(inner)}
    codes = np.arange(2 ** n_nodes, dtype=np.int64)
    # row values per node, one entry per policy
    vals = {k: np.full(codes.size, float(g(x))) for k, x in levels[-1].items()}
    for t in range(spec.tau - 1, -1, -1):
        r = np.array(sets[t].returns)
        new = {}
        for k, x in levels[t].items():
            rows = np.stack([vals[kid(k, i)] for i in range(r.size)], axis=1)
            cont = _lower_rows(r, rows) if lower else _lp_rows(r, rows)
            stop = (codes >> bit[k]) & 1
            new[k] = np.where(stop == 1, float(g(x)), cont)
        vals = new
    return float(vals[()].max())


def hybrid_value(spec: GameSpec, dset: DiscretizedSet, t: int, x: float,
                 reference_sets: Sequence[DiscretizedSet] | None = None) -> tuple[float, float]:
    """(g_t(x), g^m_t(x)): true value and the value with round t restricted to ``dset``.

    Both use the same exact next-round value function. For the last round
    that is the payoff; otherwise it is the exact game on the remaining
    rounds over ``reference_sets`` (a fine discretization).
    """
    if t == spec.tau - 1:
        nxt = spec.payoff
        true = continuous_single_round(spec.payoff, x, spec.zeta_lower[t], spec.zeta_upper[t])
    else:
        if reference_sets is None:
            raise ValueError("reference_sets required for t < tau - 1")
        rest = list(reference_sets)[t + 1:]
        tail = spec.tau - t - 1

        def nxt(y):
            sub = GameSpec(float(y), tail, spec.zeta_lower[t + 1:], spec.zeta_upper[t + 1:], spec.payoff)
            return game_value_exact(sub, rest)

        ref = np.array(list(reference_sets)[t].returns)
        true = float(_lp_rows(ref, np.array([[nxt(x * (1 + r)) for r in ref]]))[0])
    r = np.array(dset.returns)
    row = np.array([[float(nxt(x * (1 + ri))) for ri in r]])
    return true, float(_lp_rows(r, row)[0])


def gtgm_bound(lipschitz: float, g_t: float, x: float, epsilon: float) -> float:
    return math.sqrt(2 * lipschitz * max(g_t, 0.0) * x * epsilon) + lipschitz * x * epsilon


# -- jumps --------------------------------------------------------------------------------

def random_jump_single_round(payoff: Payoff, x: float, returns: Sequence[float], q: float,
                             y_support: Sequence[float], y_weights: Sequence[float]) -> float:
    """One round with an exogenous jump folded into nature's constraint set.

    Nature's return is r with probability 1 - q and Y otherwise, so each
    choice r becomes the constraint point ((1-q) r + q E[Y], (1-q) g(x(1+r)) + q E[g(x(1+Y))]).
    """
    y = np.asarray(y_support, dtype=float)
    w = np.asarray(y_weights, dtype=float)
    ey = float(w @ y)
    eg = float(w @ payoff(x * (1 + y)))
    r = np.asarray(returns, dtype=float)
    shifted = (1 - q) * r + q * ey
    vals = (1 - q) * payoff(x * (1 + r)) + q * eg
    order = np.argsort(shifted)
    return float(_lp_rows(shifted[order], vals[order][None, :])[0])


def adversarial_jump_exact(spec: GameSpec, u_set: DiscretizedSet, w_set: DiscretizedSet, quota: int,
                           limits: OracleLimits = OracleLimits(max_tau=3, max_support=8)) -> float:
    """Path recursion of the quota jump game on exact reachable prices."""
    _check(spec.tau, max(u_set.size, w_set.size), limits.max_tau, limits.max_support)
    g = spec.payoff
    ru = np.array(u_set.returns)
    rw = np.array(w_set.returns)

    def value(t: int, x: float, m: int) -> float:
        if t == spec.tau:
            return float(g(x))
        vu = [value(t + 1, x * (1 + r), m) for r in ru]
        if m == 0:
            return float(_lp_rows(ru, np.array([vu]))[0])
        vw = [value(t + 1, x * (1 + r), m - 1) for r in rw]
        r_all = np.concatenate([ru, rw])
        return float(_lp_rows(r_all, np.array([vu + vw]))[0])

    return value(0, spec.s0, quota)
