"""Acceptance gate: one test group per criterion, tolerances as stated.

Run ``pytest tests/test_acceptance.py`` and read the "acceptance criteria"
section at the end of the report for one PASS/FAIL line per criterion.
"""

import itertools
import math
import time
from pathlib import Path

import numpy as np
import pytest

from adversarial_pricing import (
    DiscreteSupport,
    DiscretizedSet,
    ExactLimits,
    GameSpec,
    JumpConfig,
    Payoff,
    american_upper,
    binomial_upper,
    black_scholes,
    convergence_scan,
    discretize,
    hjb_solve,
    price_upper,
    solve_lower,
    solve_upper,
)
from adversarial_pricing import cli, multinomial, oracle
from adversarial_pricing.jumps import adversarial_jump_upper, jump_weights, random_jump_upper
from adversarial_pricing.lattice import lognormal_expectation

from gen import convex_table, monotone_table, random_support, small_game

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


# 1 -------------------------------------------------------------------------------

@pytest.mark.criterion(1)
def test_duality_suite_500_supports():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    for _ in range(500):
        r = random_support(rng, b_max=8)
        x = 10.0
        # values of a random monotone 1-Lipschitz function at x(1 + r)
        steps = np.diff(x * r) * rng.uniform(0, 1, r.size - 1)
        v = rng.uniform(-1, 1) + np.concatenate([[0.0], np.cumsum(steps)])
        sup = DiscreteSupport(tuple(r), tuple(v))
        neg = DiscreteSupport(tuple(r), tuple(-v))
        assert abs(solve_upper(sup).price - oracle.lp_exact(sup).price) <= 1e-10
        assert abs(solve_lower(sup).price + oracle.lp_exact(neg).price) <= 1e-10
    assert time.perf_counter() - start < 5.0


# 2 -------------------------------------------------------------------------------

@pytest.mark.criterion(2)
def test_convex_collapse_and_no_early_exercise():
    rng = np.random.default_rng(202)
    for _ in range(20):
        g = convex_table(rng)
        tau = int(rng.integers(1, 6))
        z = float(rng.uniform(0.05, 0.2))
        k = int(rng.integers(2, 7))
        eps = 2 * z / k  # extremes land on the grid
        spec = GameSpec.uniform(10.0, tau, z, z, g)
        binom, _ = binomial_upper(spec)
        euro = price_upper(spec, eps, "exact").price
        amer = american_upper(spec, eps, "exact").price
        assert abs(euro - binom) <= 1e-10
        assert abs(amer - euro) <= 1e-10


# 3 -------------------------------------------------------------------------------

@pytest.mark.criterion(3)
def test_black_scholes_convergence():
    start = time.perf_counter()
    call = Payoff.call(100)
    closed = black_scholes(100, call, 0.04)
    quad = lognormal_expectation(100, call, 0.04)
    assert abs(closed - 7.9656) <= 1e-3
    assert abs(quad - closed) <= 1e-3
    rows = convergence_scan(100, call, 0.2, 0.2, [25, 100, 400])
    gaps = [r.abs_gap for r in rows]
    assert rows[-1].rel_gap < 0.005
    assert gaps[0] >= gaps[1] >= gaps[2]
    assert time.perf_counter() - start < 10.0


# 4 -------------------------------------------------------------------------------

@pytest.mark.criterion(4)
def test_discretization_budget_and_nested_monotonicity():
    rng = np.random.default_rng(404)
    start = time.perf_counter()
    tau, z, s0, eps = 4, 0.1, 10.0, 0.1
    limits = ExactLimits(max_tau=4, max_support=40)
    for _ in range(25):
        g = monotone_table(rng, convex=False)
        spec = GameSpec.uniform(s0, tau, z, z, g)
        ladder = [eps / 2**j for j in range(5)]  # eps ... eps/16, nested grids
        prices = [price_upper(spec, e, "exact", limits=limits).price for e in ladder]
        ref = prices[-1]
        budget = 4 * math.sqrt(eps) * g.lipschitz * tau * s0
        assert -1e-12 <= ref - prices[0] <= budget
        assert all(b >= a - 1e-12 for a, b in zip(prices, prices[1:]))
    assert time.perf_counter() - start < 60.0


# 5 -------------------------------------------------------------------------------

@pytest.mark.criterion(5)
def test_hybrid_gap_within_bound():
    rng = np.random.default_rng(505)
    for _ in range(100):
        g = monotone_table(rng, lo=5.0, hi=15.0)
        x = float(rng.uniform(8, 12))
        zl, zu = rng.uniform(0.05, 0.3, 2)
        eps = float(rng.uniform(0.01, 0.5) * (zl + zu))
        spec = GameSpec.uniform(x, 1, float(zl), float(zu), g)
        dset = discretize(float(zl), float(zu), eps)
        g_t, g_m = oracle.hybrid_value(spec, dset, 0, x)
        gap = g_t - g_m
        assert gap >= -1e-12
        assert gap <= oracle.gtgm_bound(g.lipschitz, g_t, x, eps) + 1e-12


# 6 -------------------------------------------------------------------------------

@pytest.mark.criterion(6)
def test_american_matches_policy_enumeration():
    rng = np.random.default_rng(606)
    for _ in range(100):
        spec, dset = small_game(rng, tau_max=3, b_max=4, payoff=monotone_table(rng, start_at_zero=False))
        sets = [dset] * spec.tau
        engine = american_upper(spec, dset, "exact").price
        policies = oracle.american_policy_enumeration(spec, sets)
        recursion = oracle.game_value_exact(spec, sets, american=True)
        assert abs(engine - policies) <= 1e-8
        # exercise inside the LP vs max over policies outside it
        assert abs(recursion - policies) <= 1e-12


@pytest.mark.criterion(6)
def test_exercise_interchange_single_round():
    rng = np.random.default_rng(607)
    for _ in range(200):
        r = random_support(rng, b_max=6)
        v = rng.uniform(-1, 1, r.size)
        intrinsic = float(rng.uniform(-1, 1.5))
        sup = DiscreteSupport(tuple(r), tuple(v))
        inside = oracle.lp_exact_with_exercise(sup, intrinsic)
        outside = max(oracle.lp_exact(sup).price, intrinsic)
        assert abs(inside - outside) <= 1e-12


# 7 -------------------------------------------------------------------------------

@pytest.mark.criterion(7)
def test_superhedge_every_leaf_path():
    spec = GameSpec.uniform(100.0, 5, 0.1, 0.12, Payoff.call(100))
    price, schedule = binomial_upper(spec)
    zl, zu = spec.zeta_lower[0], spec.zeta_upper[0]
    tight = 0
    for ups in itertools.product([False, True], repeat=spec.tau):
        rets = [zu if u else -zl for u in ups]
        deltas = schedule.deltas_along(ups)
        wealth = price + sum(d * r for d, r in zip(deltas, rets))
        terminal = spec.s0 * math.prod(1 + r for r in rets)
        owed = spec.payoff.eval(terminal)
        assert wealth >= owed - 1e-9
        tight += abs(wealth - owed) <= 1e-9
    assert tight >= 1


# 8 -------------------------------------------------------------------------------

@pytest.mark.criterion(8)
def test_random_jump_matches_folded_oracle():
    call = Payoff.call(10)
    spec = GameSpec.uniform(10.0, 1, 0.1, 0.1, call)
    jump = JumpConfig.random(0.1, [-0.05], [1.0])
    w1, w2 = jump_weights(0.1, 0.1, jump)
    assert abs(w1 - 0.472222222222) < 1e-9 and abs(w2 - 0.527777777778) < 1e-9
    value = random_jump_upper(spec, jump)
    folded = oracle.random_jump_single_round(call, 10.0, (-0.1, 0.1), 0.1, [-0.05], [1.0])
    assert abs(value - 0.475) <= 1e-12
    assert abs(value - folded) <= 1e-12

    rng = np.random.default_rng(808)
    for _ in range(50):
        g = convex_table(rng)
        zl, zu = (float(v) for v in rng.uniform(0.05, 0.2, 2))
        ys = rng.uniform(-0.1, 0.1, int(rng.integers(1, 4)))
        wy = rng.dirichlet(np.ones(ys.size))
        jump = JumpConfig.random(float(rng.uniform(0.01, 0.2)), ys, wy)
        spec = GameSpec.uniform(10.0, 1, zl, zu, g)
        got = random_jump_upper(spec, jump)
        ref = oracle.random_jump_single_round(g, 10.0, (-zl, zu), jump.q, jump.y_support, jump.y_weights)
        assert abs(got - ref) <= 1e-12


@pytest.mark.criterion(8)
def test_adversarial_jump_degenerate_cases_bit_match():
    g = Payoff.butterfly(90, 110, 130)
    spec = GameSpec.uniform(100.0, 6, 0.05, 0.05, g)
    eps = 0.0125
    plain = price_upper(spec, eps, "grid")
    none = adversarial_jump_upper(spec, JumpConfig.adversarial(0.2, 0.2, 0), eps)
    assert none.price == plain.price and none.hedge == plain.hedge
    for quota in (1, 2, 3):
        same = adversarial_jump_upper(spec, JumpConfig.adversarial(0.05, 0.05, quota), eps)
        assert same.price == plain.price


@pytest.mark.criterion(8)
def test_adversarial_jump_nondecreasing_in_quota():
    g = Payoff.butterfly(90, 110, 130)
    spec = GameSpec.uniform(100.0, 6, 0.05, 0.05, g)
    prices = [adversarial_jump_upper(spec, JumpConfig.adversarial(0.15, 0.15, q), 0.0125).price for q in (0, 1, 2)]
    assert prices[0] <= prices[1] <= prices[2]


# 9 -------------------------------------------------------------------------------

@pytest.mark.criterion(9)
def test_hjb_convex_and_concave():
    call = Payoff.call(100)
    fd, _ = hjb_solve(100, call, 0.2, 0.2, 1.0)
    bs = black_scholes(100, call, 0.04)
    assert abs(fd - bs) <= 0.01 * bs
    concave = Payoff.from_table([(50, 50), (100, 100), (150, 110)], shape="concave")
    fd, _ = hjb_solve(100, concave, 0.2, 0.2, 1.0)
    assert abs(fd - concave.eval(100)) <= 1e-3 * 100


@pytest.mark.criterion(9)
def test_hjb_butterfly_limit_agreement():
    start = time.perf_counter()
    g = Payoff.butterfly(90, 110, 130)
    s0, zeta, horizon = 100.0, 0.2, 1.0
    fd, grid = hjb_solve(s0, g, zeta, zeta, horizon, dy=0.0025)
    assert not grid.boundary_warning
    gaps = []
    for delta in (1 / 16, 1 / 64):
        z = zeta * math.sqrt(delta)
        tau = round(horizon / delta)
        spec = GameSpec.uniform(s0, tau, z, z, g)
        approx = price_upper(spec, 2 * z / 16, "grid").price
        gaps.append(abs(approx - fd))
    assert gaps[1] <= gaps[0] / 2
    assert gaps[1] <= 0.02 * fd
    assert time.perf_counter() - start < 120.0


# 10 ------------------------------------------------------------------------------

@pytest.mark.criterion(10)
def test_configs_rerun_byte_identical(tmp_path, monkeypatch):
    # small chunks so the threaded path really splits rows across workers
    monkeypatch.setattr(multinomial, "_CHUNK", 64)
    commands = {
        "call_tau2": "price", "butterfly_grid": "price", "butterfly_exact": "price",
        "american_put": "american", "jump_random": "jump", "jump_adversarial": "jump",
        "scan_call": "scan", "hjb_butterfly": "hjb", "check": "check",
    }
    assert {p.stem for p in CONFIGS.glob("*.json")} == set(commands)
    for name, command in commands.items():
        outputs = []
        for threads in (1, 4, 1, 4):
            out = tmp_path / f"{name}-{threads}-{len(outputs)}.out"
            argv = [command, "--config", str(CONFIGS / f"{name}.json"), "--out", str(out), "--threads", str(threads)]
            assert cli.main(argv) == 0
            outputs.append(out.read_bytes())
        assert all(o == outputs[0] for o in outputs), name
