import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adversarial_pricing import (
    DiscretizedSet,
    GameSpec,
    JumpConfig,
    JumpFeasibility,
    Payoff,
    ShapeMismatch,
    ValidationError,
    binomial_upper,
    discretize,
    price_upper,
)
from adversarial_pricing.jumps import adversarial_jump_upper, jump_weights, random_jump_upper, round_mean
from adversarial_pricing.oracle import OracleLimits, adversarial_jump_exact, random_jump_single_round

from gen import convex_table

CALL = Payoff.call(10)


def test_worked_example():
    spec = GameSpec.uniform(10, 1, 0.1, 0.1, CALL)
    jump = JumpConfig.random(0.1, [-0.05])
    assert jump_weights(0.1, 0.1, jump) == pytest.approx((17 / 36, 19 / 36))
    assert random_jump_upper(spec, jump) == pytest.approx(0.475, abs=1e-12)


def test_small_q_limit():
    spec = GameSpec.uniform(10, 4, 0.1, 0.15, CALL)
    assert random_jump_upper(spec, JumpConfig.random(1e-10, [0.05, -0.08])) == pytest.approx(
        binomial_upper(spec)[0], abs=1e-8
    )


def test_zero_jump_degenerates():
    spec = GameSpec.uniform(10, 1, 0.1, 0.1, CALL)
    q = 0.2
    got = random_jump_upper(spec, JumpConfig.random(q, [0.0]))
    assert got == pytest.approx((1 - q) * 0.5 + q * CALL.eval(10), abs=1e-12)


def test_non_uniform_random_jump_matches_manual_tree():
    spec = GameSpec(10, 2, (0.1, 0.2), (0.15, 0.1), CALL)
    jump = JumpConfig.random(0.1, [0.03, -0.04], [0.5, 0.5])
    want = 0.0
    m = []
    for zl, zu in zip(spec.zeta_lower, spec.zeta_upper):
        w1, w2 = jump_weights(zl, zu, jump)
        m.append([(-zl, 0.9 * w1), (zu, 0.9 * w2), (0.03, 0.05), (-0.04, 0.05)])
    for r1, p1 in m[0]:
        for r2, p2 in m[1]:
            want += p1 * p2 * CALL.eval(10 * (1 + r1) * (1 + r2))
    assert random_jump_upper(spec, jump) == pytest.approx(want, abs=1e-12)


def test_random_errors():
    spec = GameSpec.uniform(10, 1, 0.1, 0.1, CALL)
    with pytest.raises(JumpFeasibility):
        random_jump_upper(spec, JumpConfig.random(0.5, [-0.2]))  # needs mean 0.2 > zeta_upper
    with pytest.raises(ShapeMismatch):
        random_jump_upper(GameSpec.uniform(10, 1, 0.1, 0.1, Payoff.butterfly(9, 10, 11)),
                          JumpConfig.random(0.1, [0.0]))
    with pytest.raises(ValidationError):
        JumpConfig.random(1.0, [0.0])
    with pytest.raises(ValidationError):
        JumpConfig.random(0.1, [0.0, 0.1], [0.5, 0.6])
    with pytest.raises(ValidationError):
        JumpConfig.adversarial(0.1, 0.1, -1)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.02, 0.3), st.floats(0.02, 0.3), st.floats(0.01, 0.5),
       st.lists(st.floats(-0.2, 0.2), min_size=1, max_size=4))
def test_round_is_risk_neutral(zl, zu, q, ys):
    jump = JumpConfig.random(q, ys)
    try:
        jump_weights(zl, zu, jump)
    except JumpFeasibility:
        return
    assert abs(round_mean(zl, zu, jump)) <= 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_random_single_round_matches_folded_oracle(seed):
    rng = np.random.default_rng(seed)
    g = convex_table(rng)
    zl, zu = (float(v) for v in rng.uniform(0.05, 0.2, 2))
    jump = JumpConfig.random(float(rng.uniform(0.01, 0.3)), rng.uniform(-0.1, 0.1, 2), [0.3, 0.7])
    spec = GameSpec.uniform(10, 1, zl, zu, g)
    want = random_jump_single_round(g, 10, (-zl, zu), jump.q, jump.y_support, jump.y_weights)
    assert random_jump_upper(spec, jump) == pytest.approx(want, abs=1e-12)


def test_adversarial_worked_example():
    spec = GameSpec.uniform(10, 1, 0.1, 0.1, CALL)
    res = adversarial_jump_upper(spec, JumpConfig.adversarial(0.3, 0.3, 1), DiscretizedSet(0.2, (-0.1, 0.1)),
                                 w_set=DiscretizedSet(0.2, (-0.3, 0.3)))
    assert res.price == pytest.approx(1.5, abs=1e-12)
    assert res.layer_prices[0] == pytest.approx(0.5, abs=1e-12)


def test_adversarial_quota_validation():
    spec = GameSpec.uniform(10, 2, 0.1, 0.1, CALL)
    with pytest.raises(ValidationError):
        adversarial_jump_upper(spec, JumpConfig.adversarial(0.2, 0.2, 3), 0.05)
    with pytest.raises(ValidationError):
        adversarial_jump_upper(spec, JumpConfig.random(0.1, [0.0]), 0.05)


@pytest.mark.parametrize("seed", range(15))
def test_adversarial_properties(seed):
    rng = np.random.default_rng(seed)
    fly = Payoff.butterfly(*np.sort(rng.uniform(8, 13, 3)))
    tau = int(rng.integers(1, 4))
    spec = GameSpec.uniform(10, tau, 0.1, 0.1, fly)
    eps = 0.05
    plain = price_upper(spec, eps, "grid")
    small = [adversarial_jump_upper(spec, JumpConfig.adversarial(0.2, 0.2, q), eps).price for q in range(tau + 1)]
    wide = [adversarial_jump_upper(spec, JumpConfig.adversarial(0.3, 0.3, q), eps).price for q in range(tau + 1)]
    assert small[0] == plain.price
    assert all(b >= a - 1e-12 for a, b in zip(small, small[1:]))
    assert all(w >= s - 1e-9 for s, w in zip(small, wide))
    # grid value vs the exact path recursion with the combined constraint set
    u, w = discretize(0.1, 0.1, eps), discretize(0.2, 0.2, eps)
    for q in range(tau + 1):
        ref = adversarial_jump_exact(spec, u, w, q, OracleLimits(max_tau=3, max_support=12))
        assert small[q] == pytest.approx(ref, abs=fly.lipschitz * spec.s0 * tau * eps / 4)
