import numpy as np
import pytest

from adversarial_pricing import ConfigurationError, Payoff, black_scholes, hjb_solve

CALL = Payoff.call(100)
FLY = Payoff.butterfly(90, 110, 130)


def test_call_matches_black_scholes():
    price, grid = hjb_solve(100, CALL, 0.2, 0.2, 1.0)
    assert price == pytest.approx(black_scholes(100, CALL, 0.04), rel=1e-3)
    assert grid.dt <= grid.dy**2 / grid.nu_bar


def test_concave_and_linear_payoffs_do_not_move():
    cap = Payoff.from_table([(50, 50), (100, 100), (150, 110)], shape="concave")
    assert hjb_solve(100, cap, 0.2, 0.2, 1.0)[0] == pytest.approx(100.0, abs=1e-9)
    assert hjb_solve(100, Payoff.forward(90), 0.2, 0.3, 2.0)[0] == pytest.approx(10.0, abs=1e-9)


def test_terminal_condition_and_surface():
    price, grid = hjb_solve(100, FLY, 0.2, 0.2, 1.0, dy=0.01, snapshots=5)
    assert grid.times[0] == 1.0 and grid.times[-1] == pytest.approx(0.0, abs=1e-12)
    assert np.array_equal(grid.values[0], FLY(grid.prices))
    lines = grid.to_csv().splitlines()
    assert lines[0] == "t,x,G"
    assert len(lines) == 1 + grid.values.size


def test_cfl_violation():
    with pytest.raises(ConfigurationError):
        hjb_solve(100, CALL, 0.2, 0.2, 1.0, dy=0.01, dt=0.01)


def test_narrow_grid_flagged():
    _, grid = hjb_solve(100, CALL, 0.2, 0.2, 1.0, half_width=0.3)
    assert grid.boundary_warning
    _, grid = hjb_solve(100, CALL, 0.2, 0.2, 1.0)
    assert not grid.boundary_warning


def test_monotone_in_volatility_cap_and_above_payoff():
    values = [hjb_solve(100, FLY, z, z, 1.0, dy=0.01)[0] for z in (0.05, 0.1, 0.2, 0.3)]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    assert values[0] >= FLY.eval(100)
