"""Random instance generators shared by the test modules."""

import numpy as np

from adversarial_pricing import DiscretizedSet, GameSpec, Payoff


def monotone_table(rng, lo=7.0, hi=13.0, n=None, start_at_zero=True, convex=None):
    """Monotone 1-Lipschitz table payoff with random slopes in [0, 1].

    ``convex=False`` forces at least one slope decrease (non-convex);
    ``None`` leaves the slopes random. Shape is declared general.
    """
    n = n or int(rng.integers(3, 8))
    xs = np.sort(rng.uniform(lo, hi, n))
    while np.any(np.diff(xs) < 1e-2):
        xs = np.sort(rng.uniform(lo, hi, n))
    slopes = rng.uniform(0, 1, n - 1)
    if convex is False:
        if np.all(np.diff(slopes) >= 0):
            slopes = slopes[::-1].copy()
        if np.all(np.diff(slopes) >= 0):  # all equal or one slope
            slopes[0] = min(1.0, slopes[0] + 0.5)
    ys = np.concatenate([[0.0], np.cumsum(np.diff(xs) * slopes)])
    if not start_at_zero:
        ys += rng.uniform(-1, 1)
    return Payoff.from_table(list(zip(xs, ys)), lipschitz=1.0, monotone_nondecreasing=True)


def convex_table(rng, lo=1.0, hi=40.0, n=None):
    """Table payoff with increasing slopes in [0, 1] on [lo, hi].

    Tables extrapolate as constants, so the function is convex only between
    the end knots; callers keep every reachable price inside [lo, hi].
    """
    n = n or int(rng.integers(3, 8))
    inner = np.sort(rng.uniform(lo + 1, hi - 1, n - 2))
    xs = np.unique(np.concatenate([[lo], inner, [hi]]))
    slopes = np.sort(rng.uniform(0, 1, xs.size - 1))
    ys = np.concatenate([[0.0], np.cumsum(np.diff(xs) * slopes)])
    return Payoff.from_table(list(zip(xs, ys)), lipschitz=1.0, monotone_nondecreasing=True, shape="convex")


def random_support(rng, b_max=8):
    """Strictly increasing returns straddling zero."""
    b = int(rng.integers(2, b_max + 1))
    zl, zu = rng.uniform(0.02, 0.3, 2)
    inner = rng.uniform(-zl, zu, b - 2)
    if rng.random() < 0.2 and b > 2:
        inner[0] = 0.0
    r = np.unique(np.concatenate([[-zl], inner, [zu]]))
    return r


def small_game(rng, tau_max=3, b_max=4, payoff=None):
    payoff = payoff or monotone_table(rng)
    tau = int(rng.integers(1, tau_max + 1))
    r = random_support(rng, b_max)
    dset = DiscretizedSet(float(r[-1] - r[0]), tuple(float(v) for v in r))
    spec = GameSpec.uniform(10.0, tau, float(-r[0]), float(r[-1]), payoff)
    return spec, dset
