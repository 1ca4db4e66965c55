"""Independent reference implementations and scenario builders used by the tests.

Nothing here imports the detector; the condition oracle works from the
definition of a meme period one day at a time.
"""
from __future__ import annotations

import itertools

import numpy as np

from mementum.synth import FactorScript, ScenarioSpec
from mementum.vecm import StaticParams


def bridged(mask, d_f):
    """Fill runs of at most ``d_f`` False days that have True on both sides."""
    m = list(mask)
    out = list(m)
    T = len(m)
    t = 0
    while t < T:
        if not m[t]:
            u = t
            while u < T and not m[u]:
                u += 1
            if t > 0 and u < T and u - t <= d_f:
                out[t:u] = [True] * (u - t)
            t = u
        else:
            t += 1
    return out


def run_bounds(mask, t):
    a = t
    while a > 0 and mask[a - 1]:
        a -= 1
    b = t
    while b + 1 < len(mask) and mask[b + 1]:
        b += 1
    return a, b


def quiet_before(mask, a):
    k = 0
    while a - k - 1 >= 0 and not mask[a - k - 1]:
        k += 1
    return k


def path_features(states, d_c=2, d_p=2, d_f=1):
    """Per-pair part of the oracle: bridged mask, persistent mask, persistent runs by start."""
    T = len(states)
    m = bridged([s == 2 for s in states], d_f)

    def persistent(t):
        if not m[t]:
            return False
        a, b = run_bounds(m, t)
        return b - a + 1 >= d_c and quiet_before(m, a) >= d_p

    pers = np.array([persistent(t) for t in range(T)], dtype=bool)
    runs = {run_bounds(m, t)[0]: run_bounds(m, t) for t in range(T) if pers[t]}
    return np.array(m, dtype=bool), pers, runs


def combine_features(fa, fb, d_c=2, d_w=1):
    """Joint part of the oracle given two ``path_features`` results."""
    (m1, p1, r1), (m2, p2, r2) = fa, fb
    T = m1.size
    cond2 = np.zeros(T, dtype=bool)
    mem = np.zeros(T, dtype=bool)
    for a1, (_, b1) in r1.items():
        for a2, (_, b2) in r2.items():
            if abs(a1 - a2) <= d_w:
                cond2[min(a1, a2):max(b1, b2) + 1] = True
                lo, hi = max(a1, a2), min(b1, b2)
                if hi - lo + 1 >= d_c:
                    mem[lo:hi + 1] = True
    return m1 & m2, cond2, p1 & p2, mem


def condition_oracle(pr_states, vol_states, d_c=2, d_p=2, d_f=1, d_w=1):
    """Day-by-day masks ``(cond1, cond2, cond3, mementum)``.

    Day ``t`` is cointegrated for a pair when its rank is one after bridging
    short falls.  It is persistent when its run lasts ``d_c`` days and follows
    ``d_p`` quiet days.  The starts condition holds on the union of two
    persistent runs, one per pair, that start within ``d_w`` days of each
    other; the meme period is their overlap when it lasts ``d_c`` days.
    Under the default thresholds a persistent run can have at most one
    partner, since two persistent runs of one pair start at least
    ``d_c + d_p`` days apart, so no tie-breaking is needed here.
    """
    fa = path_features(pr_states, d_c, d_p, d_f)
    fb = path_features(vol_states, d_c, d_p, d_f)
    return combine_features(fa, fb, d_c, d_w)


def all_paths(T):
    """Every 1-based path over states {1, 2} of length ``T``."""
    return [np.array(p) + 1 for p in itertools.product((0, 1), repeat=T)]


def worked_example_paths():
    """Rank paths of the worked example, 0-based days (example day ``k`` is index ``k - 1``).

    price/posts: rank one on example days 3-4 and 8-16, plus 26-28.
    volume/posts: rank one on day 4 only, then 9-16, plus day 27.
    """
    T = 30
    pr = np.ones(T, dtype=int)
    vol = np.ones(T, dtype=int)
    for a, b in ((3, 4), (8, 16), (26, 28)):
        pr[a - 1:b] = 2
    for a, b in ((4, 4), (9, 16), (27, 27)):
        vol[a - 1:b] = 2
    return pr, vol


STRONG_STATICS = StaticParams([0.0, 0.0], np.zeros((2, 2)), [[1.0, 0.3], [0.3, 1.0]])
STRONG_FACTORS = FactorScript([[-0.5, 0.5]], [[1.0], [-1.0]])


def switch_scenario(seed, T=300, switch=150):
    """Rank 0 for the first ``switch`` days, rank 1 afterwards."""
    path = tuple([1] * switch + [2] * (T - switch))
    return ScenarioSpec(T, STRONG_STATICS, STRONG_FACTORS, path=path, seed=seed)


def lagged_null_paths(seed, T=200):
    """Cointegration blocks in price/posts echoed 5 to 10 days later in volume/posts.

    Both pairs are repeatedly cointegrated and overlap, but their regimes
    never start within the matching window, so no meme period exists.
    """
    rng = np.random.default_rng(seed)
    pr = np.ones(T, dtype=int)
    vol = np.ones(T, dtype=int)
    t = int(rng.integers(10, 25))
    while True:
        length = int(rng.integers(20, 36))
        lag = int(rng.integers(5, 11))
        if t + length + lag >= T - 5:
            break
        pr[t:t + length] = 2
        vol[t + lag:t + lag + length] = 2
        t += length + lag + int(rng.integers(15, 30))
    return pr, vol


def alternating_null_paths(seed, T=200):
    """Volatile cointegration that is never joint.

    Rank-one blocks of 8 to 29 days alternate between the two pairs with
    3 to 14 quiet days in between, so each pair switches often but the two
    are never cointegrated on the same day.
    """
    rng = np.random.default_rng(seed)
    paths = [np.ones(T, dtype=int), np.ones(T, dtype=int)]
    turn = int(rng.integers(2))
    t = int(rng.integers(5, 15))
    while True:
        length = int(rng.integers(8, 30))
        if t + length >= T - 2:
            break
        paths[turn][t:t + length] = 2
        t += length + int(rng.integers(3, 15))
        turn ^= 1
    return paths[0], paths[1]
