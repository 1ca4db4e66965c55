"""Forward filtering / backward sampling for a finite hidden Markov chain."""
from __future__ import annotations

import numpy as np


def forward_filter(log_lik, P, init=None):
    """Filtered probabilities ``p(S_t = j | data_{1:t})``.

    Parameters
    ----------
    log_lik : (T, N) array
        Log-likelihood of each time point under each state.
    P : (N, N) array
        Transition matrix, ``P[i, j] = p(S_t = j | S_{t-1} = i)``.
    init : (N,) array, optional
        Distribution of the first state; uniform by default.

    Returns
    -------
    filtered : (T, N) array
    log_evidence : float
        ``log p(data_{1:T})``.
    """
    log_lik = np.asarray(log_lik, dtype=float)
    T, N = log_lik.shape
    P = np.asarray(P, dtype=float)
    pred = np.full(N, 1.0 / N) if init is None else np.asarray(init, dtype=float)
    filtered = np.empty((T, N))
    shift = log_lik.max(axis=1)
    if not np.all(np.isfinite(shift)):
        bad = int(np.flatnonzero(~np.isfinite(shift))[0])
        raise FloatingPointError(f"no state has a finite likelihood at t={bad}")
    lik = np.exp(log_lik - shift[:, None])
    log_evidence = shift.sum()
    for t in range(T):
        f = pred * lik[t]
        z = f.sum()
        if not z > 0:
            raise FloatingPointError(f"filter underflow at t={t}")
        f /= z
        filtered[t] = f
        log_evidence += np.log(z)
        pred = f @ P
    return filtered, float(log_evidence)


def backward_sample(filtered, P, rng) -> np.ndarray:
    """Draw a 0-based state path given filtered probabilities."""
    T, N = filtered.shape
    u = rng.random(T)
    path = np.empty(T, dtype=np.int64)
    path[-1] = _draw(filtered[-1], u[-1])
    for t in range(T - 2, -1, -1):
        w = filtered[t] * P[:, path[t + 1]]
        path[t] = _draw(w / w.sum(), u[t])
    return path


def _draw(p, u):
    k = int(np.searchsorted(np.cumsum(p), u * p.sum(), side="right"))
    return min(k, len(p) - 1)


def ffbs(log_lik, P, rng, init=None) -> np.ndarray:
    filtered, _ = forward_filter(log_lik, P, init)
    return backward_sample(filtered, P, rng)


def simulate_chain(P, T: int, rng, init=None, start=None) -> np.ndarray:
    """Simulate a 0-based state sequence of length ``T``."""
    P = np.asarray(P, dtype=float)
    N = P.shape[0]
    u = rng.random(T)
    path = np.empty(T, dtype=np.int64)
    if start is None:
        p0 = np.full(N, 1.0 / N) if init is None else np.asarray(init, dtype=float)
        path[0] = _draw(p0, u[0])
    else:
        path[0] = start
    cum = np.cumsum(P, axis=1)
    for t in range(1, T):
        row = cum[path[t - 1]]
        path[t] = min(int(np.searchsorted(row, u[t] * row[-1], side="right")), N - 1)
    return path
