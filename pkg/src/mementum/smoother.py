"""Simulation smoother for random-walk states observed through linear Gaussian equations.

The model is

    obs_t = H_t x_t + e_t,   e_t ~ N(0, Sigma)
    x_0 ~ N(mean0, v0 I),    x_t = x_{t-1} + u_t,  u_t ~ N(0, diag(q))

Stacking all states gives a Gaussian posterior with block-tridiagonal
precision, which is factorized in banded form; one Cholesky factor yields
both the posterior mean and an exact joint draw.
"""
from __future__ import annotations

import logging

import numpy as np
from scipy import linalg

log = logging.getLogger(__name__)

JITTER = 1e-10


def data_blocks(H, obs, Sigma_inv):
    """Per-time precision ``H' S^-1 H`` and information ``H' S^-1 obs``."""
    HS = np.einsum("tki,kl->til", H, Sigma_inv)
    return HS @ H, np.einsum("til,tl->ti", HS, obs)


def _banded_precision(prec, q, v0):
    T, m, _ = prec.shape
    iq = 1.0 / q
    D = prec.copy()
    idx = np.arange(m)
    D[:, idx, idx] += 2.0 * iq
    if T == 1:
        D[0, idx, idx] += -2.0 * iq + 1.0 / v0
    else:
        D[0, idx, idx] += -iq + 1.0 / v0
        D[-1, idx, idx] -= iq
    N = T * m
    ab = np.zeros((m + 1, N))
    for d in range(m):
        vals = np.zeros((T, m))
        vals[:, : m - d] = D[:, idx[: m - d], idx[d:]]
        ab[m - d, d:] = vals.reshape(-1)[: N - d]
    ab[0, m:] = np.tile(-iq, T)[: N - m]
    return ab


def _cholesky(ab, m):
    try:
        return linalg.cholesky_banded(ab, lower=False)
    except linalg.LinAlgError as exc:
        ab = ab.copy()
        ab[-1] += JITTER * max(1.0, np.abs(ab[-1]).max())
        log.warning("state precision not positive definite (%s); retrying with jitter", exc)
        try:
            return linalg.cholesky_banded(ab, lower=False)
        except linalg.LinAlgError as exc2:
            k = _leading_minor(str(exc2))
            where = f" near t={(k - 1) // m}" if k else ""
            raise linalg.LinAlgError(f"state precision not positive definite{where}") from None


def _leading_minor(msg):
    digits = [int(tok) for tok in msg.replace(".", " ").split() if tok.isdigit()]
    return digits[0] if digits else None


def sample_rw_states(prec, info, q, v0, rng, mean0=None, return_mean=False):
    """Joint posterior draw of ``x_0..x_{T-1}``.

    Parameters
    ----------
    prec, info : arrays of shape (T, m, m) and (T, m)
        Data precision and information per time (zeros where unobserved).
    q : (m,) array
        Innovation variances; all zero means the state is constant in time.
    v0 : float
        Prior variance of the initial state.
    """
    T, m, _ = prec.shape
    q = np.asarray(q, dtype=float)
    mean0 = np.zeros(m) if mean0 is None else np.asarray(mean0, dtype=float)
    if np.all(q == 0):
        K = prec.sum(axis=0) + np.eye(m) / v0
        b = info.sum(axis=0) + mean0 / v0
        L = np.linalg.cholesky(0.5 * (K + K.T))
        mean = linalg.cho_solve((L, True), b)
        x = mean + linalg.solve_triangular(L.T, rng.standard_normal(m), lower=False)
        x = np.broadcast_to(x, (T, m)).copy()
        return (x, np.broadcast_to(mean, (T, m)).copy()) if return_mean else x
    if np.any(q <= 0):
        raise ValueError("innovation variances must be all positive or all zero")
    ab = _banded_precision(prec, q, v0)
    rhs = info.copy()
    rhs[0] += mean0 / v0
    U = _cholesky(ab, m)
    mean = linalg.cho_solve_banded((U, False), rhs.reshape(-1))
    z = rng.standard_normal(T * m)
    x = mean + linalg.solve_banded((0, m), U, z)
    x = x.reshape(T, m)
    return (x, mean.reshape(T, m)) if return_mean else x
