"""Deterministic pieces of the regime-switching VECM.

Row-vector convention throughout: ``y_t`` is ``(1, n)`` and the model reads

    dy_t = c + y_{t-1} Pi_t + dy_{t-1} B + eps_t,    eps_t ~ N(0, Sigma)

With 0-based arrays the usable observations are ``t = 2, ..., T-1`` (both
``dy_t`` and ``dy_{t-1}`` exist), so residual matrices have ``T - 2`` rows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

ORTHO_TOL = 1e-10
RANK_TOL = 1e-8
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class StaticParams:
    """Intercept ``c`` (n,), short-run matrix ``B`` (n, n) and error covariance ``Sigma``."""

    c: np.ndarray
    B: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.size
        B = np.asarray(self.B, dtype=float)
        Sigma = np.asarray(self.Sigma, dtype=float)
        if B.shape != (n, n) or Sigma.shape != (n, n):
            raise ValueError(f"expected B and Sigma of shape {(n, n)}, got {B.shape} and {Sigma.shape}")
        if not np.allclose(Sigma, Sigma.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Sigma).max())):
            raise ValueError("Sigma must be symmetric")
        if np.linalg.eigvalsh(Sigma).min() <= 0:
            raise ValueError("Sigma must be positive definite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Sigma", Sigma)

    @property
    def n(self) -> int:
        return self.c.size


@dataclass(frozen=True)
class RankPath:
    """Hidden chain states in ``1..N``; the cointegration rank is ``state - 1``."""

    states: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.states)
        if s.ndim != 1:
            raise ValueError("states must be one-dimensional")
        if s.size and (not np.issubdtype(s.dtype, np.integer) and not np.all(s == np.round(s))):
            raise ValueError("states must be integers")
        s = s.astype(np.int64)
        if s.size and s.min() < 1:
            raise ValueError("states are 1-based; got a value below 1")
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    @property
    def ranks(self) -> np.ndarray:
        return self.states - 1

    def __len__(self):
        return self.states.size


@dataclass(frozen=True)
class CointFactors:
    """Per-time normalized factors with ``Pi_t = beta_t @ alpha_t``.

    ``beta[t]`` is ``(n, r_t)`` with an identity top block and ``alpha[t]`` is
    ``(r_t, n)``; both are empty when ``r_t == 0``.
    """

    beta: list
    alpha: list

    def pi(self, t: int) -> np.ndarray:
        return pi_from_factors(self.alpha[t], self.beta[t])


def rank_indicator(state: int, n: int) -> np.ndarray:
    """Diagonal 0/1 selector whose rank is ``state - 1``.

    Entry ``i`` (1-based) is ``(1 - s_1) * sum_{j=i+1}^{n+1} s_j`` where ``s_j``
    indicates ``state == j``.
    """
    if not 1 <= state <= n + 1:
        raise ValueError(f"state {state} outside 1..{n + 1}")
    s = np.zeros(n + 2)
    s[state] = 1.0
    diag = [(1.0 - s[1]) * s[i + 1:n + 2].sum() for i in range(1, n + 1)]
    return np.diag(diag)


def _check_orthogonal(M, name):
    M = np.asarray(M, dtype=float)
    err = np.abs(M.T @ M - np.eye(M.shape[0])).max()
    if err > ORTHO_TOL:
        raise ValueError(f"{name} is not orthogonal (max deviation {err:.3g})")
    return M


def pi_from_svd(U, Lam, V, state: int, kappa=None) -> np.ndarray:
    """Assemble ``Pi = U I(S) I(S) Lam V'``.

    With ``kappa`` the equivalent form ``U kappa I I kappa^{-1} Lam V'`` is used.
    """
    U = _check_orthogonal(U, "U")
    V = _check_orthogonal(V, "V")
    Lam = np.asarray(Lam, dtype=float)
    if Lam.ndim == 1:
        Lam = np.diag(Lam)
    n = U.shape[0]
    ind = rank_indicator(state, n)
    if kappa is None:
        return U @ ind @ ind @ Lam @ V.T
    kappa = np.asarray(kappa, dtype=float)
    if kappa.ndim == 1:
        kappa = np.diag(kappa)
    kinv = np.diag(1.0 / np.diag(kappa))
    return U @ kappa @ ind @ ind @ kinv @ Lam @ V.T


def svd_factors(Pi):
    """SVD of ``Pi`` as ``(U, Lam, V)`` with nonincreasing ``Lam`` (diagonal matrix)."""
    U, s, Vt = np.linalg.svd(np.asarray(Pi, dtype=float))
    return U, np.diag(s), Vt.T


def pi_from_factors(alpha, beta) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 2 or alpha.ndim != 2:
        raise ValueError("alpha and beta must be 2-d (use shapes (0, n) and (n, 0) for rank 0)")
    if beta.shape[1] != alpha.shape[0] or beta.shape[0] != alpha.shape[1]:
        raise ValueError(f"non-conformable factors: beta {beta.shape}, alpha {alpha.shape}")
    return beta @ alpha


def matrix_rank(M, tol: float = RANK_TOL) -> int:
    """Integer rank using a singular-value threshold relative to the largest one."""
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int((s > tol * s[0]).sum())


def normalize_factors(alpha, beta):
    """Rotate ``(alpha, beta)`` so ``beta`` has an identity top block; ``Pi`` is unchanged."""
    beta = np.asarray(beta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    r = beta.shape[1]
    if r == 0:
        return alpha, beta
    top = beta[:r, :r]
    return top @ alpha, beta @ np.linalg.inv(top)


def _as_array(y):
    return np.asarray(getattr(y, "y", y), dtype=float)


def _pi_usable(Pi, T, n):
    Pi = np.asarray(Pi, dtype=float)
    if Pi.ndim == 2:
        Pi = np.broadcast_to(Pi, (T - 2, n, n))
    if Pi.shape == (T, n, n):
        return Pi[2:]
    if Pi.shape == (T - 2, n, n):
        return Pi
    raise ValueError(f"Pi must have shape {(T, n, n)} or {(T - 2, n, n)}, got {Pi.shape}")


def residuals(y, params: StaticParams, Pi) -> np.ndarray:
    """Residuals ``dy_t - c - y_{t-1} Pi_t - dy_{t-1} B`` for ``t = 2..T-1``.

    ``Pi`` may be a single ``(n, n)`` matrix, a length-``T`` sequence (first two
    entries ignored) or a length ``T - 2`` sequence aligned with the output.
    """
    Y = _as_array(y)
    if Y.ndim != 2:
        raise ValueError("y must be a T x n matrix")
    T, n = Y.shape
    if n != params.n:
        raise ValueError(f"y has {n} columns but params have dimension {params.n}")
    if T < 3:
        raise ValueError("need at least 3 observations")
    Pi = _pi_usable(Pi, T, n)
    dY = np.diff(Y, axis=0)
    ec = np.einsum("ti,tij->tj", Y[1:-1], Pi)
    return dY[1:] - params.c - ec - dY[:-1] @ params.B


def mvn_logpdf_rows(E, Sigma) -> np.ndarray:
    """Zero-mean Gaussian log-density of each row of ``E``."""
    try:
        L = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError:
        raise ValueError("Sigma is not positive definite") from None
    n = Sigma.shape[0]
    Z = linalg.solve_triangular(L, np.asarray(E).T, lower=True)
    logdet = 2.0 * np.log(np.diag(L)).sum()
    return -0.5 * (n * LOG_2PI + logdet + (Z * Z).sum(axis=0))


def conditional_loglik(y, params: StaticParams, Pi, per_time: bool = False):
    """Gaussian log-likelihood of the usable observations given ``Pi``."""
    ll = mvn_logpdf_rows(residuals(y, params, Pi), params.Sigma)
    return ll if per_time else float(ll.sum())


def _ols_partial(Y):
    """Residual blocks for the static VECM after partialling out ``[1, dy_{t-1}]``."""
    dY = np.diff(Y, axis=0)
    R0 = dY[1:]
    R1 = Y[1:-1]
    X = np.column_stack([np.ones(len(R0)), dY[:-1]])
    proj = lambda A: A - X @ np.linalg.lstsq(X, A, rcond=None)[0]
    return R0, R1, X, proj(R0), proj(R1)


def reduced_rank_fit(y, rank: int):
    """Static Gaussian reduced-rank VECM fit (Johansen's procedure, constant unrestricted).

    Returns a dict with ``alpha`` (r, n), ``beta`` (n, r) normalized with an
    identity top block, ``params`` (StaticParams) and ``loglik``.
    """
    Y = _as_array(y)
    T, n = Y.shape
    if not 0 <= rank <= n:
        raise ValueError(f"rank must lie in 0..{n}")
    R0, R1, X, U0, U1 = _ols_partial(Y)
    m = len(R0)
    S00 = U0.T @ U0 / m
    S11 = U1.T @ U1 / m
    S01 = U0.T @ U1 / m
    if rank == 0:
        beta = np.zeros((n, 0))
        alpha = np.zeros((0, n))
    else:
        # generalized eigenproblem S10 S00^-1 S01 v = lam S11 v
        # a constant series leaves S00 singular; a scale-relative ridge keeps the fit defined
        ridge = 1e-10 * max(np.trace(S00) / n, 1.0) * np.eye(n)
        M = S01.T @ np.linalg.solve(S00 + ridge, S01)
        lam, vecs = linalg.eigh(M, S11 + 1e-12 * np.eye(n))
        order = np.argsort(lam)[::-1]
        b = vecs[:, order[:rank]]
        a = np.linalg.lstsq(U1 @ b, U0, rcond=None)[0]  # (r, n)
        alpha, beta = normalize_factors(a, b)
    Pi = beta @ alpha
    W = R0 - R1 @ Pi
    G = np.linalg.lstsq(X, W, rcond=None)[0]
    E = W - X @ G
    Sigma = E.T @ E / m
    Sigma = 0.5 * (Sigma + Sigma.T) + 1e-12 * np.eye(n)
    params = StaticParams(c=G[0], B=G[1:], Sigma=Sigma)
    ll = float(mvn_logpdf_rows(E, Sigma).sum())
    return {"alpha": alpha, "beta": beta, "params": params, "loglik": ll, "rank": rank}
