"""Gibbs sampler for the VECM with Markov-switching cointegration rank.

One sweep draws, in order,

1. the rank path ``S_{1:T}`` by forward filtering / backward sampling,
2. the transition matrix ``P`` row by row from its Dirichlet conditional,
3. the time-varying factors ``alpha_t`` and ``beta_t`` (random walks, drawn
   jointly in time by a simulation smoother) and their innovation variances,
4. ``c``, ``B`` from their Gaussian conditional and ``Sigma`` from an
   inverse-Wishart.

Factors are kept at full rank ``n``: ``beta_t`` is unit lower-triangular and
``alpha_t`` is ``n x n``.  A day in state ``s`` uses the first ``s - 1``
columns of ``beta_t`` and rows of ``alpha_t``, so the rank can change without
transdimensional moves.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats
from scipy.linalg import cho_solve, solve_triangular

from . import hmm
from .smoother import data_blocks, sample_rw_states
from .vecm import (
    CointFactors,
    RankPath,
    StaticParams,
    conditional_loglik,
    mvn_logpdf_rows,
    normalize_factors,
    reduced_rank_fit,
)

log = logging.getLogger(__name__)

RIDGE = 1e-8


class SamplerError(RuntimeError):
    """A Gibbs step failed; the message names the draw and the step."""


@dataclass(frozen=True)
class PriorSpec:
    coef_variance: float = 10.0
    sigma_dof: float | None = None  # None -> n + 2
    sigma_scale: float = 1.0
    a_stay: float = 10.0
    a_move: float = 1.0
    tvp_shape: float = 3.0
    tvp_scale: float = 1e-4
    initial_factor_variance: float = 10.0
    fixed_innovation_variance: float | None = None
    init_probs: tuple | None = None  # None -> uniform over states

    def __post_init__(self):
        positive = {
            "sigma_scale": self.sigma_scale,
            "a_stay": self.a_stay,
            "a_move": self.a_move,
            "tvp_shape": self.tvp_shape,
            "tvp_scale": self.tvp_scale,
            "initial_factor_variance": self.initial_factor_variance,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.coef_variance < 0:
            raise ValueError("coef_variance must be nonnegative")
        if self.fixed_innovation_variance is not None and self.fixed_innovation_variance < 0:
            raise ValueError("fixed_innovation_variance must be nonnegative")

    def dof(self, n: int) -> float:
        return n + 2.0 if self.sigma_dof is None else float(self.sigma_dof)

    def dirichlet(self, N: int) -> np.ndarray:
        conc = np.full((N, N), self.a_move, dtype=float)
        np.fill_diagonal(conc, self.a_stay)
        return conc

    def initial_distribution(self, N: int) -> np.ndarray:
        if self.init_probs is None:
            return np.full(N, 1.0 / N)
        p = np.asarray(self.init_probs, dtype=float)
        return p / p.sum()


@dataclass(frozen=True)
class McmcSettings:
    n_draws: int = 5000
    n_burnin: int = 1000
    thin: int = 1
    seed: int = 0
    keep_factors: bool = True

    def __post_init__(self):
        if self.n_draws < 1 or self.thin < 1 or self.n_burnin < 0:
            raise ValueError("need n_draws >= 1, thin >= 1 and n_burnin >= 0")


@dataclass
class FactorPaths:
    """Full-rank latent factor paths and their random-walk innovation variances."""

    alpha: np.ndarray  # (T, n, n); row k loads relation k
    beta: np.ndarray  # (T, n, n); unit lower-triangular, column k is relation k
    q_alpha: np.ndarray  # (n * n,)
    q_beta: np.ndarray  # (n (n - 1) / 2,)

    @property
    def n(self) -> int:
        return self.alpha.shape[1]

    def pi_by_rank(self, Y_lag) -> np.ndarray:
        """``y_{t-1} Pi_t`` for every rank: array (n + 1, len(Y_lag), n)."""
        m = len(Y_lag)
        yb = np.einsum("ti,tik->tk", Y_lag, self.beta[-m:])
        terms = yb[:, :, None] * self.alpha[-m:]
        out = np.zeros((self.n + 1, m, self.n))
        out[1:] = np.cumsum(terms, axis=1).transpose(1, 0, 2)
        return out

    def pi(self, states) -> np.ndarray:
        """Pi_t for each t under the given 1-based states: (T, n, n)."""
        ranks = np.asarray(states) - 1
        n = self.n
        mask = (np.arange(n)[None, :] < ranks[:, None]).astype(float)
        return np.einsum("tik,tk,tkj->tij", self.beta, mask, self.alpha)

    def normalized(self, states) -> CointFactors:
        betas, alphas = [], []
        for t, s in enumerate(np.asarray(states)):
            r = int(s) - 1
            a, b = normalize_factors(self.alpha[t, :r], self.beta[t, :, :r])
            alphas.append(a)
            betas.append(b)
        return CointFactors(beta=betas, alpha=alphas)

    def copy(self) -> "FactorPaths":
        return FactorPaths(self.alpha.copy(), self.beta.copy(), self.q_alpha.copy(), self.q_beta.copy())


def _free_beta_index(n):
    return [(i, k) for k in range(n) for i in range(k + 1, n)]


def _prepare(y):
    Y = np.asarray(getattr(y, "y", y), dtype=float)
    if Y.ndim != 2 or len(Y) < 3:
        raise ValueError("y must be a T x n matrix with T >= 3")
    dY = np.diff(Y, axis=0)
    return Y, dY[1:], dY[:-1], Y[1:-1]


def state_loglik(y, params: StaticParams, factors: FactorPaths) -> np.ndarray:
    """Log-likelihood of each time under each state, shape (T, n + 1).

    The first two rows are zero because those times carry no observation.
    """
    Y, dY, dY_lag, Y_lag = _prepare(y)
    base = dY - params.c - dY_lag @ params.B
    ec = factors.pi_by_rank(Y_lag)
    N = params.n + 1
    E = base[None] - ec
    ll = mvn_logpdf_rows(E.reshape(-1, params.n), params.Sigma).reshape(N, -1).T
    out = np.zeros((len(Y), N))
    out[2:] = ll
    return out


def sample_rank_path(y, params: StaticParams, factors: FactorPaths, P, rng, init=None) -> RankPath:
    """Forward-filter / backward-sample the hidden state path."""
    ll = state_loglik(y, params, factors)
    path = hmm.ffbs(ll, P, rng, init)
    return RankPath(path + 1)


def transition_counts(path, N: int) -> np.ndarray:
    s = np.asarray(getattr(path, "states", path)) - 1
    counts = np.zeros((N, N))
    np.add.at(counts, (s[:-1], s[1:]), 1.0)
    return counts


def sample_transition_matrix(path, prior, rng, N: int | None = None) -> np.ndarray:
    """Row-wise Dirichlet draw given transition counts of the path.

    ``prior`` is either a ``PriorSpec`` (needs ``N``) or an ``(N, N)``
    concentration matrix.
    """
    if isinstance(prior, PriorSpec):
        if N is None:
            raise ValueError("N is required when prior is a PriorSpec")
        conc = prior.dirichlet(N)
    else:
        conc = np.asarray(prior, dtype=float)
    conc = conc + transition_counts(path, conc.shape[0])
    P = np.vstack([rng.dirichlet(row) for row in conc])
    return P / P.sum(axis=1, keepdims=True)


def _sample_q(x, prior: PriorSpec, rng):
    if prior.fixed_innovation_variance is not None:
        return np.full(x.shape[1], float(prior.fixed_innovation_variance))
    T = x.shape[0]
    ssq = (np.diff(x, axis=0) ** 2).sum(axis=0)
    shape = prior.tvp_shape + 0.5 * (T - 1)
    scale = prior.tvp_scale + 0.5 * ssq
    return scale / rng.gamma(shape, size=x.shape[1])


def sample_tvp_factors(y, path, statics: StaticParams, prior: PriorSpec, rng, current: FactorPaths) -> FactorPaths:
    """Draw ``alpha | beta``, then ``beta | alpha``, then both innovation variances."""
    Y, dY, dY_lag, Y_lag = _prepare(y)
    T, n = Y.shape
    states = np.asarray(getattr(path, "states", path))
    ranks = states[2:] - 1
    active = (np.arange(n)[None, :] < ranks[:, None]).astype(float)  # (T-2, n)
    Sinv = np.linalg.inv(statics.Sigma)
    base = dY - statics.c - dY_lag @ statics.B
    v0 = prior.initial_factor_variance
    out = current.copy()

    # alpha: obs_t = sum_k z_tk alpha_t[k, :] with z = y_{t-1} beta_t
    z = np.einsum("ti,tik->tk", Y_lag, out.beta[2:]) * active
    H = np.zeros((T, n, n * n))
    H[2:] = (z[:, None, :, None] * np.eye(n)[None, :, None, :]).reshape(T - 2, n, n * n)
    obs = np.zeros((T, n))
    obs[2:] = base
    prec, info = data_blocks(H, obs, Sinv)
    a = sample_rw_states(prec, info, out.q_alpha, v0, rng)
    out.alpha = a.reshape(T, n, n)

    # beta: free entries b_ik (i > k) enter through y_{t-1,i} alpha_t[k, :]
    free = _free_beta_index(n)
    if free:
        alpha_act = out.alpha[2:] * active[:, :, None]
        offset = np.einsum("tk,tkj->tj", Y_lag, alpha_act)
        Hb = np.zeros((T, n, len(free)))
        for col, (i, k) in enumerate(free):
            Hb[2:, :, col] = Y_lag[:, i, None] * alpha_act[:, k, :]
        obs_b = np.zeros((T, n))
        obs_b[2:] = base - offset
        prec, info = data_blocks(Hb, obs_b, Sinv)
        b = sample_rw_states(prec, info, out.q_beta, v0, rng)
        beta = np.broadcast_to(np.eye(n), (T, n, n)).copy()
        for col, (i, k) in enumerate(free):
            beta[:, i, k] = b[:, col]
        out.beta = beta
        out.q_beta = _sample_q(b, prior, rng)
    out.q_alpha = _sample_q(a, prior, rng)
    return out


def _regression(y, path, factors: FactorPaths):
    Y, dY, dY_lag, Y_lag = _prepare(y)
    states = np.asarray(getattr(path, "states", path))
    Pi = factors.pi(states)[2:]
    W = dY - np.einsum("ti,tij->tj", Y_lag, Pi)
    X = np.column_stack([np.ones(len(W)), dY_lag])
    return X, W


def sample_statics(y, path, factors: FactorPaths, prior: PriorSpec, rng, Sigma=None, counters=None) -> StaticParams:
    """Draw ``(c, B) | Sigma`` then ``Sigma | c, B``.

    ``Sigma`` is the current covariance used for the coefficient step; when
    omitted the coefficient step conditions on the least-squares residual
    covariance.
    """
    X, W = _regression(y, path, factors)
    m, n = W.shape
    k = X.shape[1]
    if Sigma is None:
        G0 = np.linalg.lstsq(X, W, rcond=None)[0]
        E0 = W - X @ G0
        Sigma = E0.T @ E0 / max(m - k, 1) + 1e-8 * np.eye(n)
    v0 = prior.coef_variance
    if v0 == 0:
        G = np.zeros((k, n))
    else:
        Sinv = np.linalg.inv(Sigma)
        K = np.kron(Sinv, X.T @ X) + np.eye(k * n) / v0
        rhs = (X.T @ W @ Sinv).reshape(-1, order="F")
        K = 0.5 * (K + K.T)
        try:
            L = np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            log.warning("coefficient precision rank deficient; adding ridge %g", RIDGE)
            if counters is not None:
                counters["ridge"] = counters.get("ridge", 0) + 1
            L = np.linalg.cholesky(K + RIDGE * np.eye(k * n))
        mean = cho_solve((L, True), rhs)
        g = mean + solve_triangular(L.T, rng.standard_normal(k * n), lower=False)
        G = g.reshape(k, n, order="F")
    E = W - X @ G
    scale = prior.sigma_scale * np.eye(n) + E.T @ E
    Sigma_new = stats.invwishart.rvs(df=prior.dof(n) + m, scale=scale, random_state=rng)
    Sigma_new = np.atleast_2d(Sigma_new)
    Sigma_new = 0.5 * (Sigma_new + Sigma_new.T)
    return StaticParams(c=G[0], B=G[1:], Sigma=Sigma_new)


@dataclass
class SamplerState:
    path: RankPath
    P: np.ndarray
    statics: StaticParams
    factors: FactorPaths


@dataclass
class PosteriorDraws:
    """Retained draws, stacked along the first axis."""

    states: np.ndarray  # (D, T) int8, 1-based
    P: np.ndarray  # (D, N, N)
    c: np.ndarray  # (D, n)
    B: np.ndarray  # (D, n, n)
    Sigma: np.ndarray  # (D, n, n)
    loglik: np.ndarray  # (D, T - 2)
    alpha: np.ndarray | None = None  # (D, T, n, n)
    beta: np.ndarray | None = None  # (D, T, n, n)
    counters: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)

    @property
    def n_states(self) -> int:
        return self.P.shape[1]

    def statics(self, d: int) -> StaticParams:
        return StaticParams(self.c[d], self.B[d], self.Sigma[d])

    def factors(self, d: int) -> CointFactors:
        if self.alpha is None:
            raise ValueError("factor paths were not retained")
        fp = FactorPaths(self.alpha[d], self.beta[d], np.empty(0), np.empty(0))
        return fp.normalized(self.states[d])


def _window_fit(Y, width=None):
    """Rank-1 static fit on the window with the largest rank-1 vs rank-0 likelihood ratio."""
    T, n = Y.shape
    width = width or max(30, T // 6)
    if width >= T:
        return reduced_rank_fit(Y, 1)
    best, best_lr = None, -np.inf
    for lo in range(0, T - width + 1, max(1, width // 2)):
        win = Y[lo:lo + width]
        f1 = reduced_rank_fit(win, 1)
        lr = f1["loglik"] - reduced_rank_fit(win, 0)["loglik"]
        if lr > best_lr:
            best, best_lr = f1, lr
    return best


def initial_state(y, prior: PriorSpec, rng, rank: int | None = None) -> SamplerState:
    """Starting point for the chain.

    A static fit over the whole sample is misleading when the rank switches
    mid-sample, so the first cointegrating relation and its loadings come
    from the window of ``max(30, T // 6)`` days where a rank-1 model beats
    rank 0 by the widest margin.  Every day starts in ``rank`` (default 1);
    loading rows beyond the first are drawn from their prior.
    """
    Y = np.asarray(getattr(y, "y", y), dtype=float)
    T, n = Y.shape
    rank = 1 if rank is None else rank
    fit = _window_fit(Y)
    N = n + 1
    v0 = prior.initial_factor_variance
    q0 = prior.fixed_innovation_variance
    if q0 is None:
        q0 = prior.tvp_scale / (prior.tvp_shape + 1)  # prior mode
    alpha = np.zeros((T, n, n))
    alpha[:, :1] = fit["alpha"]
    if n > 1:
        walk = np.sqrt(v0) * rng.standard_normal((1, n - 1, n)) + np.cumsum(
            np.sqrt(q0) * rng.standard_normal((T, n - 1, n)), axis=0
        )
        alpha[:, 1:] = walk
    beta = np.broadcast_to(np.eye(n), (T, n, n)).copy()
    beta[:, :, :1] = fit["beta"]
    free = _free_beta_index(n)
    factors = FactorPaths(alpha, beta, np.full(n * n, q0), np.full(len(free), q0))
    P = prior.dirichlet(N)
    P = P / P.sum(axis=1, keepdims=True)
    return SamplerState(RankPath(np.full(T, rank + 1)), P, fit["params"], factors)


def gibbs_sweep(y, state: SamplerState, prior: PriorSpec, rng, counters=None) -> SamplerState:
    N = state.statics.n + 1
    init = prior.initial_distribution(N)
    step = "rank_path"
    try:
        path = sample_rank_path(y, state.statics, state.factors, state.P, rng, init)
        step = "transition_matrix"
        P = sample_transition_matrix(path, prior.dirichlet(N), rng)
        step = "tvp_factors"
        factors = sample_tvp_factors(y, path, state.statics, prior, rng, state.factors)
        step = "statics"
        statics = sample_statics(y, path, factors, prior, rng, Sigma=state.statics.Sigma, counters=counters)
    except Exception as exc:
        raise SamplerError(f"step {step}: {exc}") from exc
    return SamplerState(path, P, statics, factors)


def run_mcmc(y, priors: PriorSpec | None = None, settings: McmcSettings | None = None,
             init: SamplerState | None = None, progress=None) -> PosteriorDraws:
    """Run the Gibbs sampler and return the retained draws.

    ``progress``, if given, is called as ``progress(iteration, total)``.
    """
    priors = priors or PriorSpec()
    settings = settings or McmcSettings()
    Y = np.asarray(getattr(y, "y", y), dtype=float)
    if not np.all(np.isfinite(Y)):
        raise ValueError("y contains non-finite values")
    T, n = Y.shape
    N = n + 1
    rng = np.random.default_rng(settings.seed)
    state = init if init is not None else initial_state(Y, priors, rng)
    D = settings.n_draws
    draws = PosteriorDraws(
        states=np.empty((D, T), dtype=np.int8),
        P=np.empty((D, N, N)),
        c=np.empty((D, n)),
        B=np.empty((D, n, n)),
        Sigma=np.empty((D, n, n)),
        loglik=np.empty((D, T - 2)),
        alpha=np.empty((D, T, n, n)) if settings.keep_factors else None,
        beta=np.empty((D, T, n, n)) if settings.keep_factors else None,
    )
    counters = {"ridge": 0, "sweeps": 0}
    total = settings.n_burnin + D * settings.thin
    kept = 0
    for it in range(total):
        try:
            state = gibbs_sweep(Y, state, priors, rng, counters)
        except SamplerError as exc:
            raise SamplerError(f"draw {it}: {exc}") from exc.__cause__
        counters["sweeps"] += 1
        if progress is not None:
            progress(it + 1, total)
        if it < settings.n_burnin or (it - settings.n_burnin + 1) % settings.thin:
            continue
        s = state.path.states
        draws.states[kept] = s
        draws.P[kept] = state.P
        draws.c[kept] = state.statics.c
        draws.B[kept] = state.statics.B
        draws.Sigma[kept] = state.statics.Sigma
        Pi = state.factors.pi(s)[2:]
        draws.loglik[kept] = conditional_loglik(Y, state.statics, Pi, per_time=True)
        if settings.keep_factors:
            draws.alpha[kept] = state.factors.alpha
            draws.beta[kept] = state.factors.beta
        kept += 1
    draws.counters = counters
    draws.meta = {"priors": _asdict(priors), "settings": _asdict(settings), "T": T, "n": n}
    return draws


def _asdict(obj):
    d = asdict(obj)
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}


def sample_prior(T: int, n: int, prior: PriorSpec, rng) -> SamplerState:
    """Draw every unknown from its prior (used for simulation-based checks)."""
    N = n + 1
    P = np.vstack([rng.dirichlet(row) for row in prior.dirichlet(N)])
    path = RankPath(hmm.simulate_chain(P, T, rng, init=prior.initial_distribution(N)) + 1)
    v0 = prior.initial_factor_variance
    free = _free_beta_index(n)

    def q_draw(k):
        if prior.fixed_innovation_variance is not None:
            return np.full(k, float(prior.fixed_innovation_variance))
        return prior.tvp_scale / rng.gamma(prior.tvp_shape, size=k)

    def walk(q):
        x0 = np.sqrt(v0) * rng.standard_normal(len(q))
        steps = rng.standard_normal((T - 1, len(q))) * np.sqrt(q)
        return np.vstack([x0, x0 + np.cumsum(steps, axis=0)])

    qa, qb = q_draw(n * n), q_draw(len(free))
    alpha = walk(qa).reshape(T, n, n)
    beta = np.broadcast_to(np.eye(n), (T, n, n)).copy()
    if free:
        b = walk(qb)
        for col, (i, k) in enumerate(free):
            beta[:, i, k] = b[:, col]
    k = n + 1
    G = np.sqrt(prior.coef_variance) * rng.standard_normal((k, n))
    Sigma = np.atleast_2d(stats.invwishart.rvs(df=prior.dof(n), scale=prior.sigma_scale * np.eye(n), random_state=rng))
    statics = StaticParams(G[0], G[1:], 0.5 * (Sigma + Sigma.T))
    return SamplerState(path, P, statics, FactorPaths(alpha, beta, qa, qb))


def with_statics(state: SamplerState, statics: StaticParams) -> SamplerState:
    return replace(state, statics=statics)
