import numpy as np
import pytest
from scipy.stats import invwishart

from mementum import sampler as smp
from mementum.sampler import (
    FactorPaths,
    McmcSettings,
    PriorSpec,
    SamplerError,
    run_mcmc,
    sample_rank_path,
    sample_statics,
    sample_tvp_factors,
    sample_transition_matrix,
)
from mementum.synth import Drift, FactorScript, ScenarioSpec, gen_series
from mementum.vecm import StaticParams, reduced_rank_fit
from oracles import STRONG_FACTORS, STRONG_STATICS


def _true_factors(T, b=-1.0, alpha=(-0.5, 0.5), second=(0.3, 0.2), q=1e-4):
    a = np.zeros((T, 2, 2))
    a[:, 0] = alpha
    a[:, 1] = second
    beta = np.broadcast_to(np.eye(2), (T, 2, 2)).copy()
    beta[:, 1, 0] = b
    return FactorPaths(a, beta, np.full(4, q), np.full(1, q))


class TestSpecs:
    def test_defaults(self):
        p = PriorSpec()
        assert p.coef_variance == 10 and p.dof(2) == 4 and p.a_stay == 10 and p.a_move == 1
        assert p.initial_factor_variance == 10
        conc = p.dirichlet(3)
        assert np.array_equal(np.diag(conc), [10, 10, 10]) and conc[0, 1] == 1
        s = McmcSettings()
        assert (s.n_draws, s.n_burnin, s.thin) == (5000, 1000, 1)

    @pytest.mark.parametrize("kw", [{"a_stay": 0}, {"tvp_scale": -1}, {"coef_variance": -1}])
    def test_prior_validation(self, kw):
        with pytest.raises(ValueError):
            PriorSpec(**kw)

    @pytest.mark.parametrize("kw", [{"n_draws": 0}, {"thin": 0}, {"n_burnin": -1}])
    def test_settings_validation(self, kw):
        with pytest.raises(ValueError):
            McmcSettings(**kw)


class TestRankPath:
    def test_sticky_chain_recovers_constant_state(self):
        spec = ScenarioSpec(200, STRONG_STATICS, STRONG_FACTORS, path=tuple([2] * 200), seed=0)
        pair, _ = gen_series(spec)
        f = _true_factors(200)
        P = np.full((3, 3), 0.0005) + np.eye(3) * 0.9985
        rng = np.random.default_rng(0)
        hits = sum(np.all(sample_rank_path(pair.y, STRONG_STATICS, f, P, rng).states == 2) for _ in range(300))
        assert hits / 300 > 0.99

    def test_state_loglik_shape_and_first_rows(self):
        y = np.random.default_rng(1).normal(size=(20, 2))
        ll = smp.state_loglik(y, STRONG_STATICS, _true_factors(20))
        assert ll.shape == (20, 3)
        assert np.all(ll[:2] == 0)


class TestTransitionMatrix:
    def test_unvisited_rows_follow_prior(self):
        rng = np.random.default_rng(2)
        conc = PriorSpec().dirichlet(3)
        draws = np.array([sample_transition_matrix(np.ones(50, dtype=int), conc, rng) for _ in range(4000)])
        prior_mean = conc / conc.sum(axis=1, keepdims=True)
        assert np.abs(draws[:, 1:].mean(axis=0) - prior_mean[1:]).max() < 0.01
        assert draws[:, 0, 0].mean() > 0.9

    def test_alternating_path(self):
        path = np.tile([1, 2], 500)
        rng = np.random.default_rng(3)
        P = np.array([sample_transition_matrix(path, np.ones((2, 2)), rng) for _ in range(500)])
        assert abs(P[:, 0, 1].mean() - 1) < 0.05

    def test_dominant_diagonal_gives_identity(self):
        conc = np.eye(3) * 1e8 + 1
        P = sample_transition_matrix(np.array([1, 2, 3, 1]), conc, np.random.default_rng(4))
        assert np.abs(P - np.eye(3)).max() < 1e-3

    def test_rows_sum_to_one(self):
        P = sample_transition_matrix(np.array([1, 1, 2, 3]), PriorSpec(), np.random.default_rng(5), N=3)
        assert np.abs(P.sum(axis=1) - 1).max() < 1e-12

    def test_prior_spec_needs_n(self):
        with pytest.raises(ValueError):
            sample_transition_matrix(np.array([1, 2]), PriorSpec(), np.random.default_rng(0))


class TestFactors:
    def test_rank_zero_paths_are_prior_walks(self):
        T = 40
        prior = PriorSpec(initial_factor_variance=1.0, fixed_innovation_variance=0.05)
        y = np.random.default_rng(6).normal(size=(T, 2)).cumsum(axis=0)
        path = np.ones(T, dtype=int)
        rng = np.random.default_rng(7)
        cur = _true_factors(T)
        draws = []
        for _ in range(3000):
            cur = sample_tvp_factors(y, path, STRONG_STATICS, prior, rng, cur)
            draws.append(cur.alpha[:, 0, 0])
        var = np.var(draws, axis=0)
        expected = 1.0 + 0.05 * np.arange(T)
        assert np.abs(var / expected - 1).max() < 0.15

    def test_zero_innovation_matches_static_fit(self):
        spec = ScenarioSpec(500, STRONG_STATICS, STRONG_FACTORS, path=tuple([2] * 500), seed=9)
        pair, _ = gen_series(spec)
        prior = PriorSpec(fixed_innovation_variance=0.0)
        draws = run_mcmc(pair.y, prior, McmcSettings(n_draws=600, n_burnin=200, seed=1))
        assert np.all(draws.alpha == draws.alpha[:, :1])  # constant in time
        b = draws.beta[:, 0, 1, 0]
        a = draws.alpha[:, 0, 0, :]
        fit = reduced_rank_fit(pair.y, 1)
        assert abs(b.mean() - fit["beta"][1, 0]) < 4 * b.std() + 0.01
        assert np.all(np.abs(a.mean(axis=0) - fit["alpha"][0]) < 4 * a.std(axis=0) + 0.01)

    @pytest.mark.slow
    def test_tracks_drifting_relation(self):
        T = 400
        fs = FactorScript([[-0.5, 0.5]], [[1.0], [-1.0]], beta_drift=Drift("sine", amplitude=0.5, period=T))
        spec = ScenarioSpec(T, STRONG_STATICS, fs, path=tuple([2] * T), seed=10)
        pair, truth = gen_series(spec)
        prior = PriorSpec(init_probs=(0.0, 1.0, 0.0), a_stay=1e6)
        draws = run_mcmc(pair.y, prior, McmcSettings(n_draws=1500, n_burnin=500, seed=2))
        b_hat = draws.beta[:, :, 1, 0].mean(axis=0)
        r = np.corrcoef(b_hat[2:], truth.beta[2:, 1, 0])[0, 1]
        assert r > 0.8


class TestStatics:
    def test_dogmatic_prior_zeroes_coefficients(self):
        y = np.random.default_rng(0).normal(size=(30, 2)).cumsum(axis=0)
        st = sample_statics(y, np.ones(30, dtype=int), _true_factors(30), PriorSpec(coef_variance=0.0),
                            np.random.default_rng(1))
        assert np.array_equal(st.c, np.zeros(2)) and np.array_equal(st.B, np.zeros((2, 2)))

    def test_zero_residual_sigma_is_inverse_wishart(self):
        T = 10
        y = np.ones((T, 2))
        prior = PriorSpec(coef_variance=0.0, sigma_dof=4)
        rng = np.random.default_rng(2)
        S = np.array([sample_statics(y, np.ones(T, dtype=int), _true_factors(T), prior, rng).Sigma
                      for _ in range(10_000)])
        expected = invwishart(df=4 + (T - 2), scale=np.eye(2)).mean()
        assert np.allclose(expected, np.eye(2) / 9)
        assert np.abs(np.diag(S.mean(axis=0)) / np.diag(expected) - 1).max() < 0.05

    def test_consistency_on_long_sample(self):
        statics = StaticParams([0.1, -0.2], [[0.3, 0.1], [0.0, -0.2]], [[1.0, 0.2], [0.2, 0.5]])
        spec = ScenarioSpec(10_000, statics, STRONG_FACTORS, path=tuple([2] * 10_000), seed=3)
        pair, truth = gen_series(spec)
        f = _true_factors(10_000)
        rng = np.random.default_rng(4)
        draws = []
        Sigma = statics.Sigma
        for _ in range(400):
            st = sample_statics(pair.y, truth.path, f, PriorSpec(), rng, Sigma=Sigma)
            Sigma = st.Sigma
            draws.append(np.concatenate([st.c, st.B.ravel(), st.Sigma.ravel()]))
        draws = np.array(draws)
        truth_vec = np.concatenate([statics.c, statics.B.ravel(), statics.Sigma.ravel()])
        assert np.all(np.abs(draws.mean(axis=0) - truth_vec) <= 3 * draws.std(axis=0) + 1e-12)

    def test_ridge_fallback_counted(self, monkeypatch):
        y = np.random.default_rng(5).normal(size=(20, 2))
        real = np.linalg.cholesky
        calls = {"n": 0}

        def flaky(a, *args, **kw):
            calls["n"] += 1
            if calls["n"] == 1:
                raise np.linalg.LinAlgError("not positive definite")
            return real(a, *args, **kw)

        monkeypatch.setattr(smp.np.linalg, "cholesky", flaky)
        counters = {}
        sample_statics(y, np.ones(20, dtype=int), _true_factors(20), PriorSpec(), np.random.default_rng(0),
                       Sigma=np.eye(2), counters=counters)
        assert counters["ridge"] == 1


@pytest.fixture(scope="module")
def short():
    spec = ScenarioSpec(60, STRONG_STATICS, STRONG_FACTORS, path=tuple([1] * 30 + [2] * 30), seed=1)
    pair, _ = gen_series(spec)
    return pair.y


class TestRunMcmc:
    def test_determinism(self, short):
        s = McmcSettings(n_draws=40, n_burnin=10, seed=7)
        a, b = run_mcmc(short, settings=s), run_mcmc(short, settings=s)
        for k in ("states", "P", "c", "B", "Sigma", "loglik", "alpha", "beta"):
            assert np.array_equal(getattr(a, k), getattr(b, k))

    def test_invariants_and_thinning(self, short):
        d = run_mcmc(short, settings=McmcSettings(n_draws=30, n_burnin=5, thin=2, seed=1))
        assert len(d) == 30 and d.counters["sweeps"] == 65
        assert np.all((d.states >= 1) & (d.states <= 3))
        assert np.abs(d.P.sum(axis=2) - 1).max() < 1e-12
        assert all(np.linalg.eigvalsh(S).min() > 0 for S in d.Sigma)
        f = d.factors(0)
        for t, s in enumerate(d.states[0]):
            assert f.beta[t].shape == (2, s - 1)
            if s > 1:
                assert np.allclose(f.beta[t][:s - 1], np.eye(s - 1))

    def test_step_errors_name_draw_and_step(self, short, monkeypatch):
        def boom(*a, **k):
            raise np.linalg.LinAlgError("broken")

        monkeypatch.setattr(smp, "sample_statics", boom)
        with pytest.raises(SamplerError, match=r"draw 0: step statics: broken"):
            run_mcmc(short, settings=McmcSettings(n_draws=2, n_burnin=0))

    def test_rejects_nan(self):
        y = np.zeros((20, 2))
        y[5, 0] = np.nan
        with pytest.raises(ValueError):
            run_mcmc(y, settings=McmcSettings(n_draws=1, n_burnin=0))

    def test_zero_post_counts_do_not_crash(self):
        y = np.column_stack([np.log(np.linspace(10, 20, 300)), np.zeros(300)])
        d = run_mcmc(y, settings=McmcSettings(n_draws=20, n_burnin=20, seed=0))
        assert np.all(np.isfinite(d.Sigma))
