import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import multivariate_normal

from bmvs.core import DataSet, HyperParams
from bmvs.errors import ParameterError
from bmvs.oracle import (
    OracleContext,
    all_models,
    exact_inclusion_probs,
    exact_model_posterior,
    log_posterior_ratio,
    log_q_identity,
    model_quantities,
    posterior_ratio,
)
from bmvs.randdist import SpdMatrix


def _ctx(seed, n=10, p=3, q=2, t0=0.05, t1=3.0, phi=0.4, s2b=0.8, signal=1.0):
    r = np.random.default_rng(seed)
    X = r.standard_normal((n, p))
    Y = signal * X[:, :1] @ np.ones((1, q)) + r.standard_normal((n, q))
    m = r.standard_normal((q, q))
    S = SpdMatrix(m @ m.T + np.eye(q))
    hp = HyperParams(t0, t1, phi, q + 1.0, np.eye(q))
    return OracleContext(DataSet(X, Y), s2b, S, hp)


def _dense_marginal_posterior(ctx):
    # P(Z=k|Y) from vec(Y) ~ N(0, (I kron X) V_k (I kron X)' + S kron I) times the Bernoulli prior
    X, Y = ctx.data.X, ctx.data.Y
    n, p = X.shape
    q = Y.shape[1]
    A = np.kron(np.eye(q), X)
    vec = Y.reshape(-1, order="F")
    base = np.kron(ctx.sigma_y.entries, np.eye(n))
    phi = ctx.hp.phi
    out = {}
    for k in itertools.product((0, 1), repeat=p):
        v = ctx.sigma_beta_sq * np.where(np.array(k) == 1, ctx.hp.tau1_sq, ctx.hp.tau0_sq)
        V = np.diag(np.tile(v, q))
        lp = multivariate_normal(cov=A @ V @ A.T + base).logpdf(vec)
        out[k] = lp + sum(k) * np.log(phi) + (p - sum(k)) * np.log1p(-phi)
    logs = np.array(list(out.values()))
    w = np.exp(logs - logs.max())
    w /= w.sum()
    return dict(zip(out, w))


class TestModelQuantities:
    def test_zero_column(self):
        r = np.random.default_rng(0)
        Y = r.standard_normal((6, 1))
        ctx = OracleContext(DataSet(np.zeros((6, 1)), Y), 0.5, SpdMatrix([[2.0]]), HyperParams(0.1, 2.0, 0.5, 2.0, np.eye(1)))
        for k in ([0], [1]):
            mq = model_quantities(k, ctx)
            assert mq.r_tilde_k == pytest.approx(float(Y[:, 0] @ Y[:, 0]) / 2.0, rel=1e-12)
            assert mq.q_k == pytest.approx(1.0, rel=1e-12)

    def test_null_model_tiny_spike(self):
        ctx = _ctx(1, t0=1e-12)
        mq = model_quantities([0, 0, 0], ctx)
        vec = ctx.data.Y.reshape(-1, order="F")
        base = vec @ np.kron(ctx.sigma_y.inverse, np.eye(ctx.data.n)) @ vec
        assert np.allclose(mq.d_k, 1 / (0.8 * 1e-12))
        assert mq.r_tilde_k == pytest.approx(base, rel=1e-9)

    def test_r_tilde_is_penalised_residual(self):
        ctx = _ctx(2, n=4, p=2, q=2)
        k = np.array([1, 0])
        mq = model_quantities(k, ctx)
        X, Y = ctx.data.X, ctx.data.Y
        sinv = ctx.sigma_y.inverse
        vec = Y.reshape(-1, order="F")
        beta = np.linalg.solve(mq.w_k, np.kron(sinv, X.T) @ vec)
        e = vec - np.kron(np.eye(2), X) @ beta
        expected = e @ np.kron(sinv, np.eye(4)) @ e + beta @ np.kron(np.eye(2), np.diag(mq.d_k)) @ beta
        assert mq.r_tilde_k == pytest.approx(expected, rel=1e-10)

    def test_d_k_entries_and_w_spd(self):
        ctx = _ctx(3)
        mq = model_quantities([1, 0, 1], ctx)
        allowed = {1 / (0.8 * 3.0), 1 / (0.8 * 0.05)}
        assert all(any(np.isclose(d, a) for a in allowed) for d in mq.d_k)
        SpdMatrix(0.5 * (mq.w_k + mq.w_k.T))
        assert mq.s_n == pytest.approx(0.4 / 0.6)

    def test_bad_model_vector(self):
        with pytest.raises(ParameterError):
            model_quantities([0, 2, 0], _ctx(3))


class TestPosteriorRatio:
    def test_identical_models(self):
        assert posterior_ratio([1, 0, 1], [1, 0, 1], _ctx(4)) == 1.0

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 500), bits=st.lists(st.integers(0, 7), min_size=3, max_size=3))
    def test_chain_rule(self, seed, bits):
        ctx = _ctx(seed)
        k, t, j = ([(b >> s) & 1 for s in range(3)] for b in bits)
        lhs = log_posterior_ratio(k, t, ctx) + log_posterior_ratio(t, j, ctx)
        rhs = log_posterior_ratio(k, j, ctx)
        assert np.exp(lhs) == pytest.approx(np.exp(rhs), rel=1e-10)

    def test_finite_and_positive(self):
        ctx = _ctx(5, signal=3.0)
        for k in all_models(3):
            r = posterior_ratio(k, [0, 0, 0], ctx)
            assert np.isfinite(r) and r > 0


class TestInclusion:
    def test_equal_tau_gives_phi(self):
        ctx = _ctx(6, t0=1.5, t1=1.5, phi=0.27)
        assert np.allclose(exact_inclusion_probs(ctx), 0.27, rtol=1e-12)

    def test_duplicate_columns(self):
        r = np.random.default_rng(7)
        x = r.standard_normal((12, 1))
        X = np.hstack([x, x, r.standard_normal((12, 1))])
        Y = 0.8 * x @ np.ones((1, 2)) + r.standard_normal((12, 2))
        ctx = OracleContext(DataSet(X, Y), 1.0, SpdMatrix(np.eye(2)), HyperParams(0.05, 3.0, 0.3, 3.0, np.eye(2)))
        probs = exact_inclusion_probs(ctx)
        assert probs[0] == pytest.approx(probs[1], rel=1e-10)

    @pytest.mark.parametrize("seed", [8, 9])
    def test_matches_dense_integration(self, seed):
        ctx = _ctx(seed, n=9, p=2, q=2, signal=0.7)
        dense = _dense_marginal_posterior(ctx)
        exact = exact_model_posterior(ctx)
        for k in dense:
            assert exact[k] == pytest.approx(dense[k], rel=1e-8, abs=1e-14)
        incl = exact_inclusion_probs(ctx)
        assert incl[0] == pytest.approx(sum(w for k, w in dense.items() if k[0]), rel=1e-8)

    def test_enumeration_limit(self):
        r = np.random.default_rng(0)
        d = DataSet(r.standard_normal((20, 13)), r.standard_normal((20, 1)))
        with pytest.raises(ParameterError):
            OracleContext(d, 1.0, SpdMatrix([[1.0]]), HyperParams(0.1, 1.0, 0.5, 2.0, np.eye(1)))


class TestInvariants:
    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000), bits=st.integers(0, 15))
    def test_log_q_two_ways(self, seed, bits):
        ctx = _ctx(seed, n=8, p=4, q=2)
        k = [(bits >> s) & 1 for s in range(4)]
        a = model_quantities(k, ctx).log_q_k
        b = log_q_identity(k, ctx)
        assert a == pytest.approx(b, rel=1e-8, abs=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000), sub=st.integers(0, 15), extra=st.integers(0, 15))
    def test_nested_models_fit_better(self, seed, sub, extra):
        ctx = _ctx(seed, n=10, p=4, q=2)
        j = [(sub >> s) & 1 for s in range(4)]
        k = [((sub | extra) >> s) & 1 for s in range(4)]
        rk = model_quantities(k, ctx).r_tilde_k
        rj = model_quantities(j, ctx).r_tilde_k
        assert rk <= rj + 1e-9 * abs(rj)
