import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from bmvs.core import (
    ChainState,
    DataSet,
    HyperParams,
    beta_conditional,
    calibrate_phi,
    compute_tau,
    sigma_beta_conditional,
    sigma_y_conditional,
    z_conditional,
    z_log_odds,
)
from bmvs.errors import DataError, ParameterError, ZeroVarianceError
from bmvs.randdist import SpdMatrix


def unit_var_data(rng, n, p, q):
    Y = rng.standard_normal((n, q))
    Y = (Y - Y.mean(0)) / Y.std(0, ddof=1)
    return DataSet(rng.standard_normal((n, p)), Y)


def binom_tail(k, p, phi):
    mpmath.mp.dps = 40
    phi = mpmath.mpf(phi)
    return float(mpmath.fsum(mpmath.binomial(p, j) * phi**j * (1 - phi) ** (p - j) for j in range(k, p + 1)))


def state_for(beta, z, s2b=1.0, sigma_y=None, X=None):
    beta = np.asarray(beta, dtype=float)
    q = beta.shape[1]
    fitted = np.zeros((1, q)) if X is None else X @ beta
    return ChainState(beta, np.asarray(z, dtype=np.int8), s2b, SpdMatrix(sigma_y if sigma_y is not None else np.eye(q)), fitted)


def hp_q(q, tau0_sq=0.01, tau1_sq=100.0, phi=0.5, **kw):
    return HyperParams(tau0_sq, tau1_sq, phi, q + 1.0, np.eye(q), **kw)


class TestDataSet:
    def test_row_mismatch_names_both_counts(self):
        with pytest.raises(DataError, match="5 rows.*4 rows"):
            DataSet(np.zeros((5, 2)), np.zeros((4, 1)))

    def test_rejects_nonfinite(self):
        X = np.zeros((3, 2))
        X[1, 1] = np.nan
        with pytest.raises(DataError):
            DataSet(X, np.ones((3, 1)))

    def test_needs_two_rows(self):
        with pytest.raises(DataError):
            DataSet(np.zeros((1, 2)), np.zeros((1, 1)))

    def test_subset_and_immutability(self, rng):
        d = DataSet(rng.standard_normal((4, 3)), rng.standard_normal((4, 2)), ["a", "b", "c"])
        s = d.subset([2, 0])
        assert s.x_names == ["c", "a"] and np.array_equal(s.X[:, 0], d.X[:, 2])
        with pytest.raises(ValueError):
            d.X[0, 0] = 1.0


class TestComputeTau:
    def test_large_p_branch(self, rng):
        t0, t1 = compute_tau(unit_var_data(rng, 200, 500, 5))
        expected = max(2500**2.1 / (100 * 200), math.log(200))
        assert t0 == pytest.approx(5.0e-4, rel=1e-9)
        assert t1 == pytest.approx(expected, rel=1e-9)
        # the quoted 685.0 is loose; the formula gives 683.351
        assert t1 == pytest.approx(683.3512962, rel=1e-9)

    def test_log_n_branch(self, rng):
        t0, t1 = compute_tau(unit_var_data(rng, 100, 2, 1))
        assert t1 == pytest.approx(math.log(100), rel=1e-9)
        assert t0 == pytest.approx(1 / 1000, rel=1e-9)

    def test_scaling(self, rng):
        d = unit_var_data(rng, 50, 10, 3)
        d2 = DataSet(d.X, d.Y * math.sqrt(2.0))
        a, b = compute_tau(d), compute_tau(d2)
        assert b[0] == pytest.approx(2 * a[0], rel=1e-12)
        assert b[1] == pytest.approx(2 * a[1], rel=1e-12)

    def test_zero_variance_names_column(self, rng):
        Y = rng.standard_normal((10, 3))
        Y[:, 1] = 4.0
        with pytest.raises(ZeroVarianceError, match="'y2'"):
            compute_tau(DataSet(rng.standard_normal((10, 2)), Y, y_names=["y1", "y2", "y3"]))

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(3, 300), p=st.integers(1, 2000), q=st.integers(1, 8), seed=st.integers(0, 1000))
    def test_identities(self, n, p, q, seed):
        r = np.random.default_rng(seed)
        d = DataSet(np.zeros((n, 1)), r.standard_normal((n, q)) * r.uniform(0.5, 3, q))
        s2 = float(np.mean(np.var(d.Y, axis=0, ddof=1)))
        object.__setattr__(d, "X", np.zeros((n, p)))
        t0, t1 = compute_tau(d)
        assert t0 * 10 * n == pytest.approx(s2, rel=1e-12)
        assert t1 / s2 == pytest.approx(max((p * q) ** 2.1 / (100 * n), math.log(n)), rel=1e-12)


class TestCalibratePhi:
    def test_p500_n200(self):
        phi = calibrate_phi(500, 200)
        assert abs(binom_tail(6, 500, phi) - 0.1) <= 1e-10

    def test_n_e_squared(self):
        n = math.e**2
        assert math.floor(math.log(n)) + 1 == 3
        phi = calibrate_phi(100, n)
        assert abs(binom_tail(3, 100, phi) - 0.1) <= 1e-10

    @pytest.mark.parametrize("p", [20, 100, 1000, 5000])
    def test_doubling_p_lowers_phi(self, p):
        assert calibrate_phi(2 * p, 200) < calibrate_phi(p, 200)

    def test_infeasible(self):
        with pytest.raises(ParameterError):
            calibrate_phi(3, 200)


class TestHyperParams:
    def test_defaults(self, rng):
        d = unit_var_data(rng, 60, 40, 3)
        hp = HyperParams.default(d)
        assert hp.nu == 4 and np.array_equal(hp.Lambda.entries, np.eye(3))
        assert hp.alpha1 == hp.alpha2 == 0.01
        assert (hp.tau0_sq, hp.tau1_sq) == compute_tau(d)
        assert hp.phi == calibrate_phi(40, 60)

    def test_overrides_and_unknown(self, rng):
        d = unit_var_data(rng, 60, 40, 3)
        assert HyperParams.default(d, phi=0.2, alpha1=None).phi == 0.2
        with pytest.raises(ParameterError):
            HyperParams.default(d, gamma=1.0)

    @pytest.mark.parametrize("kw", [
        dict(tau0_sq=2.0, tau1_sq=1.0),
        dict(phi=1.0),
        dict(phi=0.0),
        dict(nu=0.5),
        dict(alpha1=0.0),
        dict(sigma_beta_form="other"),
    ])
    def test_invalid(self, kw):
        base = dict(tau0_sq=0.1, tau1_sq=1.0, phi=0.5, nu=3.0, Lambda=np.eye(2))
        base.update(kw)
        with pytest.raises(ParameterError):
            HyperParams(**base)


class TestBetaConditional:
    def test_zero_column_gives_prior(self, rng):
        X = rng.standard_normal((8, 3))
        X[:, 1] = 0.0
        d = DataSet(X, rng.standard_normal((8, 2)))
        hp = hp_q(2)
        st_ = state_for(rng.standard_normal((3, 2)), [0, 1, 0], s2b=0.7, X=X)
        mean, cov = beta_conditional(1, st_, d, hp)
        assert np.allclose(mean, 0.0)
        assert np.allclose(cov.entries, 0.7 * 100.0 * np.eye(2), rtol=1e-12)

    def test_scalar_ridge(self):
        x = np.array([1.0, -2.0, 0.5, 3.0, 1.5])
        y = np.array([2.0, -1.0, 0.0, 4.0, 1.0])
        d = DataSet(x[:, None], y[:, None])
        hp = hp_q(1, tau0_sq=0.5, tau1_sq=2.0)
        st_ = state_for(np.zeros((1, 1)), [1], s2b=1.5, X=d.X)
        mean, cov = beta_conditional(0, st_, d, hp)
        prior_prec = 1 / (1.5 * 2.0)
        assert mean[0] == pytest.approx((x @ y) / (x @ x + prior_prec), rel=1e-12)
        assert cov.entries[0, 0] == pytest.approx(1 / (x @ x + prior_prec), rel=1e-12)

    def test_flat_prior_limit_is_least_squares(self, rng):
        X = rng.standard_normal((10, 2))
        Y = rng.standard_normal((10, 3))
        d = DataSet(X, Y)
        beta = np.zeros((2, 3))
        beta[1] = [0.3, -0.2, 1.0]
        st_ = state_for(beta, [1, 0], s2b=1e12, X=X)
        mean, _ = beta_conditional(0, st_, d, hp_q(3, tau1_sq=1e6))
        resid = Y - np.outer(X[:, 1], beta[1])
        ls = X[:, 0] @ resid / (X[:, 0] @ X[:, 0])
        assert np.allclose(mean, ls, rtol=1e-9)

    def test_matches_dense_gaussian_conditioning(self, rng):
        # vec(R) = (I kron x) b + e, e ~ N(0, S kron I); b ~ N(0, v I)
        n, q = 6, 3
        X = rng.standard_normal((n, 2))
        Y = rng.standard_normal((n, q))
        m = rng.standard_normal((q, q))
        S = m @ m.T + np.eye(q)
        beta = rng.standard_normal((2, q))
        st_ = state_for(beta, [0, 1], s2b=0.8, sigma_y=S, X=X)
        hp = hp_q(q, tau0_sq=0.3, tau1_sq=3.0)
        mean, cov = beta_conditional(0, st_, DataSet(X, Y), hp)
        v = 0.8 * 0.3
        A = np.kron(np.eye(q), X[:, :1])
        C = v * A @ A.T + np.kron(S, np.eye(n))
        r = (Y - np.outer(X[:, 1], beta[1])).reshape(-1, order="F")
        gain = v * A.T @ np.linalg.inv(C)
        assert np.allclose(mean, gain @ r, rtol=1e-9, atol=1e-12)
        assert np.allclose(cov.entries, v * np.eye(q) - gain @ A * v, rtol=1e-9, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), q=st.integers(1, 5))
    def test_cov_is_spd(self, seed, q):
        r = np.random.default_rng(seed)
        X = r.standard_normal((7, 3)) * r.uniform(0, 10)
        st_ = state_for(r.standard_normal((3, q)), r.integers(0, 2, 3), s2b=r.uniform(1e-3, 10), X=X)
        _, cov = beta_conditional(int(r.integers(0, 3)), st_, DataSet(X, r.standard_normal((7, q))), hp_q(q))
        cov.check()

    def test_deterministic(self, small_data):
        hp = hp_q(2)
        st_ = state_for(np.ones((5, 2)), [1, 0, 0, 1, 0], X=small_data.X)
        a = beta_conditional(3, st_, small_data, hp)
        b = beta_conditional(3, st_, small_data, hp)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1].entries, b[1].entries)


class TestSigmaBeta:
    def test_zero_beta(self):
        hp = hp_q(3)
        assert sigma_beta_conditional(state_for(np.zeros((4, 3)), [0, 1, 0, 1]), hp) == (0.01 + 6.0, 0.01)

    def test_hand_value(self):
        hp = HyperParams(0.5, 4.0, 0.5, 2.0, np.eye(1), alpha1=1.0, alpha2=1.0)
        assert sigma_beta_conditional(state_for([[2.0]], [1]), hp) == pytest.approx((1.5, 1.5), rel=1e-12)

    def test_displayed_form(self):
        hp = HyperParams(0.5, 4.0, 0.5, 2.0, np.eye(1), alpha1=1.0, alpha2=1.0, sigma_beta_form="displayed")
        assert sigma_beta_conditional(state_for([[2.0]], [1]), hp) == pytest.approx((2.0, 2.0), rel=1e-12)

    def test_quadratic_scaling(self, rng):
        hp = hp_q(2)
        beta = rng.standard_normal((5, 2))
        z = [1, 0, 1, 0, 0]
        _, s1 = sigma_beta_conditional(state_for(beta, z), hp)
        _, s2 = sigma_beta_conditional(state_for(2 * beta, z), hp)
        assert s2 - hp.alpha2 == pytest.approx(4 * (s1 - hp.alpha2), rel=1e-12)

    def test_against_quadrature(self, rng):
        # posterior mean of sigma_beta^2 by numerical integration of prior x likelihood
        hp = HyperParams(0.2, 5.0, 0.5, 3.0, np.eye(2), alpha1=2.0, alpha2=1.5)
        beta = rng.standard_normal((3, 2))
        z = np.array([1, 0, 1])
        tau = np.where(z == 1, hp.tau1_sq, hp.tau0_sq)

        def log_post(s):
            lp = -(hp.alpha1 + 1) * math.log(s) - hp.alpha2 / s
            for b, t in zip(beta, tau):
                lp += -0.5 * len(b) * math.log(s * t) - 0.5 * (b @ b) / (s * t)
            return lp

        shape, scale = sigma_beta_conditional(state_for(beta, z), hp)
        mode = scale / (shape + 1)
        c = log_post(mode)

        def moment(k):
            f = lambda s: s**k * math.exp(log_post(s) - c)
            return integrate.quad(f, 0, mode, limit=200)[0] + integrate.quad(f, mode, np.inf, limit=200)[0]

        norm, first = moment(0), moment(1)
        assert first / norm == pytest.approx(scale / (shape - 1), rel=1e-7)


class TestZConditional:
    def test_equal_tau_gives_phi(self, rng):
        hp = hp_q(2, tau0_sq=1.0, tau1_sq=1.0, phi=0.37)
        st_ = state_for(rng.standard_normal((3, 2)) * 50, [0, 1, 0])
        assert all(z_conditional(i, st_, hp) == 0.37 for i in range(3))

    def test_zero_beta_q1(self):
        hp = hp_q(1, tau0_sq=0.01, tau1_sq=100.0)
        assert z_conditional(0, state_for([[0.0]], [0]), hp) == pytest.approx(0.1 / 10.1, rel=1e-12)

    def test_far_beta_saturates(self):
        hp = hp_q(3, tau0_sq=0.01, tau1_sq=100.0)
        b = np.full((1, 3), 10 * math.sqrt(2.0) * 10 / math.sqrt(3))
        assert z_conditional(0, state_for(b, [0], s2b=2.0), hp) > 1 - 1e-6

    def test_extremes_do_not_nan(self):
        hp = hp_q(2, tau0_sq=1e-12, tau1_sq=1e12)
        assert z_conditional(0, state_for([[1e150, 1e150]], [0]), hp) == 1.0
        assert z_conditional(0, state_for([[0.0, 0.0]], [0], s2b=1e-300), hp) >= 0.0

    @settings(max_examples=50, deadline=None)
    @given(a=st.floats(0, 50), b=st.floats(0, 50), phi=st.floats(0.01, 0.99), dphi=st.floats(0, 0.5))
    def test_monotone(self, a, b, phi, dphi):
        hp = hp_q(2, tau0_sq=0.05, tau1_sq=20.0, phi=phi)
        lo, hi = sorted((a, b))
        assert z_log_odds(lo, 2, 1.0, hp) <= z_log_odds(hi, 2, 1.0, hp)
        phi2 = min(phi + dphi, 0.995)
        assert z_log_odds(lo, 2, 1.0, hp) <= z_log_odds(lo, 2, 1.0, hp.with_(phi=phi2))


class TestSigmaY:
    def test_perfect_fit(self, rng):
        X = rng.standard_normal((6, 2))
        beta = rng.standard_normal((2, 3))
        d = DataSet(X, X @ beta)
        hp = hp_q(3)
        df, scale = sigma_y_conditional(state_for(beta, [1, 1], X=X), d, hp)
        assert df == 6 + 4 and np.allclose(scale.entries, np.eye(3), atol=1e-12)

    def test_hand_value(self):
        d = DataSet(np.zeros((2, 1)), np.array([[1.0], [-2.0]]))
        hp = HyperParams(0.1, 1.0, 0.5, 2.0, np.eye(1))
        df, scale = sigma_y_conditional(state_for([[0.0]], [0], X=d.X), d, hp)
        assert (df, scale.entries[0, 0]) == (4.0, 6.0)

    def test_row_permutation_and_trace(self, rng):
        X = rng.standard_normal((9, 3))
        Y = rng.standard_normal((9, 2))
        beta = rng.standard_normal((3, 2))
        hp = hp_q(2)
        perm = rng.permutation(9)
        _, a = sigma_y_conditional(state_for(beta, [0, 0, 0], X=X), DataSet(X, Y), hp)
        _, b = sigma_y_conditional(state_for(beta, [0, 0, 0], X=X[perm]), DataSet(X[perm], Y[perm]), hp)
        assert np.allclose(a.entries, b.entries, rtol=1e-12)
        assert np.trace(a.entries) >= np.trace(hp.Lambda.entries)


class TestInitialState:
    @pytest.mark.parametrize("mode", ["zero", "ridge", "random"])
    def test_modes(self, small_data, mode):
        from bmvs.randdist import RngStream

        hp = HyperParams.default(small_data, phi=0.3)
        st_ = ChainState.initial(small_data, hp, mode, RngStream(1))
        assert st_.beta.shape == (5, 2) and st_.sigma_beta_sq == 1.0
        assert np.allclose(st_.fitted, small_data.X @ st_.beta)
        assert np.allclose(np.diag(st_.sigma_y.entries), np.var(small_data.Y, axis=0, ddof=1) / 100)

    def test_unknown_mode(self, small_data):
        with pytest.raises(ParameterError):
            ChainState.initial(small_data, HyperParams.default(small_data, phi=0.3), "warm")
