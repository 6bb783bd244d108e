# coding=utf-8
import dataclasses

import numpy as np
import pytest
from scipy import stats

from lacsh.algorithms.updates import (update_H_nonanchor, update_a, update_Sigma_Y, update_sigma2_T,
                                      update_gamma_cutfeedback, h_conditional, a_conditional, sigma_y_conditional,
                                      sigma2_t_conditional, gamma_conditional)
from lacsh.core.entity import Dataset, ParameterState
from lacsh.core.spatial import distance_matrix, correlation_matrix
from lacsh.tools.random import RandomStream

N_DRAWS = 10000


def make_data(Y, T=None, Xstar=None, Ystar=None, coords=None, anchor_index=None):
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n = Y.shape[0]
    if coords is None:
        coords = np.column_stack([np.linspace(-40, 40, n), np.linspace(-100, 100, n)])
    return Dataset(Y=Y, Xstar=np.zeros(n) if Xstar is None else Xstar, Ystar=np.zeros(n) if Ystar is None else Ystar,
                   T=np.zeros(n) if T is None else T, coords=coords, unit_ids=[str(i) for i in range(n)],
                   unit_names=['u{}'.format(i) for i in range(n)], income_group=['L'] * n, anchor_index=anchor_index)


def make_state(N, P, a=None, H=None, Sigma_Y=None, sigma2_T=1.0, sigma2_H=1.0, phi=1.0):
    return ParameterState(a=np.ones(P) if a is None else a, H=np.zeros(N) if H is None else H,
                          Sigma_Y=np.eye(P) if Sigma_Y is None else Sigma_Y, beta=np.zeros(6), gamma=np.zeros(3),
                          sigma2_T=sigma2_T, sigma2_H=sigma2_H, phi=phi)


def ks_pvalue(draws, dist):
    return stats.kstest(np.asarray(draws).ravel(), dist.cdf).pvalue


@pytest.fixture
def spatial_instance():
    data = make_data([[0.4, -0.1], [1.2, 0.8], [-0.5, -0.9]], coords=[[0.0, 0.0], [5.0, 10.0], [-20.0, 30.0]],
                     anchor_index=0)
    state = make_state(3, 2, a=[0.9, -0.6], H=[-0.7, 0.3, 1.1], Sigma_Y=[[1.0, 0.2], [0.2, 0.6]], sigma2_H=1.4,
                       phi=3.0)
    Sigma_H = state.sigma2_H * correlation_matrix(distance_matrix(data.coords), state.phi).Omega
    mean = np.array([0.2, -0.1, 0.4])
    return data, state, Sigma_H, mean


class TestUpdateH:
    def test_textbook_normal_normal(self):
        data = make_data([[2.0]])
        state = make_state(1, 1)
        M, V = h_conditional(state, data, np.eye(1), np.zeros(1), 0)
        assert M == pytest.approx(1.0)
        assert V == pytest.approx(0.5)

    def test_conditional_matches_partitioned_formula(self, spatial_instance):
        data, state, Sigma_H, mean = spatial_instance
        i, o = 1, [0, 2]
        weights = np.linalg.solve(Sigma_H[np.ix_(o, o)], Sigma_H[o, i])
        m = mean[i] + weights @ (state.H[o] - mean[o])
        D = Sigma_H[i, i] - weights @ Sigma_H[o, i]
        sy_a = np.linalg.solve(state.Sigma_Y, state.a)
        V = 1.0 / (state.a @ sy_a + 1.0 / D)
        M = V * (data.Y[i] @ sy_a + m / D)
        got = h_conditional(state, data, np.linalg.inv(Sigma_H), mean, i)
        np.testing.assert_allclose(got, (M, V), atol=1e-10)

    def test_grid_oracle(self, spatial_instance):
        data, state, Sigma_H, mean = spatial_instance
        i = 2
        M, V = h_conditional(state, data, np.linalg.inv(Sigma_H), mean, i)
        grid = np.linspace(M - 8 * np.sqrt(V), M + 8 * np.sqrt(V), 4001)
        logp = np.empty(grid.size)
        for k, h in enumerate(grid):
            H = state.H.copy()
            H[i] = h
            logp[k] = stats.multivariate_normal.logpdf(H, mean, Sigma_H) + \
                stats.multivariate_normal.logpdf(data.Y[i], h * state.a, state.Sigma_Y)
        p = np.exp(logp - logp.max())
        p /= p.sum()
        q = stats.norm.pdf(grid, M, np.sqrt(V))
        q /= q.sum()
        assert 0.5 * np.abs(p - q).sum() < 1e-3

    def test_prior_only_limit(self):
        data = make_data([[0.7]])
        state = make_state(1, 1, a=[0.0])
        rng = RandomStream(1)
        draws = [update_H_nonanchor(state, data, 2.0 * np.eye(1), rng, mean=np.array([0.5]))[0]
                 for _ in range(N_DRAWS)]
        assert ks_pvalue(draws, stats.norm(0.5, np.sqrt(2.0))) > 1e-3

    def test_anchor_untouched(self, spatial_instance):
        data, state, Sigma_H, mean = spatial_instance
        H = update_H_nonanchor(state, data, Sigma_H, RandomStream(2), mean=mean)
        assert H[0] == state.H[0]
        assert not np.array_equal(H[1:], state.H[1:])
        np.testing.assert_array_equal(state.H, [-0.7, 0.3, 1.1])

    def test_deterministic(self, spatial_instance):
        data, state, Sigma_H, mean = spatial_instance
        first = update_H_nonanchor(state, data, Sigma_H, RandomStream(3), mean=mean)
        second = update_H_nonanchor(state, data, Sigma_H, RandomStream(3), mean=mean, precision=np.linalg.inv(Sigma_H))
        np.testing.assert_allclose(first, second, atol=1e-12)


class TestUpdateA:
    def test_no_information(self):
        data = make_data(np.ones((4, 3)))
        state = make_state(4, 3)
        precision, b = a_conditional(state, data)
        np.testing.assert_allclose(precision, np.eye(3) / 100)
        np.testing.assert_allclose(b, np.zeros(3))

    def test_scalar_conjugacy(self):
        data = make_data([[3.0]])
        state = make_state(1, 1, H=[1.0])
        precision, b = a_conditional(state, data)
        assert np.linalg.solve(precision, b)[0] == pytest.approx(3 / 1.01)
        assert 1 / precision[0, 0] == pytest.approx(1 / 1.01)
        draws = [update_a(state, data, RandomStream(s))[0] for s in range(N_DRAWS)]
        assert ks_pvalue(draws, stats.norm(3 / 1.01, np.sqrt(1 / 1.01))) > 1e-3

    def test_normal_equations(self, rng):
        Y = rng.normal(size=(6, 3))
        S = np.array([[1.0, 0.3, 0.0], [0.3, 2.0, -0.4], [0.0, -0.4, 0.8]])
        state = make_state(6, 3, H=rng.normal(size=6), Sigma_Y=S)
        precision, b = a_conditional(state, make_data(Y))
        S_inv = np.linalg.inv(S)
        V = np.linalg.inv((state.H @ state.H) * S_inv + np.eye(3) / 100)
        np.testing.assert_allclose(np.linalg.inv(precision), V, atol=1e-10)
        np.testing.assert_allclose(np.linalg.solve(precision, b), V @ S_inv @ Y.T @ state.H, atol=1e-10)


class TestUpdateSigmaY:
    def test_zero_residual(self):
        H = np.array([0.5, -1.0, 2.0, 0.3])
        a = np.array([1.0, -0.5])
        data = make_data(np.outer(H, a))
        state = make_state(4, 2, a=a, H=H)
        df, scale = sigma_y_conditional(state, data)
        assert df == 2 + 2 + 4
        np.testing.assert_allclose(scale, np.eye(2), atol=1e-12)
        draws = np.array([update_Sigma_Y(state, data, RandomStream(s)) for s in range(4000)])
        np.testing.assert_allclose(draws.mean(axis=0), np.eye(2) / (df - 2 - 1), atol=0.02)
        assert all(np.linalg.eigvalsh(d).min() > 0 for d in draws)

    def test_one_dimension_is_inverse_gamma(self):
        data = make_data([[1.0], [-0.5], [2.0]])
        state = make_state(3, 1, a=[0.5], H=[1.0, 0.0, 1.0])
        df, scale = sigma_y_conditional(state, data)
        rng = RandomStream(4)
        draws = [update_Sigma_Y(state, data, rng)[0, 0] for _ in range(N_DRAWS)]
        assert ks_pvalue(draws, stats.invgamma(df / 2.0, scale=scale[0, 0] / 2.0)) > 1e-3


class TestUpdateSigma2T:
    def test_zero_deviations(self):
        data = make_data(np.zeros((120, 1)))
        state = make_state(120, 1)
        shape, scale = sigma2_t_conditional(state, data)
        assert (shape, scale) == (pytest.approx(61.0), pytest.approx(0.01))
        assert stats.invgamma(shape, scale=scale).pdf(scale / (shape + 1)) > \
            stats.invgamma(shape, scale=scale).pdf(scale / (shape + 1) * 1.01)

    def test_analytic_mean(self):
        data = make_data(np.zeros((2, 1)), T=[1.0, -1.0])
        state = make_state(2, 1)
        shape, scale = sigma2_t_conditional(state, data)
        assert shape == pytest.approx(2.0)
        assert scale == pytest.approx(1.01)
        assert scale / (shape - 1) == pytest.approx(1.01)

    def test_distribution(self):
        data = make_data(np.zeros((5, 1)), T=[0.3, -1.2, 0.8, 0.1, -0.4])
        state = make_state(5, 1)
        shape, scale = sigma2_t_conditional(state, data)
        rng = RandomStream(5)
        draws = [update_sigma2_T(state, data, rng) for _ in range(N_DRAWS)]
        assert ks_pvalue(draws, stats.invgamma(shape, scale=scale)) > 1e-3


class TestUpdateGamma:
    def test_intercept_only_centered(self):
        T = np.linspace(-1.5, 1.5, 30)
        data = make_data(np.zeros((30, 1)), T=(T - T.mean()) / T.std())
        state = make_state(30, 1)
        precision, b = gamma_conditional(state, data)
        assert abs(np.linalg.solve(precision, b)[0]) < 1e-10

    def test_no_information_limit(self):
        data = make_data(np.zeros((10, 1)), T=np.linspace(-1, 1, 10))
        state = make_state(10, 1, sigma2_T=1e12)
        precision, b = gamma_conditional(state, data)
        np.testing.assert_allclose(precision, np.eye(3) / 100, atol=1e-9)
        np.testing.assert_allclose(b, np.zeros(3), atol=1e-9)

    def test_cut_feedback(self, small_truth):
        data = small_truth.data
        state = small_truth.state
        other_data = dataclasses.replace(data, Y=np.full_like(data.Y, 7.5))
        other_state = dataclasses.replace(state, H=state.H - 3.0, beta=state.beta + 1.0, a=-state.a)
        np.testing.assert_array_equal(gamma_conditional(state, data)[0], gamma_conditional(other_state, other_data)[0])
        np.testing.assert_array_equal(update_gamma_cutfeedback(state, data, RandomStream(6)),
                                      update_gamma_cutfeedback(other_state, other_data, RandomStream(6)))
