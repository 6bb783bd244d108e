# coding=utf-8
import numpy as np
import pytest
from scipy import integrate, special, stats

from lacsh.core.entity import Dataset, McmcConfig, ParameterState, PriorSpec
from lacsh.core.errors import LengthMismatch, ShapeMismatch, NonpositiveVariance
from lacsh.core.model import (gps_density, h_mean, h_level_log_density, y_log_likelihood, base_lhfi_residuals,
                              LacshModel)
from lacsh.core.spatial import distance_matrix, correlation_matrix


def three_unit_data(anchor_index=1):
    return Dataset(Y=[[0.3, -0.2], [-1.1, -0.8], [0.7, 1.2]], Xstar=[-1.0, 0.2, 0.8], Ystar=[0.5, -1.2, 0.7],
                   T=[-0.9, 0.1, 0.8], coords=[[0.0, 0.0], [10.0, 20.0], [-30.0, 45.0]],
                   unit_ids=['a', 'b', 'c'], unit_names=['A', 'B', 'C'], income_group=['L', 'M', 'H'],
                   anchor_index=anchor_index)


def three_unit_state():
    return ParameterState(a=[1.0, 0.7], H=[0.4, -0.6, 1.1], Sigma_Y=[[1.0, 0.3], [0.3, 0.8]],
                          beta=[0.1, 0.5, -0.2, 0.3, 0.1, -0.4], gamma=[0.1, 0.4, -0.3], sigma2_T=0.9,
                          sigma2_H=1.3, phi=2.5)


def prior_terms(state, prior, log_phi=True):
    total = np.sum(stats.norm.logpdf(state.beta, prior.coef_mean, np.sqrt(prior.coef_var)))
    total += stats.norm.logpdf(np.log(state.sigma2_H), prior.coef_mean, np.sqrt(prior.coef_var))
    if log_phi:
        total += stats.norm.logpdf(np.log(state.phi), prior.coef_mean, np.sqrt(prior.coef_var))
    return total


class TestGps:
    def test_density_at_mean(self):
        z = [1.0, 0.5, -0.5]
        gamma = [0.2, 1.0, 0.4]
        t = float(np.dot(z, gamma))
        assert gps_density(t, z, gamma, 1.0) == pytest.approx(0.39894, abs=1e-5)

    def test_zero_coefficients(self):
        assert gps_density(2.0, [1.0, 3.0], [0.0, 0.0], 4.0) == pytest.approx(0.12099, abs=1e-5)

    def test_integrates_to_one(self):
        z, gamma, s2 = [1.0, -0.3], [0.4, 2.0], 0.7
        mu = float(np.dot(z, gamma))
        sd = np.sqrt(s2)
        total, _ = integrate.quad(lambda t: gps_density(t, z, gamma, s2), mu - 8 * sd, mu + 8 * sd)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_rows(self):
        Z = np.array([[1.0, 0.0], [1.0, 1.0]])
        np.testing.assert_allclose(gps_density(np.array([0.0, 1.0]), Z, [0.0, 1.0], 1.0),
                                   stats.norm.pdf([0.0, 0.0]))

    def test_nonpositive_variance(self):
        with pytest.raises(NonpositiveVariance):
            gps_density(0.0, [1.0], [0.0], 0.0)


class TestHMean:
    def test_intercept_only(self):
        np.testing.assert_array_equal(h_mean([1, 0, 0, 0, 0, 0], np.arange(4.0), np.ones(4)), np.ones(4))

    def test_linear(self):
        T = np.array([-1.0, 0.5, 2.0])
        np.testing.assert_array_equal(h_mean([0, 1, 0, 0, 0, 0], T, np.zeros(3)), T)

    def test_all_terms(self):
        assert h_mean([1, 2, 3, 4, 5, 6], np.array([1.0]), np.array([2.0]))[0] == pytest.approx(46.0)

    def test_length_checks(self):
        with pytest.raises(LengthMismatch):
            h_mean([1, 2, 3], np.ones(2), np.ones(2))
        with pytest.raises(LengthMismatch):
            h_mean(np.zeros(6), np.ones(2), np.ones(3))


class TestHLevel:
    def test_single_unit_standard_point(self):
        data = Dataset(Y=[[0.0]], Xstar=[0.0], Ystar=[0.0], T=[0.0], coords=[[0.0, 0.0]], unit_ids=['a'],
                       unit_names=['A'], income_group=['L'])
        state = ParameterState(a=[1.0], H=[0.0], Sigma_Y=[[1.0]], beta=np.zeros(6), gamma=np.zeros(3),
                               sigma2_T=1.0, sigma2_H=1.0, phi=1.0)
        prior = PriorSpec().resolved(1)
        # H = mu = 0 for beta = 0
        expected = -0.5 * np.log(2 * np.pi) + prior_terms(state, prior)
        assert h_level_log_density(state, data, anchor_index=None) == pytest.approx(expected, abs=1e-12)

    def test_nonnegative_anchor(self):
        data = three_unit_data()
        state = three_unit_state()
        state.H[1] = 0.1
        assert h_level_log_density(state, data) == -np.inf
        state.H[1] = 0.0
        assert h_level_log_density(state, data) == -np.inf

    @pytest.mark.parametrize('truncation', ['none', 'marginal', 'conditional'])
    def test_dense_oracle(self, truncation):
        data = three_unit_data()
        state = three_unit_state()
        prior = PriorSpec().resolved(data.P)
        omega = correlation_matrix(distance_matrix(data.coords), state.phi).Omega
        cov = state.sigma2_H * omega
        R = stats.norm.pdf(data.T, data.Z @ state.gamma, np.sqrt(state.sigma2_T))
        b = state.beta
        mu = b[0] + b[1] * data.T + b[2] * data.T ** 2 + b[3] * R + b[4] * R ** 2 + b[5] * data.T * R
        expected = stats.multivariate_normal.logpdf(state.H, mu, cov) + prior_terms(state, prior)
        if truncation == 'marginal':
            expected -= special.log_ndtr(-mu[1] / np.sqrt(cov[1, 1]))
        elif truncation == 'conditional':
            o = [0, 2]
            weights = np.linalg.solve(cov[np.ix_(o, o)], cov[o, 1])
            m = mu[1] + weights @ (state.H[o] - mu[o])
            d = cov[1, 1] - weights @ cov[o, 1]
            expected -= special.log_ndtr(-m / np.sqrt(d))
        got = h_level_log_density(state, data, correlation_matrix(distance_matrix(data.coords), state.phi),
                                  truncation=truncation)
        assert got == pytest.approx(expected, abs=1e-10)

    def test_marginal_is_the_default_truncation(self):
        data = three_unit_data()
        state = three_unit_state()
        omega = correlation_matrix(distance_matrix(data.coords), state.phi)
        assert McmcConfig().truncation == 'marginal'
        default = h_level_log_density(state, data, omega)
        assert default == h_level_log_density(state, data, omega, truncation='marginal')
        assert default != pytest.approx(h_level_log_density(state, data, omega, truncation='conditional'))

    def test_natural_coordinates_jacobian(self):
        data = three_unit_data()
        state = three_unit_state()
        omega = correlation_matrix(distance_matrix(data.coords), state.phi)
        log_coords = h_level_log_density(state, data, omega)
        natural = h_level_log_density(state, data, omega, coords='natural')
        assert natural == pytest.approx(log_coords - np.log(state.sigma2_H) - np.log(state.phi), abs=1e-12)

    def test_base_variant(self):
        data = three_unit_data(anchor_index=None)
        state = three_unit_state()
        state.zeta = np.array([0.2, -0.5, 0.3, 0.1])
        prior = PriorSpec().resolved(data.P)
        expected = np.sum(stats.norm.logpdf(state.H, data.W @ state.zeta, np.sqrt(state.sigma2_H)))
        expected += np.sum(stats.norm.logpdf(state.zeta, 0.0, 10.0))
        expected += stats.norm.logpdf(np.log(state.sigma2_H), 0.0, 10.0)
        got = h_level_log_density(state, data, prior=prior, variant='base_lhfi')
        assert got == pytest.approx(expected, abs=1e-10)


class TestYLikelihood:
    def test_standard_point(self):
        state = ParameterState(a=[0.0], H=[0.3], Sigma_Y=[[1.0]], beta=np.zeros(6), gamma=np.zeros(2),
                               sigma2_T=1.0, sigma2_H=1.0, phi=1.0)
        np.testing.assert_allclose(y_log_likelihood(state, [[0.0]]), [-0.91894], atol=1e-5)

    def test_mode(self):
        state = three_unit_state()
        Y = np.outer(state.H, state.a)
        at_mode = y_log_likelihood(state, Y)
        expected = -0.5 * (2 * np.log(2 * np.pi) + np.log(np.linalg.det(state.Sigma_Y)))
        np.testing.assert_allclose(at_mode, expected, atol=1e-12)
        assert np.all(y_log_likelihood(state, Y + 0.1) < at_mode)

    def test_dense_oracle(self, rng):
        state = ParameterState(a=[0.8, -0.4, 1.2], H=[-0.3, 0.9, 0.2, -1.4],
                               Sigma_Y=[[1.0, 0.2, -0.1], [0.2, 0.7, 0.05], [-0.1, 0.05, 1.5]],
                               beta=np.zeros(6), gamma=np.zeros(2), sigma2_T=1.0, sigma2_H=1.0, phi=1.0)
        Y = rng.normal(size=(4, 3))
        expected = [stats.multivariate_normal.logpdf(Y[i], state.H[i] * state.a, state.Sigma_Y) for i in range(4)]
        np.testing.assert_allclose(y_log_likelihood(state, Y), expected, atol=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            y_log_likelihood(three_unit_state(), np.zeros((3, 3)))


class TestBaseResiduals:
    def test_exact_fit(self):
        data = three_unit_data()
        zeta = np.array([[0.5, -1.0, 0.3, 0.2]])
        np.testing.assert_allclose(base_lhfi_residuals(zeta @ data.W.T, data, zeta), np.zeros((3,)), atol=1e-12)

    def test_symmetric_draws(self):
        data = three_unit_data()
        zeta = np.tile([0.5, -1.0, 0.3, 0.2], (2, 1))
        r = np.array([0.4, -0.2, 1.0])
        H = zeta @ data.W.T + r + np.array([[0.3], [-0.3]])
        np.testing.assert_allclose(base_lhfi_residuals(H, data, zeta), r, atol=1e-12)

    def test_median_of_three(self):
        data = three_unit_data()
        zeta = np.array([[0.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
        H = np.array([[1.0, 2.0, 3.0], [0.0, -1.0, 4.0], [2.0, 2.0, 2.0]])
        residuals = H - zeta @ data.W.T
        np.testing.assert_allclose(base_lhfi_residuals(H, data, zeta), np.sort(residuals, axis=0)[1], atol=1e-12)

    def test_shape_mismatch(self):
        data = three_unit_data()
        with pytest.raises(ShapeMismatch):
            base_lhfi_residuals(np.zeros((2, 3)), data, np.zeros((3, 4)))
        with pytest.raises(ShapeMismatch):
            base_lhfi_residuals(np.zeros((2, 3)), data, np.zeros((2, 3)))


class TestLacshModel:
    def test_block_names(self, small_data):
        model = LacshModel(small_data, anchor_index=0)
        assert model.block_names == ['beta_0', 'beta_1', 'beta_2', 'beta_3', 'beta_4', 'beta_5', 'log_sigma2_H',
                                     'log_phi', 'H_anc']
        base = LacshModel(small_data, variant='base_lhfi')
        assert base.block_names == ['zeta_0', 'zeta_1', 'zeta_2', 'zeta_3', 'zeta_4', 'log_sigma2_H']

    def test_block_round_trip(self, small_truth):
        model = LacshModel(small_truth.data, anchor_index=0)
        state = small_truth.state
        v = model.block_vector(state)
        assert v.size == len(model.block_names)
        v2 = v + 0.1
        moved = model.with_block(state, v2)
        np.testing.assert_allclose(model.block_vector(moved), v2)
        np.testing.assert_array_equal(moved.H[1:], state.H[1:])
        assert moved.sigma2_H == pytest.approx(state.sigma2_H * np.exp(0.1))
        np.testing.assert_allclose(model.block_vector(state), v)

    def test_h_log_density_matches_function(self, small_truth):
        data = small_truth.data
        state = small_truth.state
        model = LacshModel(data, anchor_index=data.anchor_index)
        omega = correlation_matrix(distance_matrix(data.coords), state.phi)
        assert model.h_log_density(state) == pytest.approx(h_level_log_density(state, data, omega), abs=1e-9)

    def test_block_log_density(self, small_truth):
        data = small_truth.data
        state = small_truth.state
        model = LacshModel(data, anchor_index=0)
        expected = model.h_log_density(state) + model.y_log_likelihood(state)[0]
        assert model.block_log_density(state) == pytest.approx(expected, abs=1e-9)
        assert model.anchor_y_log_likelihood(state) == pytest.approx(model.y_log_likelihood(state)[0], abs=1e-10)
        moved = model.with_block(state, np.append(model.block_vector(state)[:-1], 0.2))
        assert model.block_log_density(moved) == -np.inf

    def test_omega_cache(self, small_data):
        model = LacshModel(small_data, anchor_index=0)
        first = model.omega_factor(1.0)
        model.omega_factor(2.0)
        assert model.omega_factor(1.0) is first
        model.omega_factor(3.0)
        assert len(model._omega_cache) == 2
        assert 2.0 not in model._omega_cache
