# coding=utf-8
import json
import os

import numpy as np
import pytest

from lacsh.algorithms.basic import run_chain
from lacsh.core.entity import Dataset, McmcConfig, ParameterState, PriorSpec
from lacsh.core.errors import InvalidValue, RejectionStall, GridTooLarge, EmptyGrid
from lacsh.core.model import LacshModel
from lacsh.core.spatial import distance_matrix
from lacsh.tools.random import RandomStream
from lacsh.validation import experiments
from lacsh.validation.oracle import (GridSpec, grid_posterior_oracle, total_variation, normal_normal_log_posterior,
                                     normal_normal_posterior, base_lhfi_toy_log_posterior, MAX_CELLS)
from lacsh.validation.synthetic import (generate_synthetic, write_synthetic, generate_coordinates,
                                        sample_anchored_h, ANCHOR_MEAN)


class TestSynthetic:
    def test_shapes_and_anchor(self, small_truth):
        data, state = small_truth.data, small_truth.state
        assert (data.N, data.P, data.K, data.Q) == (12, 3, 2, 1)
        assert state.H[0] < 0
        assert small_truth.mu[0] == pytest.approx(ANCHOR_MEAN)
        assert 0 < small_truth.acceptance < 1
        data.validate()
        state.validate(0)

    def test_treatment_is_standardized(self, small_truth):
        T = small_truth.data.T
        assert abs(T.mean()) < 1e-12
        assert T.std() == pytest.approx(1.0)
        np.testing.assert_allclose(small_truth.data.to_raw_treatment(T),
                                   small_truth.data.standardization_log['T:T'][0]
                                   + small_truth.data.standardization_log['T:T'][1] * T)

    def test_deterministic(self):
        t1 = generate_synthetic(10, 2, 1, 1, rng=RandomStream(4))
        t2 = generate_synthetic(10, 2, 1, 1, rng=RandomStream(4))
        np.testing.assert_array_equal(t1.data.Y, t2.data.Y)
        np.testing.assert_array_equal(t1.state.H, t2.state.H)
        assert t1.seed == t2.seed

    def test_overrides(self):
        beta = (0.0, 0.6, 0.8, 0.5, 1.5, 0.8)
        truth = generate_synthetic(10, 3, 2, 1, rng=RandomStream(5), phi=1e-6, beta=beta)
        assert truth.state.phi == 1e-6
        np.testing.assert_array_equal(truth.state.beta[1:], beta[1:])

    def test_base_variant(self):
        truth = generate_synthetic(10, 2, 2, 1, rng=RandomStream(6), variant='base_lhfi')
        assert truth.state.zeta.shape == (5,)
        np.testing.assert_allclose(truth.mu, truth.data.W @ truth.state.zeta)

    def test_unanchored(self):
        truth = generate_synthetic(10, 2, 1, 0, rng=RandomStream(7), anchor_index=None)
        assert truth.data.anchor_index is None
        assert truth.acceptance == 1.0
        assert truth.data.Q == 0

    def test_invalid_dimensions(self):
        with pytest.raises(InvalidValue):
            generate_synthetic(10, 2, 1, 2)
        with pytest.raises(InvalidValue):
            generate_synthetic(2, 2, 1, 1)
        with pytest.raises(InvalidValue):
            generate_synthetic(10, 2, 1, 1, anchor_index=10)

    def test_coordinates(self, rng):
        coords = generate_coordinates(2000, 'sphere_uniform', rng)
        assert np.all(np.abs(coords[:, 0]) <= 90)
        assert np.all((coords[:, 1] > -180) & (coords[:, 1] <= 180))
        # uniform on the sphere: sin(latitude) is uniform on (-1, 1)
        assert np.mean(np.sin(np.radians(coords[:, 0])) > 0.5) == pytest.approx(0.25, abs=0.03)
        fixed = generate_coordinates(50, 'fixed', rng)
        np.testing.assert_array_equal(fixed, generate_coordinates(50, 'fixed', RandomStream(0)))
        assert np.all(distance_matrix(fixed).D[np.triu_indices(50, 1)] > 0)
        with pytest.raises(InvalidValue):
            generate_coordinates(3, 'grid', rng)

    def test_rejection_stall(self, rng):
        with pytest.raises(RejectionStall):
            sample_anchored_h(np.array([10.0, 0.0]), np.eye(2), 0, rng)

    def test_anchored_draws(self, rng):
        draws = np.array([sample_anchored_h(np.array([0.5, 0.0]), np.eye(2), 0, rng)[0] for _ in range(500)])
        assert np.all(draws[:, 0] < 0)

    def test_write_synthetic(self, small_truth, tmp_path):
        paths = write_synthetic(small_truth, str(tmp_path), mcmc={'n_scans': 400, 'burn_in': 100})
        assert [os.path.basename(p) for p in paths] == ['panel.csv', 'units.csv', 'truth.json', 'fit.cfg']
        with open(paths[2], encoding='utf-8') as f:
            truth = json.load(f)
        assert truth['anchor_unit'] == 'U001'
        np.testing.assert_allclose(truth['H'], small_truth.state.H)
        with open(paths[3], encoding='utf-8') as f:
            cfg = f.read()
        assert 'data.anchor = U001' in cfg
        assert 'mcmc.n_scans = 400' in cfg
        assert 'data.lag_years = 2010-2014' in cfg
        with open(paths[0], encoding='utf-8') as f:
            assert f.readline().strip() == 'unit_id,year,variable,value'


class TestOracle:
    def test_normal_normal(self):
        y = [0.3, 1.2, -0.4]
        grid = GridSpec.regular(theta=(-4.0, 4.0, 4001))
        post = grid_posterior_oracle(normal_normal_log_posterior(y, 2.0), grid)
        mean, var = normal_normal_posterior(y, 2.0)
        assert post.mean('theta') == pytest.approx(mean, abs=1e-6)
        points, probs = post.marginal('theta')
        assert probs.sum() == pytest.approx(1.0)
        assert float(((points - mean) ** 2) @ probs) == pytest.approx(var, abs=1e-6)

    def test_two_axes(self):
        grid = GridSpec.regular(x=(-3, 3, 61), y=(-5, 7, 61))
        post = grid_posterior_oracle(lambda x, y: -0.5 * x ** 2 - 0.5 * (y - 1) ** 2, grid)
        assert grid.shape == (61, 61)
        assert post.mean('y') == pytest.approx(1.0, abs=1e-2)
        assert post.mean('x') == pytest.approx(0.0, abs=1e-12)

    def test_limits(self):
        with pytest.raises(GridTooLarge):
            grid_posterior_oracle(lambda x, y: x, GridSpec.regular(x=(0, 1, 10 ** 4), y=(0, 1, MAX_CELLS // 1000)))
        with pytest.raises(EmptyGrid):
            grid_posterior_oracle(lambda x: x, GridSpec.regular(x=(0, 1, 0)))
        with pytest.raises(EmptyGrid):
            grid_posterior_oracle(lambda x: np.full_like(x, -np.inf), GridSpec.regular(x=(0, 1, 5)))

    def test_total_variation(self):
        points = np.array([0.0, 1.0, 2.0])
        assert total_variation([0.1, 0.9, 2.4, 1.8], points, np.array([0.25, 0.25, 0.5])) == pytest.approx(0.0)
        assert total_variation([0.0, 0.0], points, np.array([0.0, 0.0, 1.0])) == pytest.approx(1.0)
        assert total_variation([-5.0, 9.0], points, np.array([1.0, 0.0, 1.0])) == pytest.approx(0.0)

    @pytest.mark.slow
    def test_base_toy_sampler_matches_grid(self):
        data = Dataset(Y=[[1.3]], Xstar=[0.0], Ystar=np.zeros((1, 0)), T=[0.0], coords=[[0.0, 0.0]],
                       unit_ids=['a'], unit_names=['A'], income_group=['L'])
        prior = PriorSpec(coef_var=1.0)
        state = ParameterState(a=[1.0], H=[0.0], Sigma_Y=[[1.0]], beta=np.zeros(6), gamma=np.zeros(2), sigma2_T=1.0,
                               sigma2_H=1.0, phi=1.0, zeta=[0.4, 0.0, 0.0])
        config = McmcConfig(n_scans=200000, burn_in=10000, thin=1, seed=21, model_variant='base_lhfi',
                            fixed=('a', 'Sigma_Y', 'zeta'), log_every=200000)
        chain = run_chain(config, data, prior=prior, initial=state, verbose=False)
        grid = GridSpec.regular(H=(-6.0, 6.0, 49), log_sigma2_H=(-6.0, 6.0, 241))
        post = grid_posterior_oracle(base_lhfi_toy_log_posterior(data, state, prior), grid)
        points, probs = post.marginal('H')
        assert total_variation(chain.H[:, 0], points, probs) < 0.02
        np.testing.assert_array_equal(chain.a[:, 0], 1.0)


class TestExperiments:
    def test_worker_count(self, monkeypatch):
        monkeypatch.setenv('LACSH_THREADS', '3')
        assert experiments.worker_count(10) == 3
        assert experiments.worker_count(2) == 2
        monkeypatch.setenv('LACSH_THREADS', 'many')
        with pytest.raises(InvalidValue):
            experiments.worker_count(2)
        monkeypatch.delenv('LACSH_THREADS')
        assert experiments.worker_count(1) == 1

    def test_binomial_band(self):
        lo, hi = experiments.binomial_band(100, 0.9)
        assert lo < 0.9 < hi
        assert lo == pytest.approx(0.84, abs=0.011)
        assert hi == pytest.approx(0.95, abs=0.011)

    def test_coverage_needs_replicates(self):
        with pytest.raises(InvalidValue):
            experiments.coverage_experiment(experiments.CoverageConfig(), 5, RandomStream(1))

    def test_report_files(self, tmp_path):
        report = experiments.balance_calibration(replicates=2, rng=RandomStream(2), n_units=60)
        paths = report.write(str(tmp_path))
        assert [os.path.basename(p) for p in paths] == ['balance_calibration.csv', 'balance_calibration_summary.csv',
                                                       'balance_calibration.txt']
        assert report.n_failed == 0
        assert report.render().startswith('balance-calibration (2 replicates, 0 failed)')
        assert list(report.table['n_blocks']) == [5, 5]

    def test_prior_draw_respects_anchor(self, small_data):
        model = LacshModel(small_data, PriorSpec(coef_var=1.0), anchor_index=0)
        rng = RandomStream(3)
        draws = [experiments.draw_from_prior(model, np.zeros(4), 1.0, rng) for _ in range(200)]
        assert all(d.H[0] < 0 for d in draws)
        Y = experiments.simulate_metrics(draws[0], rng)
        assert Y.shape == (small_data.N, small_data.P)

    def test_adaptive_calibration_short(self):
        result = experiments.adaptive_calibration(n_scans=3000, dim=3, rng=RandomStream(4))
        assert result.n_draws == 2400
        assert 0 < result.acceptance_rate < 1
        report = result.as_report()
        assert report.name == 'adaptive-calibration'

    @pytest.mark.slow
    def test_getting_it_right(self):
        report = experiments.getting_it_right(n_iterations=20000, rng=RandomStream(5))
        assert (report.table['z'].abs() < 3).all()
        assert set(report.table['name']) >= {'H_anchor', 'H_other', 'beta_1', 'log_phi'}

    @pytest.mark.slow
    def test_coverage(self):
        config = experiments.CoverageConfig(n_units=15, mcmc=McmcConfig(n_scans=2000, burn_in=500, thin=5,
                                                                        log_every=2000))
        report = experiments.coverage_experiment(config, 10, RandomStream(6))
        assert report.n_failed == 0
        assert list(report.summary['parameter']) == list(experiments.COVERAGE_PARAMETERS)
        assert (report.summary['n'] == 10).all()

    @pytest.mark.slow
    def test_lpml_comparison(self):
        report = experiments.lpml_comparison(replicates=10, rng=RandomStream(7))
        assert report.summary['full_better'][0] >= 8
