# coding=utf-8
import dataclasses

import numpy as np
import pytest

from lacsh.core.errors import InvalidValue, DegenerateInput, InvalidDataset
from lacsh.support.balance import (covariate_balance, block_count, flagged_treatment_ranges, balance_subsample,
                                   BalanceBlock, BalanceReport)
from lacsh.validation.experiments import balance_dataset, balance_calibration
from lacsh.tools.random import RandomStream


def report_with(blocks):
    return BalanceReport(blocks=blocks, block_size=20, overlap=10, gps_fit=None)


def block(index, p, t_min, t_max, indeterminate=False):
    return BalanceBlock(index=index, start=index * 10, t_median=(t_min + t_max) / 2, t_median_raw=(t_min + t_max) / 2,
                        t_min=t_min, t_max=t_max, p_value=p, indeterminate=indeterminate)


class TestBlocks:
    @pytest.mark.parametrize('n, expected', [(120, 11), (200, 19), (20, 1), (29, 1), (30, 2)])
    def test_block_count(self, n, expected):
        assert block_count(n) == expected

    def test_report_layout(self):
        data = balance_dataset(120, RandomStream(1))
        report = covariate_balance(data)
        assert len(report) == 11
        starts = [b.start for b in report.blocks]
        assert starts == list(range(0, 110, 10))
        medians = [b.t_median for b in report.blocks]
        assert medians == sorted(medians)
        for b in report.blocks:
            assert b.t_min <= b.t_median <= b.t_max
            assert b.indeterminate or 0.0 <= b.p_value <= 1.0
        frame = report.to_frame()
        assert list(frame.columns) == ['block', 't_median', 't_median_raw', 'p_value', 'one_minus_p', 'flagged_0.9',
                                       'flagged_0.95', 'indeterminate']

    def test_without_gps(self):
        data = balance_dataset(60, RandomStream(2))
        report = covariate_balance(data, include_gps=False)
        assert not report.include_gps
        assert len(report) == 5

    def test_invalid_layout(self):
        data = balance_dataset(40, RandomStream(3))
        with pytest.raises(InvalidValue):
            covariate_balance(data, block_size=20, overlap=20)
        with pytest.raises(InvalidValue):
            covariate_balance(data, block_size=50)

    def test_needs_covariates(self, small_data):
        bare = dataclasses.replace(small_data, Xstar=np.empty((small_data.N, 0)), Ystar=np.empty((small_data.N, 0)),
                                   covariate_names=[], lagged_metric_names=[])
        with pytest.raises(DegenerateInput):
            covariate_balance(bare, block_size=6, overlap=3)

    def test_exact_treatment_fit(self):
        data = balance_dataset(60, RandomStream(4))
        exact = dataclasses.replace(data, T=0.5 + 2.0 * data.Z[:, 1])
        with pytest.raises(DegenerateInput):
            covariate_balance(exact)
        assert len(covariate_balance(exact, include_gps=False)) == 5


class TestFlags:
    def test_thresholds(self):
        b = block(0, 0.07, -1.0, 0.0)
        assert b.flagged_90 and not b.flagged_95
        assert block(1, 0.01, 0.0, 1.0).flagged_95

    def test_indeterminate_never_flagged(self):
        b = block(0, np.nan, -1.0, 0.0, indeterminate=True)
        assert not b.flagged_90 and not b.flagged_95
        assert report_with([b, block(1, 0.5, 0.0, 1.0)]).flagged_fraction() == 0.0

    def test_merged_ranges(self):
        report = report_with([block(0, 0.01, -2.0, -0.5), block(1, 0.02, -1.0, 0.2), block(2, 0.8, 0.0, 1.0),
                              block(3, 0.05, 1.5, 2.0)])
        assert flagged_treatment_ranges(report) == [(-2.0, 0.2), (1.5, 2.0)]
        assert report.flagged_fraction(0.9) == 0.75

    def test_subsample(self):
        data = balance_dataset(60, RandomStream(4))
        data.anchor_index = int(np.argmin(data.T))
        lo, hi = np.sort(data.T)[[30, 39]]
        report = report_with([block(0, 0.001, lo, hi)])
        sub = balance_subsample(data, report)
        assert sub.N == 50
        assert sub.unit_ids[sub.anchor_index] == data.unit_ids[data.anchor_index]

    def test_subsample_drops_anchor(self):
        data = balance_dataset(60, RandomStream(5))
        data.anchor_index = int(np.argmin(data.T))
        report = report_with([block(0, 0.001, float(data.T.min()), 0.0)])
        with pytest.raises(InvalidDataset):
            balance_subsample(data, report)


class TestCalibration:
    @pytest.mark.slow
    def test_random_treatment(self):
        report = balance_calibration(replicates=50, rng=RandomStream(6), n_units=200)
        assert report.summary['mean_flagged_0.9'][0] == pytest.approx(0.10, abs=0.06)

    @pytest.mark.slow
    def test_confounded_without_gps(self):
        report = balance_calibration(replicates=10, rng=RandomStream(7), n_units=200, confounded=True,
                                     include_gps=False)
        assert report.summary['mean_flagged_0.9'][0] > 0.5
