# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The module :mod:`balance` implements the covariate balance diagnostic of the generalized propensity score (GPS).

The units are sorted by treatment and cut into moving blocks of ``block_size`` units that overlap by ``overlap`` units.
For every block the GPS is evaluated at the block's median treatment ``t*`` from a frequentist normal regression of *T*
on ``Z*``. Then the block indicator is regressed, over all units, on the first principal component *f* of the covariates
and on ``r(t*, Z*_i)`` with a logistic model. If the GPS balances the covariates, *f* carries no information on block
membership given the GPS, so the Wald p-value of the slope of *f* should be roughly uniform. Blocks with ``1 - p`` above
0.9 or 0.95 are flagged.
"""
import dataclasses
import logging

import numpy as np
import pandas as pd

from ..core.errors import InvalidValue, DegenerateInput, Separation
from ..tools.kernels import fit_linear_regression, fit_logistic_regression, first_principal_component, normal_pdf

_logger = logging.getLogger(__name__)

#: the two flagging thresholds on ``1 - p``
FLAG_THRESHOLDS = (0.9, 0.95)


@dataclasses.dataclass
class BalanceBlock:
    """
    One moving block. *p_value* is NaN and both flags are false when the block regression separates.
    """
    index: int
    start: int
    t_median: float
    t_median_raw: float
    t_min: float
    t_max: float
    p_value: float
    indeterminate: bool = False

    @property
    def one_minus_p(self):
        return 1.0 - self.p_value

    def flagged(self, threshold):
        return (not self.indeterminate) and self.one_minus_p > threshold

    @property
    def flagged_90(self):
        return self.flagged(0.9)

    @property
    def flagged_95(self):
        return self.flagged(0.95)


@dataclasses.dataclass
class BalanceReport:
    """
    Result of :func:`covariate_balance`.

    :param blocks: list of :class:`BalanceBlock`
    :param block_size: units per block
    :param overlap: units shared by consecutive blocks
    :param gps_fit: the :class:`~lacsh.tools.kernels.RegressionFit` of *T* on ``Z*``
    :param include_gps: whether the GPS regressor entered the block regressions
    """
    blocks: list
    block_size: int
    overlap: int
    gps_fit: object
    include_gps: bool = True

    def __len__(self):
        return len(self.blocks)

    def flagged_fraction(self, threshold=0.9):
        """
        Fraction of blocks flagged at *threshold*; indeterminate blocks count as not flagged.
        """
        return float(np.mean([b.flagged(threshold) for b in self.blocks])) if self.blocks else 0.0

    def to_frame(self):
        return pd.DataFrame({'block': [b.index for b in self.blocks],
                             't_median': [b.t_median for b in self.blocks],
                             't_median_raw': [b.t_median_raw for b in self.blocks],
                             'p_value': [b.p_value for b in self.blocks],
                             'one_minus_p': [b.one_minus_p for b in self.blocks],
                             'flagged_0.9': [b.flagged_90 for b in self.blocks],
                             'flagged_0.95': [b.flagged_95 for b in self.blocks],
                             'indeterminate': [b.indeterminate for b in self.blocks]})


def block_count(n, block_size=20, overlap=10):
    """
    Number of moving blocks, ``floor((n - block_size) / (block_size - overlap)) + 1``.
    """
    return (n - block_size) // (block_size - overlap) + 1


def covariate_balance(data, block_size=20, overlap=10, include_gps=True):
    """
    Run the covariate balance diagnostic on *data*.

    :param data: :class:`~lacsh.core.entity.Dataset`
    :param block_size: units per block
    :param overlap: units shared by consecutive blocks
    :param include_gps: whether the block regressions include the GPS regressor; dropping it shows the raw imbalance
    :return: :class:`BalanceReport`
    :raises RankDeficient: if the treatment regression or a block design is rank deficient
    :raises DegenerateInput: if there are no covariates, or the GPS regressor is requested and T is fitted exactly by Z
    """
    n = data.N
    if not 0 <= overlap < block_size <= n:
        raise InvalidValue('need 0 <= overlap < block_size <= N, got overlap={} block_size={} N={}'.format(
            overlap, block_size, n))
    covariates = data.covariates
    if covariates.shape[1] == 0:
        raise DegenerateInput('the balance diagnostic needs at least one covariate')
    gps_fit = fit_linear_regression(data.Z, data.T)
    u, v = gps_fit.fitted, gps_fit.residual_se
    if include_gps and not v > 1e-10 * np.std(data.T):
        raise DegenerateInput('the treatment is an exact linear function of the confounders')
    f = first_principal_component(covariates)
    order = np.argsort(data.T, kind='stable')
    step = block_size - overlap
    blocks = []
    for b in range(block_count(n, block_size, overlap)):
        start = b * step
        members = order[start:start + block_size]
        t_block = data.T[members]
        t_star = float(np.median(t_block))
        y = np.zeros(n)
        y[members] = 1.0
        columns = [np.ones(n), f]
        if include_gps:
            columns.append(normal_pdf(t_star, u, v ** 2))
        try:
            fit = fit_logistic_regression(np.column_stack(columns), y)
            p, indeterminate = float(fit.p_values[1]), False
        except Separation as e:
            _logger.info('Balance block %d is indeterminate: %s', b, e)
            p, indeterminate = np.nan, True
        blocks.append(BalanceBlock(index=b, start=start, t_median=t_star,
                                   t_median_raw=float(data.to_raw_treatment(t_star)), t_min=float(t_block.min()),
                                   t_max=float(t_block.max()), p_value=p, indeterminate=indeterminate))
    return BalanceReport(blocks=blocks, block_size=block_size, overlap=overlap, gps_fit=gps_fit,
                         include_gps=include_gps)


def flagged_treatment_ranges(report, threshold=0.9):
    """
    Standardized treatment intervals ``(low, high)`` covered by the blocks flagged at *threshold*, with overlapping
    intervals merged.
    """
    spans = sorted((b.t_min, b.t_max) for b in report.blocks if b.flagged(threshold))
    merged = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def balance_subsample(data, report, threshold=0.9):
    """
    Drop the units whose treatment falls inside a flagged interval and re-standardize the rest, for a re-run of the
    analysis on the balanced part of the data.

    :return: :class:`~lacsh.core.entity.Dataset`
    :raises InvalidDataset: if the anchor unit would be removed
    """
    ranges = flagged_treatment_ranges(report, threshold)
    drop = np.zeros(data.N, dtype=bool)
    for lo, hi in ranges:
        drop |= (data.T >= lo) & (data.T <= hi)
    keep = np.flatnonzero(~drop)
    _logger.info('Balance subsample keeps %d of %d units (%d flagged ranges).', keep.size, data.N, len(ranges))
    return data.subset(keep)


__all__ = ['BalanceBlock', 'BalanceReport', 'covariate_balance', 'block_count', 'flagged_treatment_ranges',
           'balance_subsample', 'FLAG_THRESHOLDS']
