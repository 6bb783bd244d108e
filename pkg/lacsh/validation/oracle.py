# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The module :mod:`oracle` tabulates posteriors of tiny models on a lattice, the reference against which sampler output is
compared. :func:`grid_posterior_oracle` evaluates an unnormalized log posterior on every cell and returns normalized
marginals; :func:`total_variation` measures how far a set of draws is from a tabulated marginal.
"""
import collections
import dataclasses

import numpy as np
from scipy.special import logsumexp

from ..core.entity import PriorSpec
from ..core.errors import GridTooLarge, EmptyGrid
from ..tools.kernels import normal_logpdf

#: largest number of lattice cells evaluated
MAX_CELLS = 10 ** 7


@dataclasses.dataclass
class GridSpec:
    """
    The lattice, an ordered mapping from parameter names to their increasing grid points.
    """
    axes: 'collections.OrderedDict[str, np.ndarray]'

    def __post_init__(self):
        self.axes = collections.OrderedDict((k, np.asarray(v, dtype=float).ravel()) for k, v in self.axes.items())

    @classmethod
    def regular(cls, **ranges):
        """
        Build a regular lattice from ``name=(low, high, n_points)`` keyword arguments, in keyword order.
        """
        return cls(collections.OrderedDict((k, np.linspace(*r)) for k, r in ranges.items()))

    @property
    def names(self):
        return list(self.axes)

    @property
    def shape(self):
        return tuple(v.size for v in self.axes.values())

    @property
    def n_cells(self):
        return int(np.prod(self.shape, dtype=float))


@dataclasses.dataclass
class GridPosterior:
    """
    A posterior tabulated on a :class:`GridSpec`. :attr:`log_joint` holds the normalized log probabilities of the
    cells.
    """
    grid: GridSpec
    log_joint: np.ndarray

    def marginal(self, name):
        """
        Normalized marginal probabilities of the parameter *name* on its grid points.

        :return: a tuple ``(points, probabilities)``
        """
        k = self.grid.names.index(name)
        others = tuple(i for i in range(len(self.grid.names)) if i != k)
        log_m = logsumexp(self.log_joint, axis=others) if others else self.log_joint
        return self.grid.axes[name], np.exp(log_m - logsumexp(log_m))

    def mean(self, name):
        points, probs = self.marginal(name)
        return float(points @ probs)


def grid_posterior_oracle(log_posterior, grid):
    """
    Tabulate ``log_posterior`` on *grid*.

    :param log_posterior: vectorized callable taking one broadcastable array per axis (in grid order) and returning
        the unnormalized log posterior
    :param grid: :class:`GridSpec`
    :return: :class:`GridPosterior`
    :raises GridTooLarge: if the lattice has more than :data:`MAX_CELLS` cells
    :raises EmptyGrid: if an axis has no point or every cell has zero probability
    """
    if grid.n_cells > MAX_CELLS:
        raise GridTooLarge('the grid has {} cells, more than {}'.format(grid.n_cells, MAX_CELLS))
    if grid.n_cells == 0:
        raise EmptyGrid('the grid has an empty axis')
    mesh = np.meshgrid(*grid.axes.values(), indexing='ij')
    log_p = np.broadcast_to(np.asarray(log_posterior(*mesh), dtype=float), grid.shape)
    log_p = np.where(np.isnan(log_p), -np.inf, log_p)
    total = logsumexp(log_p)
    if not np.isfinite(total):
        raise EmptyGrid('the posterior vanishes on every grid cell')
    return GridPosterior(grid=grid, log_joint=log_p - total)


def total_variation(samples, points, probs):
    """
    Total variation distance between the empirical distribution of *samples* and a marginal tabulated on the increasing
    grid *points*. Every sample is assigned to the cell of its nearest grid point; samples beyond the outermost
    midpoints fall into the edge cells.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    points = np.asarray(points, dtype=float)
    probs = np.asarray(probs, dtype=float)
    edges = (points[1:] + points[:-1]) / 2
    cells = np.searchsorted(edges, samples)
    empirical = np.bincount(cells, minlength=points.size) / samples.size
    return 0.5 * float(np.abs(empirical - probs / probs.sum()).sum())


def normal_normal_log_posterior(y, noise_var, prior_mean=0.0, prior_var=1.0):
    """
    Unnormalized log posterior of the mean of ``y_k ~ N(theta, noise_var)`` under ``theta ~ N(prior_mean, prior_var)``.
    """
    y = np.asarray(y, dtype=float).ravel()

    def log_posterior(theta):
        theta = np.asarray(theta, dtype=float)
        ll = sum(normal_logpdf(yk, theta, noise_var) for yk in y)
        return ll + normal_logpdf(theta, prior_mean, prior_var)
    return log_posterior


def normal_normal_posterior(y, noise_var, prior_mean=0.0, prior_var=1.0):
    """
    The analytic posterior ``(mean, variance)`` matching :func:`normal_normal_log_posterior`.
    """
    y = np.asarray(y, dtype=float).ravel()
    precision = 1.0 / prior_var + y.size / noise_var
    return (prior_mean / prior_var + y.sum() / noise_var) / precision, 1.0 / precision


def base_lhfi_toy_log_posterior(data, state, prior=None):
    """
    Log posterior of ``(H, log sigma2_H)`` for a single-unit, single-metric base model with every other parameter held
    at its value in *state* and no anchor: ``N(y; a H, Sigma_Y) N(H; W* zeta, sigma2_H) N(log sigma2_H; m, v)`` with
    the prior ``N(m, v)`` of :class:`~lacsh.core.entity.PriorSpec`.

    :return: a vectorized callable of ``(H, log_sigma2_H)``
    """
    assert data.N == 1 and data.P == 1, 'The toy model has one unit and one metric.'
    prior = (prior or PriorSpec()).resolved(1)
    y = float(data.Y[0, 0])
    a = float(state.a[0])
    sy = float(state.Sigma_Y[0, 0])
    m = float(data.W[0] @ state.zeta)

    def log_posterior(H, log_s2):
        H = np.asarray(H, dtype=float)
        log_s2 = np.asarray(log_s2, dtype=float)
        return (normal_logpdf(y, a * H, sy) + normal_logpdf(H, m, np.exp(log_s2))
                + normal_logpdf(log_s2, prior.coef_mean, prior.coef_var))
    return log_posterior


__all__ = ['GridSpec', 'GridPosterior', 'grid_posterior_oracle', 'total_variation', 'normal_normal_log_posterior',
           'normal_normal_posterior', 'base_lhfi_toy_log_posterior', 'MAX_CELLS']
