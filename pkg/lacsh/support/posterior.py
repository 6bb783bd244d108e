# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The module :mod:`posterior` works on the retained draws of a :class:`~lacsh.core.entity.ChainStore`: posterior
summaries with effective draw counts, the ranking of units by latent health, pairwise superiority probabilities, the
average dose-response curve, the log pseudo marginal likelihood (LPML), the posterior of the spatial correlation as a
function of distance and the residual map.

All functions are read-only over the chain and the dataset. Quantiles use linear interpolation between order statistics
(type 7).
"""
import dataclasses
import warnings

import numpy as np
import pandas as pd
from scipy.special import logsumexp
from statsmodels.tsa.stattools import acf

from ..core.errors import (EmptyChain, EmptyGrid, IndexOutOfRange, DegenerateCPO, ShapeMismatch, InvalidValue)
from ..core.model import gps_density, h_mean, y_log_likelihood, base_lhfi_residuals

#: quantiles of a summary row
DEFAULT_QUANTILES = (0.05, 0.5, 0.95)
#: number of points of the default dose-response grid
DOSE_GRID_POINTS = 200


def _require_draws(chain):
    if len(chain) == 0:
        raise EmptyChain('the chain has no retained draws')


def _quantiles(x, q, axis=0):
    return np.quantile(x, q, axis=axis, method='linear')


def check_consistency(chain, data):
    """
    Check that *chain* was sampled on a dataset shaped like *data*.

    :raises ShapeMismatch: naming the first dimension that disagrees
    """
    if chain.N != data.N:
        raise ShapeMismatch('chain has {} units but the dataset has {}'.format(chain.N, data.N))
    if chain.P != data.P:
        raise ShapeMismatch('chain has {} metrics but the dataset has {}'.format(chain.P, data.P))
    if chain.gamma.shape[1] not in (0, data.Z.shape[1]):
        raise ShapeMismatch('chain has {} treatment coefficients but the dataset implies {}'.format(
            chain.gamma.shape[1], data.Z.shape[1]))
    if chain.zeta is not None and chain.zeta.shape[1] != data.W.shape[1]:
        raise ShapeMismatch('chain has {} base coefficients but the dataset implies {}'.format(
            chain.zeta.shape[1], data.W.shape[1]))


def effective_sample_size(x):
    """
    Effective number of independent draws of the scalar sequence *x*, using the initial monotone positive sequence of
    paired autocorrelations. A constant sequence has an effective size equal to its length.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4 or np.ptp(x) == 0:
        return float(n)
    rho = acf(x, nlags=n - 1, fft=True)
    m = (n - 1) // 2
    pairs = rho[0:2 * m:2] + rho[1:2 * m:2]
    total, prev = 0.0, np.inf
    for g in pairs:
        if g <= 0:
            break
        g = min(g, prev)
        total += g
        prev = g
    tau = -1.0 + 2.0 * total
    # antithetic chains are capped at n log10(n)
    return float(min(n / tau, n * np.log10(n))) if tau > 0 else float(n * np.log10(n))


@dataclasses.dataclass
class SummaryTable:
    """
    Posterior summary, one row per scalar parameter. :attr:`frame` has the columns ``name``, one column per quantile
    (labelled like ``'5%'``) and ``ess``.
    """
    frame: pd.DataFrame
    quantiles: tuple = DEFAULT_QUANTILES

    def __len__(self):
        return len(self.frame)

    def row(self, name):
        return self.frame.loc[self.frame['name'] == name].iloc[0]

    def render(self, names=None, labels=None, digits=2):
        """
        Plain text table with one line per parameter, e.g. ``H_84 0.07 0.10 0.14``.

        :param names: parameters to include, all by default
        :param labels: optional mapping from parameter name to a label appended in parentheses
        """
        labels = labels or {}
        cols = [_label(q) for q in self.quantiles]
        lines = ['name ' + ' '.join(cols)]
        frame = self.frame if names is None else self.frame.set_index('name').loc[list(names)].reset_index()
        for _, r in frame.iterrows():
            name = r['name'] + (' ({})'.format(labels[r['name']]) if r['name'] in labels else '')
            lines.append(name + ' ' + ' '.join('{:.{}f}'.format(r[c], digits) for c in cols))
        return '\n'.join(lines)


def _label(q):
    return '{:g}%'.format(100 * q)


def summarize(chain, quantiles=DEFAULT_QUANTILES):
    """
    Empirical quantiles and effective draw counts of every scalar parameter of *chain*.

    :param chain: :class:`~lacsh.core.entity.ChainStore`
    :param quantiles: increasing probabilities
    :return: :class:`SummaryTable`
    """
    _require_draws(chain)
    quantiles = tuple(sorted(quantiles))
    names, matrix = chain.scalar_columns()
    qs = _quantiles(matrix, quantiles)
    frame = pd.DataFrame({'name': names})
    for k, q in enumerate(quantiles):
        frame[_label(q)] = qs[k]
    frame['ess'] = [effective_sample_size(matrix[:, j]) for j in range(matrix.shape[1])]
    return SummaryTable(frame, quantiles)


def rank_health(chain, data):
    """
    Units ordered by the posterior median of their latent health, best first, with 90% credible intervals. Ties in the
    median are broken by unit index ascending.

    :return: a :class:`pandas.DataFrame` with the columns ``rank``, ``index``, ``unit_id``, ``name``, ``income_group``,
        ``median``, ``q05`` and ``q95``
    """
    _require_draws(chain)
    q05, med, q95 = _quantiles(chain.H, DEFAULT_QUANTILES)
    idx = np.arange(chain.N)
    order = np.lexsort((idx, -med))
    return pd.DataFrame({'rank': np.arange(1, chain.N + 1), 'index': order,
                         'unit_id': [data.unit_ids[i] for i in order], 'name': [data.unit_names[i] for i in order],
                         'income_group': [data.income_group[i] for i in order], 'median': med[order],
                         'q05': q05[order], 'q95': q95[order]})


def pairwise_superiority(chain, i, j, parameter='H'):
    """
    Posterior probability that ``parameter_i > parameter_j``, the fraction of retained draws in which it holds.

    :param parameter: ``'H'`` (latent health) or ``'a'`` (loadings)
    :raises IndexOutOfRange: if an index is out of range or ``i == j``
    """
    _require_draws(chain)
    if parameter not in ('H', 'a'):
        raise InvalidValue("parameter must be 'H' or 'a', got {!r}".format(parameter))
    draws = getattr(chain, parameter)
    n = draws.shape[1]
    for k in (i, j):
        if not 0 <= k < n:
            raise IndexOutOfRange('index {} is out of range for {} with {} entries'.format(k, parameter, n))
    if i == j:
        raise IndexOutOfRange('superiority needs two different indices, got {} twice'.format(i))
    return float(np.mean(draws[:, i] > draws[:, j]))


@dataclasses.dataclass
class DoseResponseCurve:
    """
    The posterior of the average dose-response ``mu(t)`` on a grid of standardized treatment values.

    :param t_grid: strictly increasing grid
    :param raw_t_grid: the grid on the unstandardized treatment scale
    :param median_curve: pointwise posterior median
    :param lower: pointwise 5% quantile
    :param upper: pointwise 95% quantile
    :param curves: the thinned per-draw curves, one row per kept draw
    :param draw_index: chain positions of the thinned curves
    :param extrapolated: whether the grid leaves the observed treatment range
    """
    t_grid: np.ndarray
    raw_t_grid: np.ndarray
    median_curve: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    curves: np.ndarray
    draw_index: np.ndarray
    extrapolated: bool = False

    def to_frame(self):
        """
        Tidy rows ``series, t, t_raw, value`` with the series ``median``, ``q05``, ``q95`` and ``draw_<k>``.
        """
        parts = []
        for series, values in (('median', self.median_curve), ('q05', self.lower), ('q95', self.upper)):
            parts.append(pd.DataFrame({'series': series, 't': self.t_grid, 't_raw': self.raw_t_grid,
                                       'value': values}))
        for k, curve in zip(self.draw_index, self.curves):
            parts.append(pd.DataFrame({'series': 'draw_{}'.format(k), 't': self.t_grid, 't_raw': self.raw_t_grid,
                                       'value': curve}))
        return pd.concat(parts, ignore_index=True)


def dose_curve(state, data, t_grid):
    """
    Average dose-response of a single draw: ``(1/N) sum_i beta(t, r(t, Z*_i))`` on *t_grid*. For a base-model draw
    (with *zeta*) the curve is the average of ``W* zeta`` with the treatment column set to *t*.
    """
    t = np.asarray(t_grid, dtype=float)
    if state.zeta is not None:
        rest = data.W[:, 2:] @ state.zeta[2:] if data.W.shape[1] > 2 else np.zeros(data.N)
        return state.zeta[0] + state.zeta[1] * t + rest.mean()
    tt = np.broadcast_to(t[:, None], (t.size, data.N))
    R = gps_density(tt, data.Z, state.gamma, state.sigma2_T)
    return h_mean(state.beta, tt, R).mean(axis=1)


def thinned_indices(n_draws, thin_to):
    """
    At most *thin_to* evenly spaced positions in ``range(n_draws)``, first and last included.
    """
    if thin_to <= 0 or n_draws == 0:
        return np.empty(0, dtype=int)
    return np.unique(np.round(np.linspace(0, n_draws - 1, min(thin_to, n_draws))).astype(int))


def dose_response(chain, data, t_grid=None, thin_to=100):
    """
    Posterior of the average dose-response function ``mu(t) = E[beta(t, r(t, Z*))]``, estimated per draw by averaging
    over the units.

    :param chain: :class:`~lacsh.core.entity.ChainStore`
    :param data: :class:`~lacsh.core.entity.Dataset`
    :param t_grid: standardized treatment values; by default :data:`DOSE_GRID_POINTS` equally spaced points spanning
        the observed range. The grid is sorted and duplicates are removed.
    :param thin_to: number of per-draw curves kept for plotting
    :return: :class:`DoseResponseCurve`
    :raises EmptyGrid: if the grid is empty
    """
    _require_draws(chain)
    check_consistency(chain, data)
    lo, hi = float(data.T.min()), float(data.T.max())
    if t_grid is None:
        t_grid = np.linspace(lo, hi, DOSE_GRID_POINTS)
    t_grid = np.unique(np.asarray(t_grid, dtype=float).ravel())
    if t_grid.size == 0:
        raise EmptyGrid('the dose-response grid is empty')
    extrapolated = bool(t_grid[0] < lo or t_grid[-1] > hi)
    if extrapolated:
        warnings.warn('the dose-response grid [{:.3g}, {:.3g}] extends beyond the observed treatment range '
                      '[{:.3g}, {:.3g}]'.format(t_grid[0], t_grid[-1], lo, hi), category=UserWarning)
    curves = np.array([dose_curve(state, data, t_grid) for state in chain])
    lower, median, upper = _quantiles(curves, DEFAULT_QUANTILES)
    keep = thinned_indices(len(chain), thin_to)
    return DoseResponseCurve(t_grid=t_grid, raw_t_grid=data.to_raw_treatment(t_grid), median_curve=median,
                             lower=lower, upper=upper, curves=curves[keep], draw_index=keep,
                             extrapolated=extrapolated)


def log_likelihood_matrix(chain, data):
    """
    Draws x units matrix of ``log f(y_i | theta_s)``.
    """
    check_consistency(chain, data)
    return np.array([y_log_likelihood(state, data.Y) for state in chain])


def lpml_from_log_likelihood(log_lik):
    """
    Log conditional predictive ordinates from a draws x units log-likelihood matrix, by the harmonic-mean estimator
    ``CPO_i = [(1/S) sum_s 1 / f(y_i | theta_s)]^-1`` evaluated in log space.

    :return: vector of ``log CPO_i``
    :raises DegenerateCPO: listing every unit whose ordinate is not finite
    """
    log_lik = np.atleast_2d(np.asarray(log_lik, dtype=float))
    if log_lik.shape[0] == 0:
        raise EmptyChain('no draws to evaluate')
    with np.errstate(over='ignore', invalid='ignore'):
        log_cpo = -(logsumexp(-log_lik, axis=0) - np.log(log_lik.shape[0]))
    bad = np.flatnonzero(~np.isfinite(log_cpo))
    if bad.size:
        raise DegenerateCPO('conditional predictive ordinate not finite for units {}'.format(bad.tolist()), bad)
    return log_cpo


def conditional_predictive_ordinates(chain, data):
    """
    ``log CPO_i`` of every unit.
    """
    _require_draws(chain)
    return lpml_from_log_likelihood(log_likelihood_matrix(chain, data))


def lpml(chain, data):
    """
    Log pseudo marginal likelihood ``sum_i log CPO_i`` of *chain* on *data*.
    """
    return float(np.sum(conditional_predictive_ordinates(chain, data)))


def spatial_correlation_curve(chain, d_grid):
    """
    Posterior median and 90% band of ``rho = exp(-d / phi)`` for each distance *d* (in Mm). Because *rho* increases
    with *phi*, the quantiles are the transformed quantiles of the *phi* draws.

    :return: a :class:`pandas.DataFrame` with the columns ``d``, ``median``, ``q05`` and ``q95``
    """
    _require_draws(chain)
    d = np.asarray(d_grid, dtype=float).ravel()
    assert np.all(d >= 0), 'Distances must be nonnegative.'
    q05, med, q95 = _quantiles(chain.phi, DEFAULT_QUANTILES)
    return pd.DataFrame({'d': d, 'median': np.exp(-d / med), 'q05': np.exp(-d / q05), 'q95': np.exp(-d / q95)})


def top_covariances(chain, k=5):
    """
    The *k* off-diagonal entries of ``Sigma_Y`` largest in absolute posterior median.

    :return: a :class:`pandas.DataFrame` with the columns ``name``, ``i``, ``j`` (1-based), ``q05``, ``median``, ``q95``
    """
    _require_draws(chain)
    rows, cols = np.tril_indices(chain.P, -1)
    entries = chain.Sigma_Y[:, rows, cols]
    if entries.shape[1] == 0:
        return pd.DataFrame(columns=['name', 'i', 'j', 'q05', 'median', 'q95'])
    q05, med, q95 = _quantiles(entries, DEFAULT_QUANTILES)
    order = np.argsort(-np.abs(med), kind='stable')[:k]
    return pd.DataFrame({'name': ['Sigma_Y_{}_{}'.format(rows[m] + 1, cols[m] + 1) for m in order],
                         'i': rows[order] + 1, 'j': cols[order] + 1, 'q05': q05[order], 'median': med[order],
                         'q95': q95[order]})


def residual_map(chain, data):
    """
    Per-unit posterior median residual of the latent health, for the map of spatial structure. For a base-model chain
    this is :func:`~lacsh.core.model.base_lhfi_residuals`; otherwise the residual is ``H_i - mu_i`` with the mean
    function of each draw.

    :return: a :class:`pandas.DataFrame` with the columns ``unit_id``, ``lat``, ``lon``, ``residual``
    """
    _require_draws(chain)
    check_consistency(chain, data)
    if chain.zeta is not None:
        resid = base_lhfi_residuals(chain.H, data, chain.zeta)
    else:
        mu = np.array([h_mean(s.beta, data.T, gps_density(data.T, data.Z, s.gamma, s.sigma2_T)) for s in chain])
        resid = np.median(chain.H - mu, axis=0)
    return pd.DataFrame({'unit_id': data.unit_ids, 'lat': data.coords[:, 0], 'lon': data.coords[:, 1],
                         'residual': resid})


@dataclasses.dataclass
class AnchorChoice:
    """
    Result of :func:`select_anchor`: the chosen unit and the sign that orients the pilot's health scale.
    """
    index: int
    unit_id: str
    orientation: int
    medians: np.ndarray


def select_anchor(chain, data, low_group=None):
    """
    Pick the anchor from an unanchored pilot chain: the unit at the low end of the posterior-median health scale,
    restricted to the members of *low_group* when it is given.

    The sign of an unanchored scale is arbitrary. With *low_group*, the scale is oriented so that the mean median of the
    units of that income group is negative; otherwise so that the mean loading is positive, i.e. higher metrics mean
    better health.

    :return: :class:`AnchorChoice`
    """
    _require_draws(chain)
    med = np.median(chain.H, axis=0)
    if low_group is not None:
        members = [i for i, g in enumerate(data.income_group) if g == low_group]
        if not members:
            raise InvalidValue('no unit belongs to the income group {!r}'.format(low_group))
        orientation = -1 if med[members].mean() > 0 else 1
    else:
        orientation = -1 if np.median(chain.a, axis=0).mean() < 0 else 1
    oriented = orientation * med
    if low_group is not None:
        index = members[int(np.argmin(oriented[members]))]
    else:
        index = int(np.argmin(oriented))
    return AnchorChoice(index=index, unit_id=data.unit_ids[index], orientation=orientation, medians=oriented)


__all__ = ['SummaryTable', 'DoseResponseCurve', 'AnchorChoice', 'summarize', 'effective_sample_size', 'rank_health',
           'pairwise_superiority', 'dose_curve', 'dose_response', 'thinned_indices', 'log_likelihood_matrix',
           'lpml_from_log_likelihood', 'conditional_predictive_ordinates', 'lpml', 'spatial_correlation_curve',
           'top_covariances', 'residual_map', 'select_anchor', 'check_consistency', 'DEFAULT_QUANTILES',
           'DOSE_GRID_POINTS']
