# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The module :mod:`synthetic` runs the model generatively. :func:`generate_synthetic` draws covariates, the treatment, the
GPS values, the latent health (truncated at the anchor by rejection) and the metrics, and returns the truth together with
a :class:`~lacsh.core.entity.Dataset`. :func:`write_synthetic` stores the result as raw input files that the data
pipeline ingests like real data.
"""
import dataclasses
import json
import os

import numpy as np
import pandas as pd
from scipy import special

from ..core.entity import Dataset, ParameterState, column_key, N_BETA
from ..core.errors import RejectionStall, InvalidValue
from ..core.model import gps_density, h_mean
from ..core.spatial import distance_matrix, correlation_matrix, h_covariance
from ..tools.kernels import factorize, sample_inverse_wishart
from ..tools.random import as_stream

#: anchor acceptance probability below which the rejection sampler gives up
MIN_ACCEPTANCE = 1e-4
#: proposals of the rejection sampler before it gives up
MAX_ATTEMPTS = 10000
#: mean of the anchor's latent health under a random truth
ANCHOR_MEAN = -1.0
COORD_MODES = ('sphere_uniform', 'fixed')
_MAX_REDRAWS = 100


@dataclasses.dataclass
class SyntheticTruth:
    """
    A generated dataset with the parameters that produced it.

    :param state: the true :class:`~lacsh.core.entity.ParameterState`, including the drawn latent health
    :param data: the generated :class:`~lacsh.core.entity.Dataset`
    :param seed: entropy and spawn key of the generating stream
    :param R: GPS values at the observed treatment
    :param mu: mean of the latent health
    :param acceptance: anchor acceptance probability of the rejection sampler
    """
    state: ParameterState
    data: Dataset
    seed: object
    R: np.ndarray
    mu: np.ndarray
    acceptance: float

    def as_dict(self):
        """
        Every generated quantity as plain lists, for ``truth.json``.
        """
        st = self.state
        return {'seed': self.seed, 'anchor_index': self.data.anchor_index,
                'anchor_unit': None if self.data.anchor_index is None else self.data.unit_ids[self.data.anchor_index],
                'a': st.a.tolist(), 'H': st.H.tolist(), 'Sigma_Y': st.Sigma_Y.tolist(), 'beta': st.beta.tolist(),
                'gamma': st.gamma.tolist(), 'sigma2_T': st.sigma2_T, 'sigma2_H': st.sigma2_H, 'phi': st.phi,
                'zeta': None if st.zeta is None else st.zeta.tolist(), 'R': self.R.tolist(), 'mu': self.mu.tolist(),
                'acceptance': self.acceptance, 'unit_ids': self.data.unit_ids}


def generate_coordinates(n, mode, rng):
    """
    Unit locations: uniform on the sphere, or a deterministic spread of ``n`` points for ``'fixed'``.
    """
    if mode == 'sphere_uniform':
        u = rng.uniform(n)
        lat = np.degrees(np.arcsin(2.0 * u - 1.0))
        lon = 360.0 * rng.uniform(n) - 180.0
        return np.column_stack([lat, lon])
    if mode == 'fixed':
        k = np.arange(n)
        lat = -60.0 + 120.0 * (k + 0.5) / n
        lon = -180.0 + 360.0 * ((k * 0.618033988749895) % 1.0)
        lon[lon <= -180.0] += 360.0
        return np.column_stack([lat, lon])
    raise InvalidValue('coord_mode must be one of {}, got {!r}'.format(COORD_MODES, mode))


def _standardized_columns(n, k, rng):
    X = rng.normal((n, k)) if k else np.empty((n, 0))
    means, sds = X.mean(axis=0), X.std(axis=0)
    return (X - means) / sds if k else X, means, sds


def _covariates(n, K, Q, rng, threshold):
    # redraw until no lagged column is collinear with another covariate at the threshold
    for _ in range(_MAX_REDRAWS):
        X, xm, xs = _standardized_columns(n, K, rng)
        Ys, ym, ys = _standardized_columns(n, Q, rng)
        if Q == 0:
            return X, Ys, (xm, xs), (ym, ys)
        corr = np.atleast_2d(np.corrcoef(np.column_stack([X, Ys]), rowvar=False))
        np.fill_diagonal(corr, 0.0)
        if np.abs(corr[K:]).max() < threshold:
            return X, Ys, (xm, xs), (ym, ys)
    raise RejectionStall('could not draw covariates below the collinearity threshold {}'.format(threshold))


def sample_anchored_h(mu, Sigma_H, anchor, rng):
    """
    Draw ``H ~ MVN(mu, Sigma_H)`` conditioned on ``H[anchor] < 0`` by rejection.

    :return: a tuple ``(H, acceptance)`` with the acceptance probability ``Phi(-mu_anc / sd_anc)``
    :raises RejectionStall: if the acceptance probability is below :data:`MIN_ACCEPTANCE` or no proposal is accepted
        within :data:`MAX_ATTEMPTS`
    """
    factor = factorize(Sigma_H)
    if anchor is None:
        return mu + factor.L @ rng.normal(mu.size), 1.0
    sd = np.sqrt(Sigma_H[anchor, anchor])
    acceptance = float(special.ndtr(-mu[anchor] / sd))
    if acceptance < MIN_ACCEPTANCE:
        raise RejectionStall('anchor acceptance probability {:.3g} is too small; re-center the mean of the anchor '
                             'below zero'.format(acceptance))
    for _ in range(MAX_ATTEMPTS):
        H = mu + factor.L @ rng.normal(mu.size)
        if H[anchor] < 0:
            return H, acceptance
    raise RejectionStall('no anchored draw accepted within {} proposals'.format(MAX_ATTEMPTS))


def _income_groups(H):
    cuts = np.quantile(H, [1 / 3, 2 / 3])
    return ['low' if h <= cuts[0] else 'middle' if h <= cuts[1] else 'high' for h in H]


def random_truth(n_gamma, P, rng, variant='lacsh', n_zeta=None):
    """
    Random parameters of a synthetic truth (the latent health is drawn later). *beta* and *gamma* are ``N(0, 0.5^2)``,
    the loadings lie in ``[0.5, 1.5]``, ``Sigma_Y`` is inverse-Wishart with mean ``0.3 I``, ``sigma2_H = 0.5`` and
    ``phi = 2`` Mm.
    """
    gamma = 0.5 * rng.normal(n_gamma)
    beta = 0.5 * rng.normal(N_BETA)
    zeta = 0.5 * rng.normal(n_zeta) if variant == 'base_lhfi' else None
    a = 0.5 + rng.uniform(P)
    df = P + 4.0
    Sigma_Y = sample_inverse_wishart(df, 0.3 * (df - P - 1) * np.eye(P), rng)
    return ParameterState(a=a, H=np.zeros(1), Sigma_Y=Sigma_Y, beta=beta, gamma=gamma, sigma2_T=0.5, sigma2_H=0.5,
                          phi=2.0, zeta=zeta)


def generate_synthetic(n_units, P, K, Q, truth='random', coord_mode='sphere_uniform', rng=None, anchor_index=0,
                       variant='lacsh', prune_threshold=0.8, phi=None, beta=None):
    """
    Generate a dataset from the model.

    Covariates ``X*`` and lagged metrics ``Y*`` are i.i.d. standard normal columns, standardized and redrawn while a
    lagged column is collinear with another covariate. The treatment follows ``N(Z* gamma, sigma2_T)``; under a random
    truth it is standardized afterwards and *gamma*, ``sigma2_T`` are rescaled to match, and ``beta_0`` (or ``zeta_0``)
    is shifted so that the anchor's mean latent health is :data:`ANCHOR_MEAN`. The latent health is drawn from
    ``MVN(mu, sigma2_H Omega(phi))`` (identity correlation for ``base_lhfi``) conditioned on a negative anchor, and the
    metric rows from ``MVN(a H_i, Sigma_Y)``.

    :param n_units: number of units N
    :param P: number of metrics
    :param K: number of covariates
    :param Q: number of lagged metrics, smaller than *P*
    :param truth: ``'random'`` or a :class:`~lacsh.core.entity.ParameterState` whose *H* is ignored
    :param coord_mode: ``'sphere_uniform'`` or ``'fixed'``
    :param rng: :class:`~lacsh.tools.random.RandomStream` or seed
    :param anchor_index: anchor unit, None for no truncation
    :param variant: ``'lacsh'`` or ``'base_lhfi'``
    :param phi: overrides *phi* of a random truth, e.g. a tiny value for spatially independent latent health
    :param beta: overrides *beta* of a random truth before ``beta_0`` is shifted
    :return: :class:`SyntheticTruth`
    """
    if not (n_units >= 3 and P >= 1 and K >= 0 and 0 <= Q < P):
        raise InvalidValue('need N >= 3, P >= 1, K >= 0 and 0 <= Q < P, got N={} P={} K={} Q={}'.format(
            n_units, P, K, Q))
    if anchor_index is not None and not 0 <= anchor_index < n_units:
        raise InvalidValue('anchor index {} outside [0, {})'.format(anchor_index, n_units))
    rng = as_stream(rng)
    seq = rng.seed_sequence
    seed = {'entropy': seq.entropy, 'spawn_key': list(seq.spawn_key)}
    coords = generate_coordinates(n_units, coord_mode, rng)
    X, Ys, (xm, xs), (ym, ys) = _covariates(n_units, K, Q, rng, prune_threshold)
    Z = np.column_stack([np.ones(n_units), X, Ys])
    is_random = isinstance(truth, str)
    if is_random and truth != 'random':
        raise InvalidValue("truth must be 'random' or a ParameterState, got {!r}".format(truth))
    state = random_truth(Z.shape[1], P, rng, variant, Z.shape[1] + 1) if is_random else truth.copy()
    if is_random and phi is not None:
        state.phi = float(phi)
    if is_random and beta is not None:
        state.beta = np.array(beta, dtype=float)
    if state.gamma.size != Z.shape[1] or state.a.size != P:
        raise InvalidValue('the truth does not match the dimensions P={}, 1+K+Q={}'.format(P, Z.shape[1]))
    T = Z @ state.gamma + np.sqrt(state.sigma2_T) * rng.normal(n_units)
    log = {}
    if is_random:
        m, s = T.mean(), T.std()
        T = (T - m) / s
        state.gamma = state.gamma / s
        state.gamma[0] -= m / s
        state.sigma2_T = state.sigma2_T / s ** 2
        log[column_key('T', 'T')] = (float(m), float(s))
    R = gps_density(T, Z, state.gamma, state.sigma2_T)
    W = np.column_stack([np.ones(n_units), T, X, Ys])
    if variant == 'base_lhfi':
        if state.zeta is None or state.zeta.size != W.shape[1]:
            raise InvalidValue('the base_lhfi truth needs zeta of length {}'.format(W.shape[1]))
        mu = W @ state.zeta
        if is_random and anchor_index is not None:
            state.zeta[0] += ANCHOR_MEAN - mu[anchor_index]
            mu = W @ state.zeta
        Sigma_H = state.sigma2_H * np.eye(n_units)
    else:
        mu = h_mean(state.beta, T, R)
        if is_random and anchor_index is not None:
            state.beta[0] += ANCHOR_MEAN - mu[anchor_index]
            mu = h_mean(state.beta, T, R)
        Sigma_H = h_covariance(state.sigma2_H, correlation_matrix(distance_matrix(coords), state.phi))
    H, acceptance = sample_anchored_h(mu, Sigma_H, anchor_index, rng)
    state.H = H
    E = factorize(state.Sigma_Y).L @ rng.normal((P, n_units))
    Y = np.outer(H, state.a) + E.T

    metric_names = ['y{}'.format(j + 1) for j in range(P)]
    covariate_names = ['x{}'.format(k + 1) for k in range(K)]
    lagged = metric_names[:Q]
    for name, mean, sd in zip(covariate_names, xm, xs):
        log[column_key('X', name)] = (float(mean), float(sd))
    for name, mean, sd in zip(lagged, ym, ys):
        log[column_key('Ystar', name)] = (float(mean), float(sd))
    ordered = {k: log[k] for g in ('X', 'Ystar', 'T') for k in log if k.startswith(g + ':')}
    data = Dataset(Y=Y, Xstar=X, Ystar=Ys, T=T, coords=coords,
                   unit_ids=['U{:03d}'.format(i + 1) for i in range(n_units)],
                   unit_names=['Unit {}'.format(i + 1) for i in range(n_units)], income_group=_income_groups(H),
                   anchor_index=anchor_index, metric_names=metric_names, covariate_names=covariate_names,
                   lagged_metric_names=lagged, treatment_name='T', standardization_log=ordered,
                   prune_threshold=prune_threshold)
    return SyntheticTruth(state=state, data=data, seed=seed, R=R, mu=mu, acceptance=acceptance)


def write_synthetic(truth, directory, current_year=2015, lag_years=(2010, 2014), mcmc=None):
    """
    Write ``panel.csv``, ``units.csv``, ``truth.json`` and a ready-to-run ``fit.cfg`` into *directory*.

    The panel holds the metrics in *current_year* and the covariates, the treatment and the lagged metrics in every year
    of *lag_years*, each year carrying the generated value, so the pipeline's lagged averages reproduce them.

    :param mcmc: optional mapping of ``mcmc.*`` settings for ``fit.cfg``
    :return: list of written paths
    """
    data = truth.data
    os.makedirs(directory, exist_ok=True)
    years = list(range(lag_years[0], lag_years[1] + 1))
    rows = []
    for i, uid in enumerate(data.unit_ids):
        for j, name in enumerate(data.metric_names):
            rows.append((uid, current_year, name, data.Y[i, j]))
        for year in years:
            for k, name in enumerate(data.covariate_names):
                rows.append((uid, year, name, data.Xstar[i, k]))
            for q, name in enumerate(data.lagged_metric_names):
                rows.append((uid, year, name, data.Ystar[i, q]))
            rows.append((uid, year, data.treatment_name, data.T[i]))
    panel = pd.DataFrame(rows, columns=['unit_id', 'year', 'variable', 'value'])
    units = pd.DataFrame({'unit_id': data.unit_ids, 'name': data.unit_names, 'income_group': data.income_group,
                          'lat': data.coords[:, 0], 'lon': data.coords[:, 1]})
    paths = [os.path.join(directory, name) for name in ('panel.csv', 'units.csv', 'truth.json', 'fit.cfg')]
    panel.to_csv(paths[0], index=False, float_format='%.17g', lineterminator='\n')
    units.to_csv(paths[1], index=False, float_format='%.17g', lineterminator='\n')
    with open(paths[2], 'w', encoding='utf-8', newline='\n') as f:
        json.dump(truth.as_dict(), f, sort_keys=True, indent=2)
        f.write('\n')
    anchor = 'none' if data.anchor_index is None else data.unit_ids[data.anchor_index]
    lines = ['# generated by lacsh simulate',
             'data.panel = panel.csv', 'data.units = units.csv',
             'data.metrics = ' + ', '.join(data.metric_names),
             'data.lagged_metrics = ' + ', '.join(data.lagged_metric_names),
             'data.covariates = ' + ', '.join(data.covariate_names),
             'data.treatment = ' + data.treatment_name,
             'data.current_year = {}'.format(current_year),
             'data.lag_years = {}-{}'.format(*lag_years),
             'data.anchor = ' + anchor,
             'data.prune_threshold = {}'.format(data.prune_threshold)]
    lines += ['mcmc.{} = {}'.format(k, v) for k, v in sorted((mcmc or {}).items())]
    lines += ['output.dir = fit']
    with open(paths[3], 'w', encoding='utf-8', newline='\n') as f:
        f.write('\n'.join(lines) + '\n')
    return paths


__all__ = ['SyntheticTruth', 'generate_synthetic', 'write_synthetic', 'generate_coordinates', 'sample_anchored_h',
           'random_truth', 'MIN_ACCEPTANCE', 'MAX_ATTEMPTS', 'ANCHOR_MEAN', 'COORD_MODES']
