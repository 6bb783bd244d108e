# coding=utf-8
"""
.. moduleauthor:: lacsh developers

This :mod:`updates` module implements the Gibbs steps of a scan:

1. the latent health of every non-anchor unit from its univariate normal full conditional
2. the loadings *a* from their multivariate normal full conditional
3. ``Sigma_Y`` from its inverse-Wishart full conditional
4. ``sigma2_T`` from its inverse-gamma full conditional
5. the treatment coefficients *gamma* with the cut of the feedback from the outcome level

Each step ``update_*`` returns the new value and leaves the state untouched. The parameters of the corresponding
conditional distribution are available separately through the ``*_conditional`` functions.
"""
import numpy as np

from ..core.errors import LengthMismatch
from ..core.model import gps_density, h_mean
from ..core.entity import PriorSpec
from ..tools.kernels import (CholeskyFactor, factorize, sample_mvn_canonical, sample_inverse_wishart,
                             sample_inverse_gamma)


def _prior(prior, data):
    return (prior or PriorSpec()).resolved(data.P)


def _precision_of(Sigma_H):
    factor = Sigma_H if isinstance(Sigma_H, CholeskyFactor) else factorize(Sigma_H)
    return factor.inverse()


def h_conditional(state, data, precision, mean, i):
    """
    Full conditional ``N(M, V)`` of the latent health of unit *i*.

    The spatial conditional prior ``N(m_i, D_i)`` is read off the precision matrix ``Q = Sigma_H^{-1}`` as
    ``D_i = 1 / Q_ii`` and ``m_i = mu_i - D_i sum_{j != i} Q_ij (H_j - mu_j)``; it is combined with the metric level
    through ``V = (a^T Sigma_Y^{-1} a + 1 / D_i)^{-1}`` and ``M = V (a^T Sigma_Y^{-1} y_i + m_i / D_i)``.

    :return: a tuple ``(M, V)``
    """
    sy_a = factorize(state.Sigma_Y).solve(state.a)
    dev = state.H - mean
    q = precision[i]
    d = 1.0 / q[i]
    m = mean[i] - d * (q @ dev - q[i] * dev[i])
    v = 1.0 / (state.a @ sy_a + 1.0 / d)
    return v * (data.Y[i] @ sy_a + m / d), v


def update_H_nonanchor(state, data, Sigma_H, rng, mean=None, anchor_index='data', precision=None):
    """
    Step 1: draw the latent health of every unit except the anchor, one at a time in ascending unit order, each from
    its full conditional given the current values of all other units (see :func:`h_conditional`).

    :param state: current :class:`~lacsh.core.entity.ParameterState`
    :param data: :class:`~lacsh.core.entity.Dataset`
    :param Sigma_H: covariance of the latent health or its :class:`~lacsh.tools.kernels.CholeskyFactor`
    :param rng: :class:`~lacsh.tools.random.RandomStream`
    :param mean: mean ``mu`` of the latent health; computed from ``beta`` and the GPS when omitted
    :param anchor_index: unit skipped by this step; ``'data'`` takes the dataset's anchor, None updates every unit
    :param precision: ``Sigma_H^{-1}`` if already available
    :return: the new latent health vector
    """
    anchor = data.anchor_index if anchor_index == 'data' else anchor_index
    if mean is None:
        mean = h_mean(state.beta, data.T, gps_density(data.T, data.Z, state.gamma, state.sigma2_T))
    if precision is None:
        precision = _precision_of(Sigma_H)
    if len(mean) != data.N:
        raise LengthMismatch('mean has length {} but there are {} units'.format(len(mean), data.N))
    sy_a = factorize(state.Sigma_Y).solve(state.a)
    prec_y = state.a @ sy_a
    evidence = data.Y @ sy_a
    H = state.H.copy()
    dev = H - mean
    for i in range(data.N):
        if i == anchor:
            continue
        q = precision[i]
        d = 1.0 / q[i]
        m = mean[i] - d * (q @ dev - q[i] * dev[i])
        v = 1.0 / (prec_y + 1.0 / d)
        H[i] = v * (evidence[i] + m / d) + np.sqrt(v) * rng.normal()
        dev[i] = H[i] - mean[i]
    return H


def a_conditional(state, data, prior=None):
    """
    Full conditional of the loadings in canonical form: precision ``(sum H_i^2) Sigma_Y^{-1} + I / coef_var`` and
    ``b = Sigma_Y^{-1} Y^T H + coef_mean / coef_var``.

    :return: a tuple ``(precision, b)``
    """
    prior = _prior(prior, data)
    sy = factorize(state.Sigma_Y)
    p = data.P
    precision = (state.H @ state.H) * sy.inverse() + np.eye(p) / prior.coef_var
    b = sy.solve(data.Y.T @ state.H) + prior.coef_mean / prior.coef_var
    return precision, b


def update_a(state, data, rng, prior=None):
    """
    Step 2: draw the loadings from their conjugate multivariate normal full conditional.
    """
    precision, b = a_conditional(state, data, prior)
    return sample_mvn_canonical(precision, b, rng)[0]


def sigma_y_conditional(state, data, prior=None):
    """
    Inverse-Wishart full conditional of ``Sigma_Y``: degrees of freedom ``nu_0 + N`` and scale
    ``(Y - H a^T)^T (Y - H a^T) + S_0``.

    :return: a tuple ``(df, scale)``
    """
    prior = _prior(prior, data)
    E = data.Y - np.outer(state.H, state.a)
    return prior.sigmaY_df + data.N, E.T @ E + prior.sigmaY_scale


def update_Sigma_Y(state, data, rng, prior=None):
    """
    Step 3: draw ``Sigma_Y`` from its inverse-Wishart full conditional.
    """
    df, scale = sigma_y_conditional(state, data, prior)
    return sample_inverse_wishart(df, scale, rng)


def sigma2_t_conditional(state, data, prior=None):
    """
    Inverse-gamma full conditional of ``sigma2_T`` with shape ``shape_0 + N / 2`` and scale
    ``scale_0 + sum D_i^2 / 2`` where ``D_i = T_i - Z*_i gamma``.

    :return: a tuple ``(shape, scale)``
    """
    prior = _prior(prior, data)
    d = data.T - data.Z @ state.gamma
    return prior.sigma2T_shape + data.N / 2.0, prior.sigma2T_scale + d @ d / 2.0


def update_sigma2_T(state, data, rng, prior=None):
    """
    Step 4: draw ``sigma2_T`` from its inverse-gamma full conditional.
    """
    shape, scale = sigma2_t_conditional(state, data, prior)
    return sample_inverse_gamma(shape, scale, rng)


def gamma_conditional(state, data, prior=None):
    """
    Cut-feedback distribution of *gamma* in canonical form: precision ``Z*^T Z* / sigma2_T + I / coef_var`` and
    ``b = Z*^T T / sigma2_T + coef_mean / coef_var``. Neither the latent health nor *beta* enters.

    :return: a tuple ``(precision, b)``
    """
    prior = _prior(prior, data)
    Z = data.Z
    precision = Z.T @ Z / state.sigma2_T + np.eye(Z.shape[1]) / prior.coef_var
    b = Z.T @ data.T / state.sigma2_T + prior.coef_mean / prior.coef_var
    return precision, b


def update_gamma_cutfeedback(state, data, rng, prior=None):
    """
    Step 5: draw *gamma* from the treatment model alone. The outcome level is ignored so that the latent health cannot
    feed back into the propensity score; the GPS values must be recomputed afterwards.
    """
    precision, b = gamma_conditional(state, data, prior)
    return sample_mvn_canonical(precision, b, rng)[0]


__all__ = ['update_H_nonanchor', 'update_a', 'update_Sigma_Y', 'update_sigma2_T', 'update_gamma_cutfeedback',
           'h_conditional', 'a_conditional', 'sigma_y_conditional', 'sigma2_t_conditional', 'gamma_conditional']
