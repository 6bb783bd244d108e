# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The module :mod:`model` implements the probability model: the generalized propensity score (GPS) of the continuous
treatment, the mean function of the latent health, the log-densities of the latent health level and of the metric
level, and the residual diagnostic of the base model.

Latent health model (``lacsh`` variant)::

    y_i | a, H_i, Sigma_Y      ~ MVN(a H_i, Sigma_Y)
    H | beta, T, R, Sigma_H    ~ TMVN(mu, Sigma_H) 1{H_anc < 0},   Sigma_H = sigma2_H Omega(d, phi)
    mu_i = b0 + b1 T_i + b2 T_i^2 + b3 R_i + b4 R_i^2 + b5 T_i R_i
    R_i  = density of N(Z*_i gamma, sigma2_T) at T_i

The ``base_lhfi`` variant replaces the mean by ``W* zeta`` and the covariance by ``sigma2_H I``.

The truncated density is normalized according to one of three modes: ``'marginal'`` divides by the marginal
probability ``Phi(-mu_anc / sd_anc)`` of the anchor coordinate, ``'conditional'`` by ``Phi(-m_anc / sqrt(D_anc))``
computed from the anchor's conditional distribution given the other units and ``'none'`` keeps the bare indicator.
"""
import collections

import numpy as np
from scipy import special

from .entity import ParameterState, PriorSpec, N_BETA
from .errors import LengthMismatch, ShapeMismatch, NonpositiveVariance
from .spatial import SpatialCorrelation, distance_matrix, correlation_matrix, EARTH_RADIUS_MM
from ..tools.kernels import normal_pdf, normal_logpdf, factorize, mvn_logpdf, CholeskyFactor

_LOG_2PI = np.log(2 * np.pi)


def gps_density(t, z, gamma, sigma2_T):
    """
    Generalized propensity score: the ``N(z . gamma, sigma2_T)`` density of the treatment *t*.

    :param t: treatment value or vector
    :param z: covariate row ``(1, X*_i, Y*_i)`` or an N x (1+K+Q) matrix of rows
    :param gamma: treatment-model coefficients
    :param sigma2_T: treatment-model variance
    """
    if not sigma2_T > 0:
        raise NonpositiveVariance('sigma2_T must be positive, got {}'.format(sigma2_T))
    return normal_pdf(t, np.asarray(z, dtype=float) @ np.asarray(gamma, dtype=float), sigma2_T)


def h_mean(beta, T, R):
    """
    Mean of the latent health, ``b0 + b1 T + b2 T^2 + b3 R + b4 R^2 + b5 T R`` elementwise.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    T = np.asarray(T, dtype=float)
    R = np.asarray(R, dtype=float)
    if beta.size != N_BETA:
        raise LengthMismatch('beta must have {} entries, got {}'.format(N_BETA, beta.size))
    if T.shape != R.shape:
        raise LengthMismatch('T has shape {} but R has shape {}'.format(T.shape, R.shape))
    return beta[0] + beta[1] * T + beta[2] * T ** 2 + beta[3] * R + beta[4] * R ** 2 + beta[5] * T * R


def _truncation_term(mu, H, factor, anchor, truncation, sd_anchor):
    if truncation == 'none':
        return 0.0
    if truncation == 'marginal':
        return -special.log_ndtr(-mu[anchor] / sd_anchor)
    # conditional: anchor given the other units from one row of the precision matrix
    e = np.zeros(mu.size)
    e[anchor] = 1.0
    q = factor.solve(e)
    d = 1.0 / q[anchor]
    dev = H - mu
    m = mu[anchor] - d * (q @ dev - q[anchor] * dev[anchor])
    return -special.log_ndtr(-m / np.sqrt(d))


def _h_level(state, mu, factor, anchor, truncation, prior, coords, variant):
    if anchor is not None and not state.H[anchor] < 0:
        return -np.inf
    logp = mvn_logpdf(state.H, mu, factor)
    if anchor is not None:
        sd_anchor = np.sqrt(factor.L[anchor] @ factor.L[anchor])
        logp += _truncation_term(mu, state.H, factor, anchor, truncation, sd_anchor)
    coef = state.zeta if variant == 'base_lhfi' else state.beta
    logp += np.sum(normal_logpdf(coef, prior.coef_mean, prior.coef_var))
    log_s2 = np.log(state.sigma2_H)
    logp += normal_logpdf(log_s2, prior.coef_mean, prior.coef_var)
    if coords == 'natural':
        logp -= log_s2
    if variant != 'base_lhfi':
        log_phi = np.log(state.phi)
        logp += normal_logpdf(log_phi, prior.coef_mean, prior.coef_var)
        if coords == 'natural':
            logp -= log_phi
    return float(logp)


def h_level_log_density(state, data, Omega=None, prior=None, anchor_index='data', truncation='marginal',
                        coords='log', variant='lacsh', R=None):
    """
    Log-density of the latent health level plus the log priors of the H-level parameters.

    :param state: :class:`~lacsh.core.entity.ParameterState`
    :param data: :class:`~lacsh.core.entity.Dataset`
    :param Omega: :class:`~lacsh.core.spatial.SpatialCorrelation` (or array) for ``state.phi``; None means the identity
    :param prior: :class:`~lacsh.core.entity.PriorSpec`, defaults to the standard priors
    :param anchor_index: anchor unit, ``'data'`` takes :attr:`Dataset.anchor_index`, None disables the truncation
    :param truncation: ``'marginal'``, ``'conditional'`` or ``'none'``
    :param coords: ``'log'`` gives the density of ``(beta, log sigma2_H, log phi, H)``; ``'natural'`` adds the Jacobian
        ``-log sigma2_H - log phi`` of the density of ``(beta, sigma2_H, phi, H)``
    :param variant: ``'lacsh'`` or ``'base_lhfi'``
    :param R: precomputed GPS values; computed from the state when omitted
    :return: the log-density, ``-inf`` if the anchor is not negative
    :raises CovarianceFactorizationFailure: if ``Sigma_H`` cannot be factorized after jitter
    """
    prior = (prior or PriorSpec()).resolved(data.P)
    anchor = data.anchor_index if anchor_index == 'data' else anchor_index
    if variant == 'base_lhfi':
        mu = data.W @ state.zeta
    else:
        if R is None:
            R = gps_density(data.T, data.Z, state.gamma, state.sigma2_T)
        mu = h_mean(state.beta, data.T, R)
    if Omega is None:
        omega = np.eye(data.N)
    else:
        omega = Omega.Omega if isinstance(Omega, SpatialCorrelation) else np.asarray(Omega, dtype=float)
    if not state.sigma2_H > 0:
        raise NonpositiveVariance('sigma2_H must be positive')
    factor = factorize(omega, scale=1.0).scaled(state.sigma2_H)
    return _h_level(state, mu, factor, anchor, truncation, prior, coords, variant)


def y_log_likelihood(state, Y):
    """
    Per-unit log-density ``log MVN(y_i; a H_i, Sigma_Y)``.

    :param state: :class:`~lacsh.core.entity.ParameterState`
    :param Y: N x P metric matrix
    :return: vector of length N
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape != (state.H.size, state.a.size):
        raise ShapeMismatch('Y has shape {} but the state implies {}'.format(Y.shape, (state.H.size, state.a.size)))
    factor = factorize(state.Sigma_Y)
    E = Y - np.outer(state.H, state.a)
    W = factor.whiten(E.T)
    return -0.5 * (Y.shape[1] * _LOG_2PI + factor.logdet() + np.sum(W * W, axis=0))


def base_lhfi_residuals(H_draws, data, zeta_draws):
    """
    Residual diagnostic of the base model: the per-unit posterior median of ``H - W* zeta``.

    :param H_draws: draws x N matrix
    :param data: :class:`~lacsh.core.entity.Dataset`
    :param zeta_draws: draws x (2+K+Q) matrix aligned with *H_draws*
    :return: vector of length N
    """
    H_draws = np.atleast_2d(np.asarray(H_draws, dtype=float))
    zeta_draws = np.atleast_2d(np.asarray(zeta_draws, dtype=float))
    W = data.W
    if H_draws.shape[0] != zeta_draws.shape[0]:
        raise ShapeMismatch('{} H draws but {} zeta draws'.format(H_draws.shape[0], zeta_draws.shape[0]))
    if H_draws.shape[1] != data.N or zeta_draws.shape[1] != W.shape[1]:
        raise ShapeMismatch('draws of shape {} and {} do not match N={} and 2+K+Q={}'.format(
            H_draws.shape, zeta_draws.shape, data.N, W.shape[1]))
    return np.median(H_draws - zeta_draws @ W.T, axis=0)


class LacshModel:
    """
    The probability model bound to a dataset, with the cached quantities the sampler needs: the distance matrix, the
    designs and the Cholesky factor of the spatial correlation for the current *phi*.

    The Metropolis block of the latent health level is represented as a flat vector. For the ``lacsh`` variant it is
    ``(beta_0, ..., beta_5, log_sigma2_H, log_phi, H_anc)``; for ``base_lhfi`` it is
    ``(zeta_0, ..., log_sigma2_H, H_anc)``. ``H_anc`` is dropped in unanchored runs.

    :param data: :class:`~lacsh.core.entity.Dataset`
    :param prior: :class:`~lacsh.core.entity.PriorSpec`
    :param anchor_index: anchor unit or None
    :param variant: ``'lacsh'`` or ``'base_lhfi'``
    :param truncation: see :func:`h_level_log_density`
    """
    def __init__(self, data, prior=None, anchor_index=None, variant='lacsh', truncation='marginal',
                 earth_radius=EARTH_RADIUS_MM):
        self.data = data
        self.prior = (prior or PriorSpec()).resolved(data.P)
        self.anchor_index = anchor_index
        self.variant = variant
        self.truncation = truncation
        self.Z = data.Z
        self.W = data.W
        self.distances = distance_matrix(data.coords, earth_radius) if variant == 'lacsh' else None
        self._omega_cache = collections.OrderedDict()
        self._identity = CholeskyFactor(np.eye(data.N))

    @property
    def block_names(self):
        if self.variant == 'base_lhfi':
            names = ['zeta_{}'.format(k) for k in range(self.W.shape[1])] + ['log_sigma2_H']
        else:
            names = ['beta_{}'.format(k) for k in range(N_BETA)] + ['log_sigma2_H', 'log_phi']
        if self.anchor_index is not None:
            names.append('H_anc')
        return names

    def gps(self, state):
        """
        GPS values ``R_i`` of all units at their observed treatment.
        """
        return gps_density(self.data.T, self.Z, state.gamma, state.sigma2_T)

    def mean(self, state, R=None):
        if self.variant == 'base_lhfi':
            return self.W @ state.zeta
        return h_mean(state.beta, self.data.T, self.gps(state) if R is None else R)

    def omega_factor(self, phi):
        """
        Cholesky factor of the spatial correlation for *phi*, cached for the two most recent values.
        """
        if self.variant == 'base_lhfi':
            return self._identity
        factor = self._omega_cache.get(phi)
        if factor is None:
            omega = correlation_matrix(self.distances, phi).Omega
            factor = self._omega_cache[phi] = factorize(omega, scale=1.0)
            # the current and the proposed phi
            while len(self._omega_cache) > 2:
                self._omega_cache.popitem(last=False)
        else:
            self._omega_cache.move_to_end(phi)
        return factor

    def h_factor(self, state):
        """
        Cholesky factor of ``Sigma_H`` for the state.
        """
        if not state.sigma2_H > 0:
            raise NonpositiveVariance('sigma2_H must be positive')
        return self.omega_factor(state.phi).scaled(state.sigma2_H)

    def h_log_density(self, state, R=None, coords='log'):
        """
        Same as :func:`h_level_log_density`, evaluated with the cached quantities.
        """
        if self.anchor_index is not None and not state.H[self.anchor_index] < 0:
            return -np.inf
        return _h_level(state, self.mean(state, R), self.h_factor(state), self.anchor_index, self.truncation,
                        self.prior, coords, self.variant)

    def y_log_likelihood(self, state):
        return y_log_likelihood(state, self.data.Y)

    def anchor_y_log_likelihood(self, state):
        """
        Metric-level log-density of the anchor unit alone.
        """
        i = self.anchor_index
        factor = factorize(state.Sigma_Y)
        w = factor.whiten(self.data.Y[i] - state.H[i] * state.a)
        return -0.5 * (state.a.size * _LOG_2PI + factor.logdet() + w @ w)

    def block_vector(self, state):
        coef = state.zeta if self.variant == 'base_lhfi' else state.beta
        parts = [coef, [np.log(state.sigma2_H)]]
        if self.variant != 'base_lhfi':
            parts.append([np.log(state.phi)])
        if self.anchor_index is not None:
            parts.append([state.H[self.anchor_index]])
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    def with_block(self, state, v):
        """
        Copy of *state* with the block coordinates replaced by *v*.
        """
        new = ParameterState(a=state.a, H=state.H.copy(), Sigma_Y=state.Sigma_Y, beta=state.beta.copy(),
                             gamma=state.gamma, sigma2_T=state.sigma2_T, sigma2_H=state.sigma2_H, phi=state.phi,
                             zeta=None if state.zeta is None else state.zeta.copy())
        k = 0
        if self.variant == 'base_lhfi':
            m = new.zeta.size
            new.zeta = np.array(v[:m], dtype=float)
        else:
            m = N_BETA
            new.beta = np.array(v[:m], dtype=float)
        k = m
        new.sigma2_H = float(np.exp(v[k]))
        k += 1
        if self.variant != 'base_lhfi':
            new.phi = float(np.exp(v[k]))
            k += 1
        if self.anchor_index is not None:
            new.H[self.anchor_index] = v[k]
        return new

    def block_log_density(self, state, R=None):
        """
        Target of the Metropolis block: the H-level log-density plus, when anchored, the metric-level log-density of
        the anchor unit, whose latent health is part of the block.
        """
        if self.anchor_index is not None and not state.H[self.anchor_index] < 0:
            return -np.inf
        if not (np.isfinite(state.sigma2_H) and state.sigma2_H > 0 and np.isfinite(state.phi) and state.phi > 0):
            return -np.inf
        logp = self.h_log_density(state, R)
        if self.anchor_index is not None:
            logp += self.anchor_y_log_likelihood(state)
        return logp


__all__ = ['gps_density', 'h_mean', 'h_level_log_density', 'y_log_likelihood', 'base_lhfi_residuals', 'LacshModel']
