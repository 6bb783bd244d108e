# coding=utf-8
"""
.. moduleauthor:: lacsh developers

This :mod:`adaptive` module provides the adaptive random-walk Metropolis sampler used for the block of the latent
health level that has no conjugate conditional.

For scans ``s <= adapt_start`` the proposal is ``MVN(u, narrow_scale^2 I_d / d)``. Afterwards it is the mixture
``w MVN(u, v^2 Sigma_s / d) + (1 - w) MVN(u, narrow_scale^2 I_d / d)`` where ``Sigma_s`` is the empirical covariance of
all block states visited so far, accumulated online. Both components are symmetric, so a proposal is accepted with
probability ``min(1, target(x) / target(u))``.

Every proposal consumes exactly one uniform for the component, *d* normals for the step and one uniform for the
acceptance test, whatever the outcome, so the number of deviates drawn per scan never depends on the data.
"""
import numpy as np

from ..core.errors import (EmpiricalCovarianceSingular, NotPositiveDefinite, CovarianceFactorizationFailure,
                           NonpositiveVariance, NonpositivePhi)
from ..tools.kernels import cholesky


class AdaptiveMetropolis:
    """
    Adaptive Metropolis sampler for a *dim*-dimensional block.

    :param dim: block dimension
    :param adapt_start: last scan that uses the narrow proposal only
    :param scale_v: scale *v* of the adaptive component
    :param mixture_weight: weight *w* of the adaptive component
    :param narrow_scale: standard deviation factor of the narrow component
    :param free: boolean mask of the coordinates that move; the others are held fixed. *d* counts the free ones.
    """
    def __init__(self, dim, adapt_start=200, scale_v=2.38, mixture_weight=0.9, narrow_scale=0.1, free=None):
        self.dim = int(dim)
        self.free = np.ones(self.dim, dtype=bool) if free is None else np.asarray(free, dtype=bool)
        assert self.free.shape == (self.dim,), 'The free mask must have one entry per block coordinate.'
        self.adapt_start = adapt_start
        self.scale_v = scale_v
        self.mixture_weight = mixture_weight
        self.narrow_scale = narrow_scale
        self.n = 0
        self.mean = np.zeros(self.dim)
        self._m2 = np.zeros((self.dim, self.dim))
        self.n_proposals = 0
        self.n_accepted = 0
        self.n_singular = 0
        self.n_failed = 0

    @property
    def d(self):
        return int(self.free.sum())

    def observe(self, x):
        """
        Add the block state *x* to the streaming mean and covariance.
        """
        x = np.asarray(x, dtype=float)
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self._m2 += np.outer(delta, x - self.mean)

    @property
    def covariance(self):
        """
        Empirical covariance ``Sigma_s`` of the observed states (denominator ``n - 1``), or None before two states.
        """
        if self.n < 2:
            return None
        return self._m2 / (self.n - 1)

    def adaptive_covariance(self):
        """
        Covariance ``v^2 Sigma_s / d`` of the adaptive component over the free coordinates.

        :raises EmpiricalCovarianceSingular: if ``Sigma_s`` is unavailable or not positive definite
        """
        cov = self.covariance
        if cov is None:
            raise EmpiricalCovarianceSingular('fewer than two states observed')
        sub = cov[np.ix_(self.free, self.free)]
        return self.scale_v ** 2 * sub / self.d

    def _adaptive_factor(self):
        try:
            return cholesky(self.adaptive_covariance()).L
        except NotPositiveDefinite as e:
            raise EmpiricalCovarianceSingular(str(e))

    def propose(self, u, rng, scan):
        """
        Draw a proposal around *u*.

        :return: a tuple ``(x, component)`` where *component* is ``'narrow'`` or ``'adaptive'``
        """
        d = self.d
        w = rng.uniform()
        z = rng.normal(d)
        step = self.narrow_scale * z / np.sqrt(d)
        component = 'narrow'
        if scan > self.adapt_start and w < self.mixture_weight:
            try:
                step = self._adaptive_factor() @ z
                component = 'adaptive'
            except EmpiricalCovarianceSingular:
                self.n_singular += 1
        x = np.array(u, dtype=float)
        x[self.free] += step
        return x, component

    def step(self, u, logp_u, log_target, rng, scan):
        """
        One Metropolis transition from *u* whose log-target is *logp_u*. Proposals whose target cannot be evaluated
        because a covariance fails to factorize are rejected and counted in :attr:`n_failed`.

        :return: a tuple ``(x, logp_x, accepted)``
        """
        x, _ = self.propose(u, rng, scan)
        try:
            logp_x = log_target(x)
        except (CovarianceFactorizationFailure, NonpositiveVariance, NonpositivePhi):
            logp_x = -np.inf
            self.n_failed += 1
        log_a = np.log(rng.uniform())
        accepted = bool(np.isfinite(logp_x) and log_a < logp_x - logp_u)
        self.n_proposals += 1
        if accepted:
            self.n_accepted += 1
            u, logp_u = x, logp_x
        self.observe(u)
        return np.asarray(u, dtype=float), logp_u, accepted

    @property
    def acceptance_rate(self):
        return self.n_accepted / self.n_proposals if self.n_proposals else 0.0

    def get_state(self):
        """
        The adaptation accumulators as a picklable dict.
        """
        return {'n': self.n, 'mean': self.mean.copy(), 'm2': self._m2.copy(), 'n_proposals': self.n_proposals,
                'n_accepted': self.n_accepted, 'n_singular': self.n_singular, 'n_failed': self.n_failed}

    def set_state(self, st):
        self.n = st['n']
        self.mean = np.array(st['mean'], dtype=float)
        self._m2 = np.array(st['m2'], dtype=float)
        self.n_proposals = st['n_proposals']
        self.n_accepted = st['n_accepted']
        self.n_singular = st['n_singular']
        self.n_failed = st['n_failed']


def update_hblock_adaptive_mh(state, data, history, rng, model, scan, R=None):
    """
    Step 6: one adaptive Metropolis transition of the block ``(beta, log sigma2_H, log phi, H_anc)`` (or its
    ``base_lhfi`` counterpart), targeting :meth:`~lacsh.core.model.LacshModel.block_log_density` with the current GPS
    values. Proposals with a nonnegative anchor have a ``-inf`` target and are always rejected.

    :param state: current :class:`~lacsh.core.entity.ParameterState`
    :param data: :class:`~lacsh.core.entity.Dataset` the *model* is bound to
    :param history: the chain's :class:`AdaptiveMetropolis`, holding the adaptation accumulators
    :param rng: :class:`~lacsh.tools.random.RandomStream`
    :param model: :class:`~lacsh.core.model.LacshModel`
    :param scan: 1-based scan index
    :param R: current GPS values
    :return: a tuple ``(new_state, accepted)``
    """
    assert model.data is data, 'The model must be bound to the dataset being sampled.'
    if R is None:
        R = model.gps(state)

    def log_target(v):
        return model.block_log_density(model.with_block(state, v), R)

    u = model.block_vector(state)
    v, _, accepted = history.step(u, log_target(u), log_target, rng, scan)
    return (model.with_block(state, v) if accepted else state), accepted


__all__ = ['AdaptiveMetropolis', 'update_hblock_adaptive_mh']
