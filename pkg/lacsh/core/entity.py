# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The module :mod:`entity` defines the core data structures of *lacsh*: the standardized model inputs
(:class:`Dataset`), one state of the Markov chain (:class:`ParameterState`), the prior hyperparameters
(:class:`PriorSpec`), the sampler settings (:class:`McmcConfig`) and the container of retained draws
(:class:`ChainStore`).

Notation follows the model: *Y* (N x P) holds the current-year metrics, *X\\** (N x K) the lagged-average covariates,
*Y\\** (N x Q) the lagged-average metrics that survived the collinearity screen and *T* the treatment. The treatment
model uses the design ``Z* = (1, X*, Y*)`` and the base latent health model uses ``W* = (1, T, X*, Y*)``.
"""
import copy
import dataclasses
import logging
from collections import OrderedDict
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import (InvalidCoordinate, InvalidDataset, InvalidState, InvalidValue, InvalidDf,
                     InvalidParameter)

_logger = logging.getLogger(__name__)

#: column groups of a :class:`Dataset` in storage order
COLUMN_GROUPS = ('Y', 'X', 'Ystar', 'T')

#: number of coefficients of the H-level mean function
N_BETA = 6

_STANDARDIZATION_TOL = 1e-9


def _columns(x, n):
    x = np.asarray(x, dtype=float)
    return x.reshape(n, -1) if x.size else np.empty((n, 0))


def column_key(group, name):
    """
    Key of a column in :attr:`Dataset.standardization_log`, e.g. ``'Ystar:infant_mortality'``.
    """
    return '{}:{}'.format(group, name)


@dataclasses.dataclass
class Dataset:
    """
    The standardized model inputs consumed by the sampler.

    :param Y: current-year metrics, N x P
    :param Xstar: lagged-average covariates, N x K
    :param Ystar: lagged-average metrics retained after collinearity pruning, N x Q
    :param T: treatment vector of length N
    :param coords: N x 2 array of (latitude, longitude) in degrees
    :param unit_ids: opaque unit identifiers
    :param unit_names: display names
    :param income_group: categorical labels used in plots
    :param anchor_index: index of the anchor unit whose latent health is negative, or None for an unanchored run
    :param standardization_log: ordered mapping ``column_key -> (mean, sd)`` of every standardized column, holding the
        statistics of the raw column so that ``raw = mean + sd * standardized``
    :param pruning_log: ordered list of removed lagged metrics, each a dict with the keys ``removed``, ``partner`` and
        ``correlation``
    """
    Y: np.ndarray
    Xstar: np.ndarray
    Ystar: np.ndarray
    T: np.ndarray
    coords: np.ndarray
    unit_ids: List[str]
    unit_names: List[str]
    income_group: List[str]
    anchor_index: Optional[int] = None
    metric_names: List[str] = dataclasses.field(default_factory=list)
    covariate_names: List[str] = dataclasses.field(default_factory=list)
    lagged_metric_names: List[str] = dataclasses.field(default_factory=list)
    treatment_name: str = 'T'
    standardization_log: 'OrderedDict[str, Tuple[float, float]]' = dataclasses.field(default_factory=OrderedDict)
    pruning_log: List[dict] = dataclasses.field(default_factory=list)
    prune_threshold: float = 0.8

    def __post_init__(self):
        self.Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        n = self.Y.shape[0]
        self.Xstar = _columns(self.Xstar, n)
        self.Ystar = _columns(self.Ystar, n)
        self.T = np.asarray(self.T, dtype=float).ravel()
        self.coords = np.asarray(self.coords, dtype=float).reshape(-1, 2)
        self.unit_ids = [str(u) for u in self.unit_ids]
        self.unit_names = [str(u) for u in self.unit_names]
        self.income_group = [str(g) for g in self.income_group]
        if not self.metric_names:
            self.metric_names = ['y{}'.format(j + 1) for j in range(self.P)]
        if not self.covariate_names:
            self.covariate_names = ['x{}'.format(k + 1) for k in range(self.K)]
        if not self.lagged_metric_names:
            self.lagged_metric_names = ['ylag{}'.format(q + 1) for q in range(self.Q)]
        self.standardization_log = OrderedDict(self.standardization_log)

    @property
    def N(self):
        return self.Y.shape[0]

    @property
    def P(self):
        return self.Y.shape[1]

    @property
    def K(self):
        return self.Xstar.shape[1]

    @property
    def Q(self):
        return self.Ystar.shape[1]

    @property
    def Z(self):
        """
        The treatment-model design ``Z* = (1, X*, Y*)``, N x (1+K+Q).
        """
        return np.column_stack([np.ones(self.N), self.Xstar, self.Ystar])

    @property
    def W(self):
        """
        The base-model design ``W* = (1, T, X*, Y*)``, N x (2+K+Q).
        """
        return np.column_stack([np.ones(self.N), self.T, self.Xstar, self.Ystar])

    @property
    def covariates(self):
        """
        The covariate block ``(X*, Y*)`` without the intercept column.
        """
        return np.column_stack([self.Xstar, self.Ystar])

    def _groups(self):
        return [('Y', self.metric_names, self.Y),
                ('X', self.covariate_names, self.Xstar),
                ('Ystar', self.lagged_metric_names, self.Ystar),
                ('T', [self.treatment_name], self.T[:, None])]  # a view, so writes reach self.T

    def column(self, key):
        """
        Get the column identified by *key* (see :func:`column_key`) as a vector.
        """
        for group, names, matrix in self._groups():
            for j, name in enumerate(names):
                if column_key(group, name) == key:
                    return matrix[:, j]
        raise KeyError(key)

    def to_raw_treatment(self, t):
        """
        Map standardized treatment values *t* back to the raw (transformed) scale through :attr:`standardization_log`.
        If the treatment was not standardized, *t* is returned unchanged.
        """
        key = column_key('T', self.treatment_name)
        t = np.asarray(t, dtype=float)
        if key not in self.standardization_log:
            return t
        mean, sd = self.standardization_log[key]
        return mean + sd * t

    def validate(self):
        """
        Check every dataset invariant and raise the corresponding :class:`~lacsh.core.errors.DataError` on violation.

        :return: the dataset itself
        """
        n = self.N
        for name, value in (('Xstar', self.Xstar), ('Ystar', self.Ystar)):
            if value.shape[0] != n:
                raise InvalidDataset('{} has {} rows but Y has {}'.format(name, value.shape[0], n))
        for name, value in (('T', self.T), ('coords', self.coords), ('unit_ids', self.unit_ids),
                            ('unit_names', self.unit_names), ('income_group', self.income_group)):
            if len(value) != n:
                raise InvalidDataset('{} has length {} but the dataset has {} units'.format(name, len(value), n))
        if n < 3:
            raise InvalidDataset('at least 3 units are required, got {}'.format(n))
        if self.P < 1:
            raise InvalidDataset('at least one metric is required')
        if self.Q >= self.P:
            raise InvalidDataset('the number of lagged metrics Q={} must be smaller than P={}'.format(self.Q, self.P))
        for name, value in (('metric_names', self.metric_names), ('covariate_names', self.covariate_names),
                            ('lagged_metric_names', self.lagged_metric_names)):
            if len(value) != {'metric_names': self.P, 'covariate_names': self.K,
                              'lagged_metric_names': self.Q}[name]:
                raise InvalidDataset('{} does not match the data columns'.format(name))
        validate_coordinates(self.coords, self.unit_ids)
        if self.anchor_index is not None and not 0 <= self.anchor_index < n:
            raise InvalidDataset('anchor index {} outside [0, {})'.format(self.anchor_index, n))
        for key in self.standardization_log:
            x = self.column(key)
            if abs(x.mean()) >= _STANDARDIZATION_TOL or abs(x.std() - 1) >= _STANDARDIZATION_TOL:
                raise InvalidDataset('column {} is not standardized'.format(key))
        for arr_name in ('Y', 'Xstar', 'Ystar', 'T'):
            if not np.all(np.isfinite(getattr(self, arr_name))):
                raise InvalidDataset('{} contains missing or infinite values'.format(arr_name))
        self._check_collinearity()
        return self

    def _check_collinearity(self):
        if self.Q == 0:
            return
        corr = np.corrcoef(self.covariates, rowvar=False)
        corr = np.atleast_2d(corr)
        k = self.K
        for j in range(k, k + self.Q):
            others = np.abs(np.delete(corr[j], j))
            if others.size and others.max() >= self.prune_threshold:
                raise InvalidDataset('lagged metric {} is correlated at {:.4f} with another covariate'.format(
                    self.lagged_metric_names[j - k], others.max()))
        if k > 1:
            xx = np.abs(corr[:k, :k] - np.eye(k))
            if xx.max() >= self.prune_threshold:
                _logger.warning('Covariates of X* are correlated at %.4f; covariates are never pruned.', xx.max())

    def subset(self, indices, restandardize=True):
        """
        Restrict the dataset to the units *indices* (kept in the given order).

        :param indices: sequence of unit indices
        :param restandardize: re-standardize every logged column on the retained units and compose the standardization
            log so that it still maps back to the raw scale
        :return: a new :class:`Dataset`
        """
        indices = [int(i) for i in indices]
        if self.anchor_index is None:
            anchor = None
        elif self.anchor_index in indices:
            anchor = indices.index(self.anchor_index)
        else:
            raise InvalidDataset('the anchor unit {} is not part of the subset'.format(self.unit_ids[self.anchor_index]))
        sub = dataclasses.replace(
            self,
            Y=self.Y[indices].copy(), Xstar=self.Xstar[indices].copy(), Ystar=self.Ystar[indices].copy(),
            T=self.T[indices].copy(), coords=self.coords[indices].copy(),
            unit_ids=[self.unit_ids[i] for i in indices], unit_names=[self.unit_names[i] for i in indices],
            income_group=[self.income_group[i] for i in indices], anchor_index=anchor,
            standardization_log=OrderedDict(self.standardization_log), pruning_log=list(self.pruning_log))
        if restandardize:
            for group, names, matrix in sub._groups():
                for j, name in enumerate(names):
                    key = column_key(group, name)
                    if key not in sub.standardization_log:
                        continue
                    x = matrix[:, j]
                    m, s = x.mean(), x.std()
                    if s <= 0:
                        raise InvalidDataset('column {} is constant on the subset'.format(key))
                    matrix[:, j] = (x - m) / s
                    raw_mean, raw_sd = sub.standardization_log[key]
                    sub.standardization_log[key] = (raw_mean + raw_sd * m, raw_sd * s)
        return sub


def validate_coordinates(coords, labels=None):
    """
    Check that latitudes lie in [-90, 90] and longitudes in (-180, 180].

    :raises InvalidCoordinate: naming the first offending unit
    """
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    bad = ~((coords[:, 0] >= -90) & (coords[:, 0] <= 90) & (coords[:, 1] > -180) & (coords[:, 1] <= 180))
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        label = labels[i] if labels is not None else i
        raise InvalidCoordinate('invalid coordinate ({}, {}) for unit {}'.format(coords[i, 0], coords[i, 1], label))


@dataclasses.dataclass
class ParameterState:
    """
    One state of the Markov chain.

    :param a: loadings, length P
    :param H: latent health, length N
    :param Sigma_Y: P x P metric covariance
    :param beta: the six coefficients of the H-level mean
    :param gamma: treatment-model coefficients, length 1+K+Q
    :param sigma2_T: treatment-model variance
    :param sigma2_H: spatial variance of the latent health
    :param phi: inverse decay rate of the spatial correlation, in megameters
    :param zeta: coefficients of the base latent health model, length 2+K+Q, or None
    """
    a: np.ndarray
    H: np.ndarray
    Sigma_Y: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    sigma2_T: float
    sigma2_H: float
    phi: float
    zeta: Optional[np.ndarray] = None

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float).ravel()
        self.H = np.asarray(self.H, dtype=float).ravel()
        self.Sigma_Y = np.atleast_2d(np.asarray(self.Sigma_Y, dtype=float))
        self.beta = np.asarray(self.beta, dtype=float).ravel()
        self.gamma = np.asarray(self.gamma, dtype=float).ravel()
        self.sigma2_T = float(self.sigma2_T)
        self.sigma2_H = float(self.sigma2_H)
        self.phi = float(self.phi)
        if self.zeta is not None:
            self.zeta = np.asarray(self.zeta, dtype=float).ravel()

    def copy(self):
        return copy.deepcopy(self)

    def validate(self, anchor_index=None):
        """
        Check the state invariants.

        :raises InvalidState: if the anchor is nonnegative, a variance is not positive or the shapes disagree
        """
        if self.beta.shape != (N_BETA,):
            raise InvalidState('beta must have {} entries'.format(N_BETA))
        if self.Sigma_Y.shape != (self.a.size, self.a.size):
            raise InvalidState('Sigma_Y must be {0} x {0}'.format(self.a.size))
        if anchor_index is not None and not self.H[anchor_index] < 0:
            raise InvalidState('the anchor latent health must be negative, got {}'.format(self.H[anchor_index]))
        for name in ('sigma2_T', 'sigma2_H', 'phi'):
            if not getattr(self, name) > 0:
                raise InvalidState('{} must be positive'.format(name))
        if not np.allclose(self.Sigma_Y, self.Sigma_Y.T) or np.linalg.eigvalsh(self.Sigma_Y).min() <= 0:
            raise InvalidState('Sigma_Y must be symmetric positive definite')
        return self


@dataclasses.dataclass
class PriorSpec:
    """
    Prior hyperparameters. Every loading, every coefficient of the H-level mean, the treatment model and the base model
    as well as ``log(sigma2_H)`` and ``log(phi)`` receive a ``N(coef_mean, coef_var)`` prior. ``Sigma_Y`` has an
    inverse-Wishart prior and ``sigma2_T`` an inverse-gamma prior. *sigmaY_df* and *sigmaY_scale* default to ``P + 2``
    and the identity; see :meth:`resolved`.
    """
    coef_mean: float = 0.0
    coef_var: float = 100.0
    sigmaY_df: Optional[float] = None
    sigmaY_scale: Optional[np.ndarray] = None
    sigma2T_shape: float = 1.0
    sigma2T_scale: float = 0.01

    def resolved(self, P):
        """
        Return a copy with the inverse-Wishart hyperparameters filled in for *P* metrics and validated.
        """
        prior = dataclasses.replace(self)
        if prior.sigmaY_df is None:
            prior.sigmaY_df = P + 2.0
        if prior.sigmaY_scale is None:
            prior.sigmaY_scale = np.eye(P)
        elif np.ndim(prior.sigmaY_scale) == 0:
            prior.sigmaY_scale = float(prior.sigmaY_scale) * np.eye(P)
        prior.sigmaY_scale = np.atleast_2d(np.asarray(prior.sigmaY_scale, dtype=float))
        if prior.coef_var <= 0 or prior.sigma2T_shape <= 0 or prior.sigma2T_scale <= 0:
            raise InvalidParameter('prior variances and scales must be positive')
        if prior.sigmaY_df <= P - 1:
            raise InvalidDf('the inverse-Wishart degrees of freedom must exceed P - 1 = {}'.format(P - 1))
        if prior.sigmaY_scale.shape != (P, P):
            raise InvalidParameter('the inverse-Wishart scale must be {0} x {0}'.format(P))
        return prior


#: recognized values of :attr:`McmcConfig.model_variant`
MODEL_VARIANTS = ('lacsh', 'base_lhfi')
#: recognized values of :attr:`McmcConfig.outcome_terms`
OUTCOME_TERMS = ('full', 'linear_only')
#: recognized values of :attr:`McmcConfig.truncation`
TRUNCATION_MODES = ('marginal', 'conditional', 'none')


@dataclasses.dataclass
class McmcConfig:
    """
    Settings of one Markov chain.

    :param n_scans: total number of scans including burn-in
    :param burn_in: number of leading scans that are discarded
    :param thin: keep every *thin*-th scan after burn-in
    :param seed: seed of the chain's random stream
    :param adapt_start: scans up to and including this index use the narrow proposal only
    :param proposal_scale_v: scale *v* of the adaptive component ``MVN(u, v^2 Sigma_s / d)``
    :param mixture_weight: weight of the adaptive component
    :param narrow_scale: standard deviation factor of the narrow component ``MVN(u, narrow_scale^2 I / d)``
    :param anchor_index: anchor unit; None runs an unanchored pilot
    :param model_variant: ``'lacsh'`` or ``'base_lhfi'``
    :param outcome_terms: ``'full'`` or ``'linear_only'`` (drops the quadratic and interaction terms)
    :param truncation: normalization of the anchored H-level density, ``'marginal'``, ``'conditional'`` or ``'none'``.
        The default ``'marginal'`` divides by the marginal probability ``Phi(-mu_anc / sqrt(Sigma_anc))``, so the
        non-anchor Gibbs conditionals stay exactly normal. ``'conditional'`` instead uses the anchor's truncation
        probability given the other units, ``Phi(-m_anc / sqrt(D_anc))``, and ``'none'`` keeps only the indicator.
    :param fixed: names of parameters held at their initial values, e.g. ``('gamma', 'sigma2_T')`` or ``('beta_3',)``
    :param log_every: scans between two logbook records
    :param checkpoint_every: scans between two periodic checkpoints, 0 disables them
    :param checkpoint_path: where checkpoints are written
    """
    n_scans: int = 120000
    burn_in: int = 20000
    thin: int = 10
    seed: int = 0
    adapt_start: int = 200
    proposal_scale_v: float = 2.38
    mixture_weight: float = 0.9
    narrow_scale: float = 0.1
    anchor_index: Optional[int] = None
    model_variant: str = 'lacsh'
    outcome_terms: str = 'full'
    truncation: str = 'marginal'
    fixed: Tuple[str, ...] = ()
    log_every: int = 1000
    checkpoint_every: int = 0
    checkpoint_path: Optional[str] = None

    def __post_init__(self):
        self.fixed = tuple(self.fixed)

    def validate(self):
        """
        :raises InvalidValue: on inconsistent settings
        """
        if self.n_scans < 1 or self.burn_in < 0 or self.burn_in >= self.n_scans:
            raise InvalidValue('burn_in must lie in [0, n_scans), got burn_in={} n_scans={}'.format(
                self.burn_in, self.n_scans))
        if self.thin < 1 or self.thin > self.n_scans - self.burn_in:
            raise InvalidValue('thin must lie in [1, n_scans - burn_in], got {}'.format(self.thin))
        if not 0 <= self.mixture_weight <= 1:
            raise InvalidValue('mixture_weight must lie in [0, 1]')
        if self.proposal_scale_v <= 0 or self.narrow_scale <= 0:
            raise InvalidValue('proposal scales must be positive')
        if self.adapt_start < 0:
            raise InvalidValue('adapt_start must be nonnegative')
        for name, allowed in (('model_variant', MODEL_VARIANTS), ('outcome_terms', OUTCOME_TERMS),
                              ('truncation', TRUNCATION_MODES)):
            if getattr(self, name) not in allowed:
                raise InvalidValue('{} must be one of {}, got {!r}'.format(name, allowed, getattr(self, name)))
        if self.log_every < 1 or self.checkpoint_every < 0:
            raise InvalidValue('log_every must be positive and checkpoint_every nonnegative')
        return self

    def as_dict(self):
        d = dataclasses.asdict(self)
        d['fixed'] = list(self.fixed)
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def _as_rows(x, s):
    x = np.asarray(x, dtype=float)
    if s:
        return x.reshape(s, -1)
    return np.empty((0, x.shape[-1] if x.ndim >= 2 else 0))


class ChainStore:
    """
    Retained (post burn-in, thinned) draws of a chain, stored column-wise. Indexing a store returns the corresponding
    :class:`ParameterState`; :attr:`draws` lists all of them.

    Besides the draws, a store keeps the scan index and the Metropolis accept flag of each retained draw, the total
    number of block proposals and acceptances over the whole run, a snapshot of the adaptive proposal covariance, the
    seed, an echo of the configuration and the :class:`deap.tools.Logbook` of the run.
    """
    def __init__(self, a, H, Sigma_Y, beta, gamma, sigma2_T, sigma2_H, phi, zeta=None, scan_index=None,
                 accepted=None, acceptance_count=0, n_proposals=0, proposal_covariance=None, block_names=(),
                 seed=None, config=None, anchor_index=None, logbook=None):
        s = len(a)
        self.a = _as_rows(a, s)
        self.H = _as_rows(H, s)
        p = self.a.shape[1]
        self.Sigma_Y = np.asarray(Sigma_Y, dtype=float).reshape(s, p, p)
        self.beta = _as_rows(beta, s)
        self.gamma = _as_rows(gamma, s)
        self.sigma2_T = np.asarray(sigma2_T, dtype=float).reshape(s)
        self.sigma2_H = np.asarray(sigma2_H, dtype=float).reshape(s)
        self.phi = np.asarray(phi, dtype=float).reshape(s)
        self.zeta = None if zeta is None else _as_rows(zeta, s)
        self.scan_index = np.arange(1, s + 1) if scan_index is None else np.asarray(scan_index, dtype=int)
        self.accepted = np.zeros(s, dtype=bool) if accepted is None else np.asarray(accepted, dtype=bool)
        self.acceptance_count = int(acceptance_count)
        self.n_proposals = int(n_proposals)
        self.proposal_covariance = None if proposal_covariance is None else np.asarray(proposal_covariance, float)
        self.block_names = list(block_names)
        self.seed = seed
        self.config = dict(config or {})
        self.anchor_index = anchor_index
        self.logbook = logbook

    @classmethod
    def from_states(cls, states, **kwargs):
        """
        Build a store from a sequence of :class:`ParameterState` objects.
        """
        states = list(states)
        zeta = None
        if states and states[0].zeta is not None:
            zeta = [st.zeta for st in states]
        return cls(a=[st.a for st in states], H=[st.H for st in states], Sigma_Y=[st.Sigma_Y for st in states],
                   beta=[st.beta for st in states], gamma=[st.gamma for st in states],
                   sigma2_T=[st.sigma2_T for st in states], sigma2_H=[st.sigma2_H for st in states],
                   phi=[st.phi for st in states], zeta=zeta, **kwargs)

    def __len__(self):
        return self.a.shape[0]

    def __getitem__(self, k):
        return ParameterState(a=self.a[k], H=self.H[k], Sigma_Y=self.Sigma_Y[k], beta=self.beta[k],
                              gamma=self.gamma[k], sigma2_T=self.sigma2_T[k], sigma2_H=self.sigma2_H[k],
                              phi=self.phi[k], zeta=None if self.zeta is None else self.zeta[k])

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    @property
    def draws(self):
        return list(self)

    @property
    def N(self):
        return self.H.shape[1]

    @property
    def P(self):
        return self.a.shape[1]

    @property
    def acceptance_rate(self):
        """
        Fraction of accepted block proposals over the whole run.
        """
        return self.acceptance_count / self.n_proposals if self.n_proposals else 0.0

    def scalar_columns(self):
        """
        Flatten the store into named scalar columns.

        :return: a tuple ``(names, matrix)`` where *matrix* has one row per draw. ``Sigma_Y`` is vectorized over its
            lower triangle as ``Sigma_Y_i_j`` with ``i >= j`` (1-based).
        """
        names, blocks = [], []
        names += ['a_{}'.format(j + 1) for j in range(self.P)]
        blocks.append(self.a)
        names += ['H_{}'.format(i + 1) for i in range(self.N)]
        blocks.append(self.H)
        rows, cols = np.tril_indices(self.P)
        names += ['Sigma_Y_{}_{}'.format(i + 1, j + 1) for i, j in zip(rows, cols)]
        blocks.append(self.Sigma_Y[:, rows, cols])
        names += ['beta_{}'.format(k) for k in range(self.beta.shape[1])]
        blocks.append(self.beta)
        names += ['gamma_{}'.format(k) for k in range(self.gamma.shape[1])]
        blocks.append(self.gamma)
        names += ['sigma2_T', 'sigma2_H', 'phi']
        blocks.append(np.column_stack([self.sigma2_T, self.sigma2_H, self.phi]))
        if self.zeta is not None:
            names += ['zeta_{}'.format(k) for k in range(self.zeta.shape[1])]
            blocks.append(self.zeta)
        return names, np.column_stack(blocks) if len(self) else np.empty((0, len(names)))

    @classmethod
    def from_scalar_columns(cls, names, matrix, **kwargs):
        """
        Inverse of :meth:`scalar_columns`.
        """
        names = list(names)
        matrix = np.asarray(matrix, dtype=float)

        def block(prefix):
            idx = [k for k, n in enumerate(names) if n.startswith(prefix)]
            return matrix[:, idx]

        a = block('a_')
        p = a.shape[1]
        tri = block('Sigma_Y_')
        rows, cols = np.tril_indices(p)
        sigma = np.zeros((matrix.shape[0], p, p))
        sigma[:, rows, cols] = tri
        sigma[:, cols, rows] = tri
        zeta = block('zeta_') if any(n.startswith('zeta_') for n in names) else None
        col = {n: k for k, n in enumerate(names)}
        return cls(a=a, H=block('H_'), Sigma_Y=sigma, beta=block('beta_'), gamma=block('gamma_'),
                   sigma2_T=matrix[:, col['sigma2_T']], sigma2_H=matrix[:, col['sigma2_H']],
                   phi=matrix[:, col['phi']], zeta=zeta, **kwargs)

    def parameter(self, name):
        """
        Draws of the scalar parameter *name*, e.g. ``'H_3'`` or ``'phi'``.
        """
        names, matrix = self.scalar_columns()
        return matrix[:, names.index(name)]


__all__ = ['Dataset', 'ParameterState', 'PriorSpec', 'McmcConfig', 'ChainStore', 'column_key',
           'validate_coordinates', 'COLUMN_GROUPS', 'N_BETA', 'MODEL_VARIANTS', 'OUTCOME_TERMS', 'TRUNCATION_MODES']
