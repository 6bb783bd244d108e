# coding=utf-8
"""
.. moduleauthor:: lacsh developers

This :mod:`basic` module provides the chain driver :func:`run_chain`. After the update steps are registered into a
:class:`~lacsh.tools.toolbox.Toolbox` (see :func:`build_toolbox`), a chain is simply launched with :func:`run_chain`. For
custom schemes, e.g. a joint-distribution check that alternates scans with data simulation, :class:`ChainRunner`
exposes one scan at a time.

A scan applies, in this order, (1) the latent health of the non-anchor units, (2) the loadings, (3) ``Sigma_Y``,
(4) ``sigma2_T``, (5) *gamma* with cut feedback followed by the recomputation of the GPS values and (6) the adaptive
Metropolis block. The factorization of ``Sigma_H`` is refreshed only when ``sigma2_H`` or *phi* changes.

Randomness is split into three sub-streams of the chain's seed: ``'latent'`` for steps 1-3, ``'treatment'`` for steps
4-5 and ``'block'`` for step 6. The treatment sub-chain therefore consumes its own stream only and is exactly invariant
to the metrics and to the latent health level.
"""
import logging
import warnings

import deap.tools
import numpy as np

from ..core.entity import ChainStore, ParameterState, N_BETA
from ..core.errors import InvalidValue, InvalidState, LacshError
from ..core.model import LacshModel
from ..core.spatial import distance_matrix
from ..tools.kernels import first_principal_component
from ..tools.random import as_stream
from ..tools.toolbox import Toolbox
from ..support.persistence import save_checkpoint, load_checkpoint
from .adaptive import AdaptiveMetropolis, update_hblock_adaptive_mh
from .updates import (update_H_nonanchor, update_a, update_Sigma_Y, update_sigma2_T, update_gamma_cutfeedback)

_logger = logging.getLogger(__name__)

#: names of the sub-streams of a chain, in spawn order
STREAM_NAMES = ('latent', 'treatment', 'block')

#: parameters of the Gibbs steps that may be held fixed, with the step alias they disable
GIBBS_PARAMETERS = {'H': 'update_H', 'a': 'update_a', 'Sigma_Y': 'update_Sigma_Y', 'sigma2_T': 'update_sigma2_T',
                    'gamma': 'update_gamma'}

_LINEAR_ONLY_FIXED = ('beta_2', 'beta_4', 'beta_5')


def initial_state(data, config):
    """
    Deterministic starting state of a chain: the latent health is the standardized first principal component of the
    metrics, oriented so that the anchor is negative; the loadings are the per-metric least-squares slopes on it;
    ``Sigma_Y`` is the identity; *beta* is zero; *gamma* and ``sigma2_T`` come from least squares of the treatment on
    ``Z*``; ``sigma2_H`` is 1 and *phi* the median pairwise distance.
    """
    anchor = config.anchor_index
    Y = data.Y
    if data.N > 1 and np.any(Y.std(axis=0) > 0):
        h = first_principal_component(Y)
        h = h / h.std() if h.std() > 0 else np.full(data.N, -1.0)
    else:
        h = np.full(data.N, -1.0)
    if anchor is not None:
        if h[anchor] > 0:
            h = -h
        if not h[anchor] < 0:
            h[anchor] = -0.1
    a = Y.T @ h / (h @ h)
    Z = data.Z
    gamma = np.linalg.lstsq(Z, data.T, rcond=None)[0]
    resid = data.T - Z @ gamma
    sigma2_T = max(float(resid @ resid) / data.N, 1e-2)
    phi = 1.0
    if config.model_variant == 'lacsh' and data.N > 1:
        D = distance_matrix(data.coords).D
        d = D[np.triu_indices(data.N, 1)]
        if np.median(d) > 0:
            phi = float(np.median(d))
    zeta = None
    if config.model_variant == 'base_lhfi':
        zeta = np.linalg.lstsq(data.W, h, rcond=None)[0]
    return ParameterState(a=a, H=h, Sigma_Y=np.eye(data.P), beta=np.zeros(N_BETA), gamma=gamma, sigma2_T=sigma2_T,
                          sigma2_H=1.0, phi=phi, zeta=zeta)


def _block_free_mask(block_names, fixed, outcome_terms, variant):
    fixed = set(fixed)
    if outcome_terms == 'linear_only' and variant == 'lacsh':
        fixed.update(_LINEAR_ONLY_FIXED)
    aliases = {'sigma2_H': 'log_sigma2_H', 'phi': 'log_phi'}
    names = {aliases.get(f, f) for f in fixed}
    known = set(block_names) | set(GIBBS_PARAMETERS) | {'beta', 'zeta', 'log_sigma2_H', 'log_phi', 'H_anc'}
    unknown = sorted(n for n in names if n not in known and not n.startswith(('beta_', 'zeta_')))
    if unknown:
        raise InvalidValue('unknown fixed parameters: {}'.format(', '.join(unknown)))
    return np.array([not (n in names or n.split('_')[0] in names) for n in block_names])


def _step_H(runner):
    state, model = runner.state, runner.model
    key = (state.sigma2_H, state.phi)
    if runner._precision_key != key:
        runner._precision = model.h_factor(state).inverse()
        runner._precision_key = key
    state.H = update_H_nonanchor(state, model.data, None, runner.streams['latent'], mean=model.mean(state, runner.R),
                                 anchor_index=model.anchor_index, precision=runner._precision)


def _step_a(runner):
    runner.state.a = update_a(runner.state, runner.model.data, runner.streams['latent'], runner.model.prior)


def _step_Sigma_Y(runner):
    runner.state.Sigma_Y = update_Sigma_Y(runner.state, runner.model.data, runner.streams['latent'],
                                          runner.model.prior)


def _step_sigma2_T(runner):
    runner.state.sigma2_T = update_sigma2_T(runner.state, runner.model.data, runner.streams['treatment'],
                                            runner.model.prior)
    runner.refresh_gps()


def _step_gamma(runner):
    runner.state.gamma = update_gamma_cutfeedback(runner.state, runner.model.data, runner.streams['treatment'],
                                                  runner.model.prior)
    runner.refresh_gps()


def _step_hblock(runner):
    runner.state, runner.accepted = update_hblock_adaptive_mh(runner.state, runner.model.data, runner.history,
                                                              runner.streams['block'], runner.model, runner.scan,
                                                              runner.R)


def build_toolbox(config, block_free=None):
    """
    Register and schedule the update steps of *config*: every Gibbs step whose parameter is not held fixed, the
    treatment steps only for the ``lacsh`` variant, and the Metropolis block unless all its coordinates are fixed.

    :return: :class:`~lacsh.tools.toolbox.Toolbox`
    """
    fixed = set(config.fixed)
    tb = Toolbox()
    steps = [('H', _step_H), ('a', _step_a), ('Sigma_Y', _step_Sigma_Y)]
    if config.model_variant == 'lacsh':
        steps += [('sigma2_T', _step_sigma2_T), ('gamma', _step_gamma)]
    for name, fn in steps:
        if name not in fixed:
            tb.register(GIBBS_PARAMETERS[name], fn, step=True)
    if block_free is None or np.any(block_free):
        tb.register('update_hblock', _step_hblock, step=True)
    return tb


def _validate_scan_toolbox(tb):
    """
    Validate the steps in the toolbox *tb* according to our conventions.
    """
    for alias in tb.schedule:
        assert alias.startswith('update'), "Scheduled steps must start with 'update'."
        assert hasattr(tb, alias), "Step '{}' is scheduled, but it is not registered in the toolbox.".format(alias)
    for alias in [attr for attr in dir(tb) if attr.startswith('update')]:
        if alias not in tb.schedule:
            warnings.warn('{0} is registered, but it is NOT in Toolbox.schedule. The step {0} will NOT be applied '
                          'and its parameters stay at their initial values.'.format(alias), category=UserWarning)


class ChainRunner:
    """
    One Markov chain advanced scan by scan.

    :param data: :class:`~lacsh.core.entity.Dataset`
    :param config: :class:`~lacsh.core.entity.McmcConfig`
    :param prior: :class:`~lacsh.core.entity.PriorSpec`, optional
    :param initial: starting :class:`~lacsh.core.entity.ParameterState`, by default :func:`initial_state`
    :param toolbox: a :class:`~lacsh.tools.toolbox.Toolbox` of steps taking the runner; :func:`build_toolbox` by default
    :param rng: root :class:`~lacsh.tools.random.RandomStream` or seed; ``config.seed`` by default
    """
    def __init__(self, data, config, prior=None, initial=None, toolbox=None, rng=None):
        self.config = config.validate()
        self.model = LacshModel(data, prior, anchor_index=config.anchor_index, variant=config.model_variant,
                                truncation=config.truncation)
        self.state = initial.copy() if initial is not None else initial_state(data, config)
        if config.model_variant == 'base_lhfi' and self.state.zeta is None:
            raise InvalidState('the base_lhfi variant needs an initial zeta')
        if config.model_variant == 'lacsh' and config.outcome_terms == 'linear_only':
            self.state.beta[list(int(n[-1]) for n in _LINEAR_ONLY_FIXED)] = 0.0
        self.state.validate(config.anchor_index)
        root = as_stream(config.seed if rng is None else rng)
        self.streams = dict(zip(STREAM_NAMES, root.spawn(len(STREAM_NAMES))))
        names = self.model.block_names
        free = _block_free_mask(names, config.fixed, config.outcome_terms, config.model_variant)
        self.history = AdaptiveMetropolis(len(names), adapt_start=config.adapt_start,
                                          scale_v=config.proposal_scale_v, mixture_weight=config.mixture_weight,
                                          narrow_scale=config.narrow_scale, free=free)
        self.toolbox = toolbox if toolbox is not None else build_toolbox(config, free)
        _validate_scan_toolbox(self.toolbox)
        self.scan = 0
        self.accepted = False
        self._precision = None
        self._precision_key = None
        self.R = None
        self.refresh_gps()

    def refresh_gps(self):
        """
        Recompute the GPS values from the current *gamma* and ``sigma2_T``.
        """
        if self.model.variant == 'lacsh':
            self.R = self.model.gps(self.state)

    def step(self):
        """
        Run one scan and return the current state.
        """
        self.scan += 1
        self.accepted = False
        for alias in self.toolbox.schedule:
            getattr(self.toolbox, alias)(self)
        return self.state

    def log_posterior(self):
        """
        Unnormalized log posterior of the current state, as reported in the logbook.
        """
        return float(self.model.h_log_density(self.state, self.R) + self.model.y_log_likelihood(self.state).sum())

    def checkpoint(self, retained=(), logbook=None):
        """
        Everything needed to resume the chain exactly, as a picklable dict.
        """
        return {'scan': self.scan, 'state': self.state.copy(),
                'streams': {name: s.state for name, s in self.streams.items()},
                'adaptation': self.history.get_state(), 'retained': list(retained), 'logbook': logbook,
                'config': self.config.as_dict()}

    def restore(self, payload):
        self.scan = payload['scan']
        self.state = payload['state'].copy()
        for name, st in payload['streams'].items():
            self.streams[name].state = st
        self.history.set_state(payload['adaptation'])
        self.refresh_gps()


def run_chain(config, data, rng=None, prior=None, initial=None, toolbox=None, verbose=__debug__, resume_from=None):
    """
    Run one Markov chain and keep the thinned post burn-in draws.

    :param config: :class:`~lacsh.core.entity.McmcConfig`
    :param data: :class:`~lacsh.core.entity.Dataset`
    :param rng: root random stream or seed, ``config.seed`` by default
    :param prior: :class:`~lacsh.core.entity.PriorSpec`, optional
    :param initial: starting state, optional
    :param toolbox: custom :class:`~lacsh.tools.toolbox.Toolbox` of steps, optional
    :param verbose: whether or not to print the logbook records
    :param resume_from: path of a checkpoint to resume from
    :returns: :class:`~lacsh.core.entity.ChainStore` whose :attr:`logbook` is a :class:`deap.tools.Logbook` recording
        the progress of the chain

    .. note::
        When ``config.checkpoint_path`` is set, a checkpoint is written every ``config.checkpoint_every`` scans, at the
        end of the run, and before an error raised inside a scan propagates.
    """
    runner = ChainRunner(data, config, prior=prior, initial=initial, toolbox=toolbox, rng=rng)
    logbook = deap.tools.Logbook()
    logbook.header = ['scan', 'accept_rate', 'sigma2_H', 'phi', 'sigma2_T', 'logp']
    retained = []
    if resume_from is not None:
        payload = load_checkpoint(resume_from)
        runner.restore(payload)
        retained = list(payload['retained'])
        logbook = payload['logbook'] or logbook
        _logger.info('Resumed chain at scan %d from %s.', runner.scan, resume_from)

    while runner.scan < config.n_scans:
        try:
            runner.step()
        except LacshError:
            if config.checkpoint_path:
                save_checkpoint(runner.checkpoint(retained, logbook), config.checkpoint_path)
                _logger.error('Chain failed at scan %d; checkpoint written to %s.', runner.scan,
                              config.checkpoint_path)
            raise
        s = runner.scan
        if s > config.burn_in and (s - config.burn_in) % config.thin == 0:
            retained.append((s, runner.accepted, runner.state.copy()))
        if s % config.log_every == 0 or s == config.n_scans:
            st = runner.state
            logbook.record(scan=s, accept_rate=runner.history.acceptance_rate, sigma2_H=st.sigma2_H, phi=st.phi,
                           sigma2_T=st.sigma2_T, logp=runner.log_posterior())
            if verbose:
                print(logbook.stream)
        if config.checkpoint_path and config.checkpoint_every and s % config.checkpoint_every == 0:
            save_checkpoint(runner.checkpoint(retained, logbook), config.checkpoint_path)

    if config.checkpoint_path:
        save_checkpoint(runner.checkpoint(retained, logbook), config.checkpoint_path)
    history = runner.history
    return ChainStore.from_states([r[2] for r in retained], scan_index=[r[0] for r in retained],
                                  accepted=[r[1] for r in retained], acceptance_count=history.n_accepted,
                                  n_proposals=history.n_proposals, proposal_covariance=history.covariance,
                                  block_names=runner.model.block_names, seed=config.seed, config=config.as_dict(),
                                  anchor_index=config.anchor_index, logbook=logbook)


__all__ = ['run_chain', 'ChainRunner', 'build_toolbox', 'initial_state', 'STREAM_NAMES', 'GIBBS_PARAMETERS']
