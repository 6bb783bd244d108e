# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The module :mod:`experiments` holds the statistical acceptance experiments of the engine:

* :func:`coverage_experiment` generates and refits synthetic datasets and counts how often the 90% credible intervals
  cover the truth;
* :func:`lpml_comparison` compares the LPML of the full and the linear outcome terms on data generated with curvature;
* :func:`balance_calibration` measures how often the covariate balance diagnostic flags blocks when the treatment is
  random, and whether it detects confounding when the GPS regressor is removed;
* :func:`adaptive_calibration` runs the adaptive Metropolis sampler on a standard normal target;
* :func:`getting_it_right` compares the moments of prior draws with those of a chain that alternates sampler scans
  with simulating new metrics, which agree only if every update targets the right conditional.

Replicates draw their randomness from child streams of one :class:`numpy.random.SeedSequence`. The coverage and LPML
experiments run replicates in worker processes, at most ``LACSH_THREADS`` of them.
"""
import concurrent.futures
import dataclasses
import logging
import os

import numpy as np
import pandas as pd
from scipy import stats

from ..algorithms.adaptive import AdaptiveMetropolis
from ..algorithms.basic import run_chain, ChainRunner
from ..core.entity import Dataset, McmcConfig, ParameterState, PriorSpec, N_BETA
from ..core.errors import InvalidValue, LacshError
from ..core.model import LacshModel
from ..support.balance import covariate_balance
from ..support.posterior import lpml, effective_sample_size
from ..tools.kernels import factorize, sample_inverse_wishart, sample_truncated_normal_upper
from ..tools.random import RandomStream, as_stream
from .synthetic import generate_synthetic, generate_coordinates

_logger = logging.getLogger(__name__)

#: fewest replicates of a coverage experiment
MIN_REPLICATES = 10
#: parameters whose interval coverage is tracked
COVERAGE_PARAMETERS = ('beta_1', 'sigma2_H', 'phi', 'a_j')


def worker_count(n_tasks):
    """
    Number of worker processes: ``LACSH_THREADS`` if set, else the CPU count, never more than *n_tasks*.
    """
    env = os.environ.get('LACSH_THREADS')
    try:
        cap = int(env) if env else (os.cpu_count() or 1)
    except ValueError:
        raise InvalidValue('LACSH_THREADS must be an integer, got {!r}'.format(env))
    return max(1, min(cap, n_tasks))


def _run_replicates(fn, tasks):
    workers = worker_count(len(tasks))
    if workers == 1:
        return [fn(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def _children(rng, n):
    return as_stream(rng).seed_sequence.spawn(n)


def _desk_mcmc():
    return McmcConfig(n_scans=6000, burn_in=1000, thin=5, log_every=1000)


@dataclasses.dataclass
class CoverageConfig:
    """
    Settings of :func:`coverage_experiment`.

    :param n_units: units per synthetic dataset
    :param P: metrics
    :param K: covariates
    :param Q: lagged metrics
    :param mcmc: :class:`~lacsh.core.entity.McmcConfig` of every fit; its seed and anchor are replaced per replicate
    :param coord_mode: see :func:`~lacsh.validation.synthetic.generate_synthetic`
    :param spatial_truth: if false the data are generated with spatially independent latent health (a misspecified
        fit for the spatial model)
    :param level: credible level of the intervals
    """
    n_units: int = 30
    P: int = 3
    K: int = 2
    Q: int = 1
    mcmc: McmcConfig = dataclasses.field(default_factory=_desk_mcmc)
    coord_mode: str = 'sphere_uniform'
    spatial_truth: bool = True
    level: float = 0.9


def _interval(draws, level):
    tail = (1.0 - level) / 2.0
    return np.quantile(draws, [tail, 1.0 - tail], method='linear')


def _coverage_replicate(task):
    k, seq, config = task
    gen, chain_rng = RandomStream(seq).spawn(2)
    row = {'replicate': k, 'status': 'ok', 'error': ''}
    try:
        truth = generate_synthetic(config.n_units, config.P, config.K, config.Q, 'random', config.coord_mode, gen,
                                   anchor_index=0, phi=None if config.spatial_truth else 1e-6)
        j = min(int(gen.uniform() * config.P), config.P - 1)
        mcmc = dataclasses.replace(config.mcmc, anchor_index=truth.data.anchor_index, checkpoint_path=None)
        chain = run_chain(mcmc, truth.data, rng=chain_rng, verbose=False)
        st = truth.state
        for name, draws, value in (('beta_1', chain.beta[:, 1], st.beta[1]),
                                   ('sigma2_H', chain.sigma2_H, st.sigma2_H),
                                   ('phi', chain.phi, st.phi),
                                   ('a_j', chain.a[:, j], st.a[j])):
            lo, hi = _interval(draws, config.level)
            row['covered_' + name] = bool(lo <= value <= hi)
        row['j'] = j
        row['acceptance_rate'] = chain.acceptance_rate
    except LacshError as e:
        row.update(status='failed', error='{}: {}'.format(type(e).__name__, e))
    return row


@dataclasses.dataclass
class ExperimentReport:
    """
    Result of an experiment: one row per replicate in :attr:`table` and an aggregate :attr:`summary`.
    """
    name: str
    table: pd.DataFrame
    summary: pd.DataFrame

    @property
    def n_failed(self):
        if 'status' not in self.table:
            return 0
        return int((self.table['status'] != 'ok').sum())

    def render(self):
        lines = ['{} ({} replicates, {} failed)'.format(self.name, len(self.table), self.n_failed)]
        lines.append(self.summary.to_string(index=False))
        return '\n'.join(lines)

    def write(self, directory):
        """
        Write ``<name>.csv``, ``<name>_summary.csv`` and the text summary ``<name>.txt`` into *directory*.
        """
        os.makedirs(directory, exist_ok=True)
        stem = os.path.join(directory, self.name.replace('-', '_'))
        paths = [stem + '.csv', stem + '_summary.csv', stem + '.txt']
        self.table.to_csv(paths[0], index=False, float_format='%.17g', lineterminator='\n')
        self.summary.to_csv(paths[1], index=False, float_format='%.17g', lineterminator='\n')
        with open(paths[2], 'w', encoding='utf-8', newline='\n') as f:
            f.write(self.render() + '\n')
        return paths


def binomial_band(n, p=0.9, confidence=0.95):
    """
    Exact binomial band ``(low, high)`` of the fraction of successes among *n* trials with success probability *p*.
    """
    tail = (1.0 - confidence) / 2.0
    return stats.binom.ppf(tail, n, p) / n, stats.binom.ppf(1.0 - tail, n, p) / n


def coverage_experiment(config, replicates, rng=None):
    """
    Repeatedly generate a synthetic dataset, fit it, and record whether the credible intervals of ``beta_1``,
    ``sigma2_H``, *phi* and a randomly chosen loading cover the truth. Replicates whose chain fails are reported,
    excluded from the fractions and counted.

    :param config: :class:`CoverageConfig`
    :param replicates: number of replicates, at least :data:`MIN_REPLICATES`
    :param rng: root stream or seed
    :return: :class:`ExperimentReport` whose summary lists, per parameter, the covered count, the fraction and the exact
        binomial 95% band around the nominal level
    """
    if replicates < MIN_REPLICATES:
        raise InvalidValue('a coverage experiment needs at least {} replicates, got {}'.format(MIN_REPLICATES,
                                                                                               replicates))
    tasks = [(k, seq, config) for k, seq in enumerate(_children(rng, replicates))]
    table = pd.DataFrame(_run_replicates(_coverage_replicate, tasks)).sort_values('replicate', ignore_index=True)
    ok = table[table['status'] == 'ok']
    rows = []
    for name in COVERAGE_PARAMETERS:
        col = 'covered_' + name
        n = len(ok)
        covered = int(ok[col].sum()) if n else 0
        lo, hi = binomial_band(n, config.level) if n else (np.nan, np.nan)
        rows.append({'parameter': name, 'covered': covered, 'n': n, 'fraction': covered / n if n else np.nan,
                     'band_low': lo, 'band_high': hi})
    report = ExperimentReport('coverage', table, pd.DataFrame(rows))
    _logger.info('Coverage experiment finished with %d failed replicates.', report.n_failed)
    return report


#: outcome coefficients of the curved truth of :func:`lpml_comparison`
CURVED_BETA = (0.0, 0.6, 0.8, 0.5, 1.5, 0.8)


def _lpml_replicate(task):
    k, seq, n_units, mcmc = task
    gen, chain_rng = RandomStream(seq).spawn(2)
    row = {'replicate': k, 'status': 'ok', 'error': ''}
    try:
        truth = generate_synthetic(n_units, 3, 2, 1, 'random', 'sphere_uniform', gen, anchor_index=0,
                                   beta=CURVED_BETA)
        states = chain_rng.spawn(2)
        for terms, stream in zip(('full', 'linear_only'), states):
            cfg = dataclasses.replace(mcmc, anchor_index=0, outcome_terms=terms, checkpoint_path=None)
            row['lpml_' + terms] = lpml(run_chain(cfg, truth.data, rng=stream, verbose=False), truth.data)
        row['delta'] = row['lpml_full'] - row['lpml_linear_only']
    except LacshError as e:
        row.update(status='failed', error='{}: {}'.format(type(e).__name__, e))
    return row


def lpml_comparison(replicates=10, rng=None, n_units=40, mcmc=None):
    """
    Fit the full and the linear outcome terms to data generated with quadratic and interaction terms
    (:data:`CURVED_BETA`) and compare their LPML.

    :return: :class:`ExperimentReport` with the per-replicate LPML values and the count of positive differences
    """
    mcmc = mcmc or _desk_mcmc()
    tasks = [(k, seq, n_units, mcmc) for k, seq in enumerate(_children(rng, replicates))]
    table = pd.DataFrame(_run_replicates(_lpml_replicate, tasks)).sort_values('replicate', ignore_index=True)
    ok = table[table['status'] == 'ok']
    summary = pd.DataFrame([{'n': len(ok), 'full_better': int((ok['delta'] > 0).sum()) if len(ok) else 0,
                             'mean_delta': float(ok['delta'].mean()) if len(ok) else np.nan}])
    return ExperimentReport('lpml-comparison', table, summary)


def balance_dataset(n_units, rng, K=3, confounded=False):
    """
    A dataset for the balance diagnostic: ``K`` standard normal covariates and a treatment that is either independent
    of them or a strong linear function of the first covariate plus small noise.
    """
    rng = as_stream(rng)
    X = rng.normal((n_units, K))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    if confounded:
        T = 2.0 * X[:, 0] + 0.1 * rng.normal(n_units)
    else:
        T = rng.normal(n_units)
    T = (T - T.mean()) / T.std()
    return Dataset(Y=rng.normal((n_units, 1)), Xstar=X, Ystar=np.empty((n_units, 0)), T=T,
                   coords=generate_coordinates(n_units, 'fixed', rng), unit_ids=[str(i) for i in range(n_units)],
                   unit_names=[str(i) for i in range(n_units)], income_group=['all'] * n_units)


def balance_calibration(replicates=50, rng=None, n_units=200, K=3, confounded=False, include_gps=True,
                        block_size=20, overlap=10):
    """
    Fraction of flagged balance blocks over repeated synthetic datasets. With a random treatment the p-values are
    close to uniform, so about 10% of the blocks are flagged at 0.9.

    :return: :class:`ExperimentReport` with the per-replicate flagged fractions at 0.9 and 0.95 and their means
    """
    rows = []
    for k, seq in enumerate(_children(rng, replicates)):
        data = balance_dataset(n_units, RandomStream(seq), K, confounded)
        report = covariate_balance(data, block_size, overlap, include_gps)
        rows.append({'replicate': k, 'status': 'ok', 'n_blocks': len(report),
                     'n_indeterminate': sum(b.indeterminate for b in report.blocks),
                     'flagged_0.9': report.flagged_fraction(0.9), 'flagged_0.95': report.flagged_fraction(0.95)})
    table = pd.DataFrame(rows)
    summary = pd.DataFrame([{'confounded': confounded, 'include_gps': include_gps,
                             'mean_flagged_0.9': float(table['flagged_0.9'].mean()),
                             'mean_flagged_0.95': float(table['flagged_0.95'].mean())}])
    return ExperimentReport('balance-calibration', table, summary)


@dataclasses.dataclass
class AdaptiveCalibration:
    """
    Result of :func:`adaptive_calibration`: the largest absolute errors of the sample mean and covariance and the
    acceptance rate.
    """
    mean_error: float
    covariance_error: float
    acceptance_rate: float
    n_draws: int

    def as_report(self):
        summary = pd.DataFrame([dataclasses.asdict(self)])
        return ExperimentReport('adaptive-calibration', summary.assign(status='ok'), summary)


def adaptive_calibration(n_scans=100000, dim=9, rng=None, burn_in=None, adapt_start=200):
    """
    Run :class:`~lacsh.algorithms.adaptive.AdaptiveMetropolis` on a standard normal target of dimension *dim* and
    compare the moments of the draws after *burn_in* (a fifth of the scans by default) with the truth.

    :return: :class:`AdaptiveCalibration`
    """
    rng = as_stream(rng)
    burn_in = n_scans // 5 if burn_in is None else burn_in
    sampler = AdaptiveMetropolis(dim, adapt_start=adapt_start)

    def log_target(x):
        return -0.5 * float(x @ x)

    x = np.zeros(dim)
    logp = log_target(x)
    draws = np.empty((n_scans - burn_in, dim))
    for s in range(1, n_scans + 1):
        x, logp, _ = sampler.step(x, logp, log_target, rng, s)
        if s > burn_in:
            draws[s - burn_in - 1] = x
    mean_error = float(np.abs(draws.mean(axis=0)).max())
    cov_error = float(np.abs(np.cov(draws, rowvar=False) - np.eye(dim)).max())
    return AdaptiveCalibration(mean_error=mean_error, covariance_error=cov_error,
                               acceptance_rate=sampler.acceptance_rate, n_draws=draws.shape[0])


# joint-distribution check
def _joint_check_dataset(n_units, P, rng):
    X = rng.normal((n_units, 1))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    T = rng.normal(n_units)
    T = (T - T.mean()) / T.std()
    return Dataset(Y=np.zeros((n_units, P)), Xstar=X, Ystar=np.empty((n_units, 0)), T=T,
                   coords=generate_coordinates(n_units, 'fixed', rng), unit_ids=[str(i) for i in range(n_units)],
                   unit_names=[str(i) for i in range(n_units)], income_group=['all'] * n_units, anchor_index=0)


def draw_from_prior(model, gamma, sigma2_T, rng):
    """
    An exact draw of every parameter and the latent health from the prior of *model*, with *gamma* and ``sigma2_T``
    given. The anchor is drawn from its truncated marginal and the other units from their normal conditional given it.
    """
    prior, data, anchor = model.prior, model.data, model.anchor_index
    sd = np.sqrt(prior.coef_var)
    beta = prior.coef_mean + sd * rng.normal(N_BETA)
    sigma2_H = float(np.exp(prior.coef_mean + sd * rng.normal()))
    phi = float(np.exp(prior.coef_mean + sd * rng.normal()))
    a = prior.coef_mean + sd * rng.normal(data.P)
    Sigma_Y = sample_inverse_wishart(prior.sigmaY_df, prior.sigmaY_scale, rng)
    state = ParameterState(a=a, H=np.zeros(data.N), Sigma_Y=Sigma_Y, beta=beta, gamma=gamma, sigma2_T=sigma2_T,
                           sigma2_H=sigma2_H, phi=phi)
    mu = model.mean(state)
    S = model.h_factor(state).matrix
    H = np.empty(data.N)
    H[anchor] = sample_truncated_normal_upper(mu[anchor], S[anchor, anchor], 0.0, rng)
    rest = np.arange(data.N) != anchor
    w = S[rest, anchor] / S[anchor, anchor]
    cond = S[np.ix_(rest, rest)] - np.outer(w, S[anchor, rest])
    H[rest] = mu[rest] + w * (H[anchor] - mu[anchor]) + factorize(cond).L @ rng.normal(int(rest.sum()))
    state.H = H
    return state


def simulate_metrics(state, rng):
    """
    Metric rows ``y_i ~ MVN(a H_i, Sigma_Y)`` given *state*.
    """
    L = factorize(state.Sigma_Y).L
    return np.outer(state.H, state.a) + (L @ rng.normal((state.a.size, state.H.size))).T


def _test_functions(state, anchor):
    other = 1 if anchor == 0 else 0
    return {'beta_0': state.beta[0], 'beta_1': state.beta[1], 'beta_3': state.beta[3],
            'log_sigma2_H': np.log(state.sigma2_H), 'log_phi': np.log(state.phi), 'a_1': state.a[0],
            'Sigma_Y_1_1': state.Sigma_Y[0, 0], 'H_anchor': state.H[anchor], 'H_other': state.H[other]}


def getting_it_right(n_iterations=20000, rng=None, n_units=4, P=2, prior=None):
    """
    Joint-distribution check of the sampler on a tiny dataset with *gamma* and ``sigma2_T`` held fixed.

    The marginal-conditional simulator draws parameters from the prior and metrics given them. The successive-conditional
    simulator alternates one sampler scan with simulating new metrics given the current parameters. Both have the joint
    prior of the parameters as their stationary distribution, so the means of every test function must agree.

    :return: :class:`ExperimentReport` whose table has one row per test function with both means and the z-score of
        their difference, using the effective draw count of the successive chain
    """
    rng = as_stream(rng)
    data_rng, prior_rng, chain_rng, y_rng = rng.spawn(4)
    data = _joint_check_dataset(n_units, P, data_rng)
    prior = prior or PriorSpec(coef_var=1.0, sigmaY_df=P + 6.0, sigmaY_scale=2.5 * np.eye(P))
    model = LacshModel(data, prior, anchor_index=0)
    gamma, sigma2_T = np.zeros(data.Z.shape[1]), 1.0

    marginal = [_test_functions(draw_from_prior(model, gamma, sigma2_T, prior_rng), 0) for _ in range(n_iterations)]

    initial = draw_from_prior(model, gamma, sigma2_T, prior_rng)
    data.Y[:] = simulate_metrics(initial, y_rng)
    config = McmcConfig(n_scans=n_iterations, burn_in=0, thin=1, anchor_index=0, fixed=('gamma', 'sigma2_T'),
                        log_every=n_iterations)
    runner = ChainRunner(data, config, prior=prior, initial=initial, rng=chain_rng)
    successive = []
    for _ in range(n_iterations):
        state = runner.step()
        runner.model.data.Y[:] = simulate_metrics(state, y_rng)
        successive.append(_test_functions(state, 0))

    m, s = pd.DataFrame(marginal), pd.DataFrame(successive)
    rows = []
    for name in m.columns:
        ess = effective_sample_size(s[name].to_numpy())
        se = np.sqrt(m[name].var() / len(m) + s[name].var() / ess)
        rows.append({'name': name, 'marginal_mean': m[name].mean(), 'successive_mean': s[name].mean(),
                     'successive_ess': ess, 'z': (s[name].mean() - m[name].mean()) / se})
    table = pd.DataFrame(rows)
    summary = pd.DataFrame([{'n_iterations': n_iterations, 'max_abs_z': float(table['z'].abs().max()),
                             'acceptance_rate': runner.history.acceptance_rate}])
    return ExperimentReport('getting-it-right', table, summary)


__all__ = ['CoverageConfig', 'ExperimentReport', 'AdaptiveCalibration', 'coverage_experiment', 'lpml_comparison',
           'balance_calibration', 'balance_dataset', 'adaptive_calibration', 'getting_it_right', 'draw_from_prior',
           'simulate_metrics', 'binomial_band', 'worker_count', 'MIN_REPLICATES', 'COVERAGE_PARAMETERS',
           'CURVED_BETA']
