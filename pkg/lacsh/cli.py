# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The command-line interface ``lacsh`` with four commands:

* ``fit`` ingests the panel and units files of a configuration, runs the chains and writes the chain CSVs, their JSON
  sidecars, checkpoints, the pipeline audit and the ingested dataset;
* ``analyze`` reads a chain and its dataset and writes the CSV data of one or more analyses;
* ``simulate`` generates a synthetic dataset from the ``simulate.*`` keys of a configuration;
* ``validate`` runs a validation experiment.

Errors derived from :class:`~lacsh.core.errors.LacshError` are reported on standard error and turned into the exit code
of their category.
"""
import argparse
import concurrent.futures
import dataclasses
import logging
import os
import sys

import numpy as np

from .algorithms.basic import run_chain
from .core.errors import LacshError, ShapeMismatch, InvalidValue
from .support import persistence
from .support.posterior import check_consistency
from .support.visualization import ARTIFACTS, export_artifact
from .tools.config import load_run_config
from .tools.pipeline import load_panel, load_units, build_dataset, write_audit
from .tools.random import RandomStream
from .validation import experiments
from .validation.synthetic import generate_synthetic, write_synthetic

_logger = logging.getLogger('lacsh')

EXPERIMENTS = ('coverage', 'lpml-comparison', 'balance-calibration', 'adaptive-calibration', 'getting-it-right')


def _fit_one(task):
    config, data, prior, seed_seq, verbose = task
    return run_chain(config, data, rng=RandomStream(seed_seq), prior=prior, verbose=verbose)


def cmd_fit(args):
    """
    Ingest, fit and write the chains of the configuration ``args.config``.
    """
    run = load_run_config(args.config, seed=args.seed, output_dir=args.out)
    panel = load_panel(run.panel_path)
    units = load_units(run.units_path)
    data, audit = build_dataset(panel, units, run.data)
    out = run.output_dir
    os.makedirs(out, exist_ok=True)
    write_audit(audit, out)
    persistence.save_dataset(data, os.path.join(out, 'dataset'))

    stems = ['chain'] if run.n_chains == 1 else ['chain_{}'.format(k + 1) for k in range(run.n_chains)]
    if run.n_chains == 1:
        seeds = [np.random.SeedSequence(run.seed)]
    else:
        seeds = np.random.SeedSequence(run.seed).spawn(run.n_chains)
    tasks = []
    for stem, seq in zip(stems, seeds):
        config = dataclasses.replace(run.mcmc, anchor_index=data.anchor_index,
                                     checkpoint_path=os.path.join(out, stem + '.ckpt'))
        tasks.append((config, data, run.prior, seq, not args.quiet))
    workers = experiments.worker_count(len(tasks))
    if workers == 1:
        chains = [_fit_one(t) for t in tasks]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            chains = list(ex.map(_fit_one, tasks))
    for stem, chain in zip(stems, chains):
        path = os.path.join(out, stem + '.csv')
        persistence.write_chain(chain, path, data)
        _logger.info('Wrote %d draws to %s (acceptance rate %.3f).', len(chain), path, chain.acceptance_rate)
    return 0


def _load_analysis_inputs(chain_path, data_dir):
    chain, meta = persistence.read_chain(chain_path)
    data = persistence.load_dataset(data_dir)
    expected = meta.get('dataset_fingerprint')
    if expected is not None and expected != persistence.dataset_fingerprint(data):
        raise ShapeMismatch('{} was not sampled on the dataset in {}'.format(chain_path, data_dir))
    check_consistency(chain, data)
    return chain, data


def cmd_analyze(args):
    """
    Write the analysis artifacts ``args.which`` of a fitted chain.
    """
    data_dir = args.data or os.path.join(os.path.dirname(os.path.abspath(args.chain)), 'dataset')
    chain, data = _load_analysis_inputs(args.chain, data_dir)
    out = args.out or os.path.join(os.path.dirname(os.path.abspath(args.chain)), 'analysis')
    options = {'thin_to': args.thin_to, 'block_size': args.block_size, 'overlap': args.overlap,
               'include_gps': not args.no_gps}
    if args.grid_points:
        t = data.T
        options['t_grid'] = np.linspace(t.min(), t.max(), args.grid_points)
    for which in args.which or list(ARTIFACTS):
        export_artifact(which, chain, data, out, **options)
    return 0


def cmd_simulate(args):
    """
    Generate a synthetic dataset and its truth from the ``simulate.*`` keys.
    """
    run = load_run_config(args.config, seed=args.seed, output_dir=args.out, require_data=False)
    cfg = run.raw
    anchor = cfg.get('simulate.anchor_index', '0')
    truth = generate_synthetic(cfg.get_int('simulate.n_units', 30), cfg.get_int('simulate.P', 3),
                               cfg.get_int('simulate.K', 2), cfg.get_int('simulate.Q', 1),
                               coord_mode=cfg.get('simulate.coord_mode', 'sphere_uniform'),
                               rng=RandomStream(run.seed),
                               anchor_index=None if anchor.lower() == 'none' else int(anchor),
                               variant=cfg.get('simulate.variant', 'lacsh'),
                               prune_threshold=cfg.get_float('simulate.prune_threshold', 0.8))
    mcmc = cfg.section('mcmc')
    paths = write_synthetic(truth, run.output_dir, current_year=cfg.get_int('simulate.current_year', 2015),
                            lag_years=cfg.get_years('simulate.lag_years', (2010, 2014)), mcmc=mcmc)
    _logger.info('Wrote %s.', ', '.join(paths))
    return 0


def cmd_validate(args):
    """
    Run the experiment ``args.experiment`` and write its table and summary.
    """
    run = load_run_config(args.config, seed=args.seed, output_dir=args.out, require_data=False) if args.config \
        else None
    cfg = run.raw if run else None
    seed = run.seed if run else (args.seed or 0)
    out = run.output_dir if run else (args.out or 'validation')

    def opt(kind, key, default):
        if args.replicates is not None and key == 'replicates':
            return args.replicates
        return getattr(cfg, 'get_' + kind)('validate.' + key, default) if cfg else default

    rng = RandomStream(seed)
    mcmc = run.mcmc if run and cfg.section('mcmc') else None
    if args.experiment == 'coverage':
        config = experiments.CoverageConfig(n_units=opt('int', 'n_units', 30),
                                            spatial_truth=opt('bool', 'spatial_truth', True))
        if mcmc is not None:
            config.mcmc = mcmc
        report = experiments.coverage_experiment(config, opt('int', 'replicates', 20), rng)
    elif args.experiment == 'lpml-comparison':
        report = experiments.lpml_comparison(opt('int', 'replicates', 10), rng, opt('int', 'n_units', 40), mcmc)
    elif args.experiment == 'balance-calibration':
        report = experiments.balance_calibration(opt('int', 'replicates', 50), rng, opt('int', 'n_units', 200),
                                                 confounded=opt('bool', 'confounded', False),
                                                 include_gps=opt('bool', 'include_gps', True))
    elif args.experiment == 'adaptive-calibration':
        report = experiments.adaptive_calibration(opt('int', 'n_scans', 100000), opt('int', 'dim', 9),
                                                  rng).as_report()
    elif args.experiment == 'getting-it-right':
        report = experiments.getting_it_right(opt('int', 'n_iterations', 20000), rng)
    else:
        raise InvalidValue('unknown experiment {!r}'.format(args.experiment))
    report.write(out)
    if not args.quiet:
        print(report.render())
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog='lacsh', description='Latent causal socioeconomic health model.')
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='configuration file')
    common.add_argument('--out', help='output directory, overrides output.dir')
    common.add_argument('--seed', type=int, help='overrides the seed of the configuration')
    common.add_argument('--quiet', action='store_true', help='only report warnings and errors')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('fit', parents=[common], help='ingest the data and run the sampler')
    p.set_defaults(func=cmd_fit, needs_config=True)

    p = sub.add_parser('analyze', parents=[common], help='summarize a fitted chain')
    p.add_argument('--chain', required=True, help='chain CSV written by fit')
    p.add_argument('--data', help='dataset directory, by default the dataset next to the chain')
    p.add_argument('--which', action='append', choices=list(ARTIFACTS), help='analysis to run, repeatable')
    p.add_argument('--thin-to', type=int, default=100, help='curves drawn for the dose-response')
    p.add_argument('--grid-points', type=int, default=0, help='treatment grid size of the dose-response')
    p.add_argument('--block-size', type=int, default=20)
    p.add_argument('--overlap', type=int, default=10)
    p.add_argument('--no-gps', action='store_true', help='drop the GPS regressor from the balance regressions')
    p.set_defaults(func=cmd_analyze, needs_config=False)

    p = sub.add_parser('simulate', parents=[common], help='generate a synthetic dataset')
    p.set_defaults(func=cmd_simulate, needs_config=True)

    p = sub.add_parser('validate', parents=[common], help='run a validation experiment')
    p.add_argument('--experiment', required=True, choices=EXPERIMENTS)
    p.add_argument('--replicates', type=int, help='overrides validate.replicates')
    p.set_defaults(func=cmd_validate, needs_config=False)
    return parser


def main(argv=None):
    """
    Entry point of the ``lacsh`` command; returns the exit code.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.needs_config and not args.config:
        parser.error('{} needs --config'.format(args.command))
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        return args.func(args)
    except LacshError as e:
        print('lacsh {}: {}: {}'.format(args.command, type(e).__name__, e), file=sys.stderr)
        return e.exit_code


if __name__ == '__main__':
    sys.exit(main())
