# coding=utf-8
"""
.. moduleauthor:: lacsh developers

This module :mod:`visualization` emits the data behind the figures of an analysis as tidy CSV files, one row per plotted
point with a series label. Rendering is left to any plotting tool. :func:`export_artifact` writes the artifact of one
``lacsh analyze --which`` target.
"""
import logging
import os

import numpy as np
import pandas as pd

from ..core.errors import InvalidValue
from ..core.spatial import distance_matrix
from . import posterior
from .balance import covariate_balance

_logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
#: analysis targets and the files they write
ARTIFACTS = {'summary': ('summary.csv', 'summary.txt', 'top_covariances.csv'),
             'ranking': ('ranking.csv',),
             'dose-response': ('dose_response.csv',),
             'balance': ('balance.csv',),
             'rho': ('rho_curve.csv',),
             'residuals': ('residuals.csv',),
             'lpml': ('cpo.csv', 'lpml.txt'),
             'scatter': ('metric_health.csv',)}


def write_frame(frame, path):
    """
    Write *frame* to the CSV *path* with 17 significant digits and ``\\n`` line endings.
    """
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path


def _write_text(text, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text.rstrip('\n') + '\n')
    return path


def metric_health_scatter(chain, data, metric):
    """
    Plot data of one metric against the posterior-median latent health, with the least-squares line.

    :param metric: a metric name or column index
    :return: a :class:`pandas.DataFrame` with the columns ``series`` (``'point'`` or ``'fit'``), ``unit_id``,
        ``income_group``, ``health`` and ``value``
    """
    j = data.metric_names.index(metric) if isinstance(metric, str) else int(metric)
    h = np.median(chain.H, axis=0)
    y = data.Y[:, j]
    slope, intercept = np.polyfit(h, y, 1)
    grid = np.array([h.min(), h.max()])
    points = pd.DataFrame({'series': 'point', 'unit_id': data.unit_ids, 'income_group': data.income_group,
                           'health': h, 'value': y})
    line = pd.DataFrame({'series': 'fit', 'unit_id': '', 'income_group': '', 'health': grid,
                         'value': intercept + slope * grid})
    frame = pd.concat([points, line], ignore_index=True)
    frame.insert(0, 'metric', data.metric_names[j])
    return frame


def default_distance_grid(data, n_points=100):
    """
    Equally spaced distances from 0 to the largest pairwise distance of the units, in megameters.
    """
    D = distance_matrix(data.coords).D
    return np.linspace(0.0, float(D.max()), n_points)


def export_artifact(which, chain, data, directory, **options):
    """
    Write the files of the analysis target *which* (a key of :data:`ARTIFACTS`) into *directory*.

    :param options: ``t_grid`` and ``thin_to`` for ``'dose-response'``; ``block_size``, ``overlap`` and ``include_gps``
        for ``'balance'``; ``d_grid`` for ``'rho'``; ``k`` for the covariance table of ``'summary'``
    :return: list of written paths
    """
    if which not in ARTIFACTS:
        raise InvalidValue('unknown analysis {!r}; choose from {}'.format(which, ', '.join(ARTIFACTS)))
    os.makedirs(directory, exist_ok=True)
    files = [os.path.join(directory, name) for name in ARTIFACTS[which]]
    if which == 'summary':
        table = posterior.summarize(chain)
        labels = {'H_{}'.format(i + 1): name for i, name in enumerate(data.unit_names)}
        write_frame(table.frame, files[0])
        _write_text(table.render(labels=labels), files[1])
        write_frame(posterior.top_covariances(chain, options.get('k', 5)), files[2])
    elif which == 'ranking':
        write_frame(posterior.rank_health(chain, data), files[0])
    elif which == 'dose-response':
        curve = posterior.dose_response(chain, data, options.get('t_grid'), options.get('thin_to', 100))
        write_frame(curve.to_frame(), files[0])
    elif which == 'balance':
        report = covariate_balance(data, options.get('block_size', 20), options.get('overlap', 10),
                                   options.get('include_gps', True))
        write_frame(report.to_frame(), files[0])
    elif which == 'rho':
        d_grid = options.get('d_grid')
        write_frame(posterior.spatial_correlation_curve(chain, default_distance_grid(data) if d_grid is None
                                                        else d_grid), files[0])
    elif which == 'residuals':
        write_frame(posterior.residual_map(chain, data), files[0])
    elif which == 'lpml':
        log_cpo = posterior.conditional_predictive_ordinates(chain, data)
        write_frame(pd.DataFrame({'unit_id': data.unit_ids, 'log_cpo': log_cpo}), files[0])
        _write_text('LPML = {:.6f}'.format(float(np.sum(log_cpo))), files[1])
    elif which == 'scatter':
        frames = [metric_health_scatter(chain, data, name) for name in data.metric_names]
        write_frame(pd.concat(frames, ignore_index=True), files[0])
    _logger.info('Wrote %s.', ', '.join(files))
    return files


__all__ = ['ARTIFACTS', 'export_artifact', 'metric_health_scatter', 'default_distance_grid', 'write_frame']
