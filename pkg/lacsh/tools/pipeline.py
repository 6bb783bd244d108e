# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The module :mod:`pipeline` turns raw per-unit tables into the :class:`~lacsh.core.entity.Dataset` consumed by the
sampler:

1. :func:`load_panel` and :func:`load_units` ingest the long-format panel ``unit_id,year,variable,value`` and the units
   table ``unit_id,name,income_group,lat,lon``. The tokens ``NA`` and the empty string mark missing values.
2. :func:`apply_transforms` applies the elementwise transforms (sqrt, log, cubic) and the reversals of metrics for which
   a higher raw value means worse health; a reversal is a negation after the transform.
3. :func:`average_panel` averages every variable over a range of years.
4. :func:`standardize` centers and scales columns with the population standard deviation.
5. :func:`prune_collinear` greedily removes lagged metrics that are correlated at the threshold or above with a
   covariate or another lagged metric.

:func:`build_dataset` chains the steps; units with a missing modeled value are dropped and reported. There is no
imputation.
"""
import dataclasses
import importlib.resources
import logging
import os
import re
from collections import OrderedDict

import numpy as np
import pandas as pd

from ..core.entity import Dataset, column_key, validate_coordinates
from ..core.errors import (MalformedRow, DuplicateKey, UnknownColumn, DomainError, AllMissing, ZeroVariance,
                           MissingInput, UnknownAnchor, InvalidValue)

_logger = logging.getLogger(__name__)

#: tokens read as missing values
MISSING_TOKENS = ('NA', '')
#: canonical columns of the panel file
PANEL_COLUMNS = ('unit_id', 'year', 'variable', 'value')
#: canonical columns of the units file
UNIT_COLUMNS = ('unit_id', 'name', 'income_group', 'lat', 'lon')
#: recognized transforms
TRANSFORMS = ('identity', 'sqrt', 'log', 'cubic')


@dataclasses.dataclass
class RawPanel:
    """
    A long-format panel. :attr:`frame` has the columns ``unit_id`` (str), ``year`` (int), ``variable`` (str) and
    ``value`` (float, NaN for an explicit missing value); ``(unit_id, year, variable)`` triples are unique.
    """
    frame: pd.DataFrame

    def __len__(self):
        return len(self.frame)

    @property
    def missing(self):
        """
        Boolean mask of the entries that carry the missing marker.
        """
        return self.frame['value'].isna().to_numpy()

    @property
    def variables(self):
        return sorted(self.frame['variable'].unique())


@dataclasses.dataclass
class TransformSpec:
    """
    Transform of one variable.

    :param variable_name: the variable
    :param transform: ``'identity'``, ``'sqrt'``, ``'log'`` (natural) or ``'cubic'``
    :param reversed: negate after the transform, for metrics where a higher raw value means worse health
    """
    variable_name: str
    transform: str = 'identity'
    reversed: bool = False

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise InvalidValue('unknown transform {!r} for {}'.format(self.transform, self.variable_name))

    @classmethod
    def parse(cls, variable_name, text):
        """
        Parse a configuration value such as ``'sqrt, reversed'`` or ``'reversed'``.
        """
        tokens = [t.strip().lower() for t in text.split(',') if t.strip()]
        rev = 'reversed' in tokens
        kinds = [t for t in tokens if t != 'reversed']
        if len(kinds) > 1:
            raise InvalidValue('more than one transform given for {}: {}'.format(variable_name, text))
        return cls(variable_name, kinds[0] if kinds else 'identity', rev)


def _read_strings(path, columns, schema):
    if not os.path.exists(path):
        raise MissingInput('file not found: {}'.format(path))
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8', skipinitialspace=True)
    except pd.errors.ParserError as e:
        m = re.search(r'line (\d+)', str(e))
        raise MalformedRow('cannot parse {}: {}'.format(path, e), line=int(m.group(1)) if m else None)
    schema = dict(schema or {})
    rename = {}
    for canonical in columns:
        source = schema.get(canonical, canonical)
        if source not in frame.columns:
            raise UnknownColumn('column {!r} (for {}) not found in {}'.format(source, canonical, path))
        rename[source] = canonical
    return frame[list(rename)].rename(columns=rename)


def _parse_value(token, line, what):
    token = token.strip()
    if token in MISSING_TOKENS:
        return np.nan
    try:
        return float(token)
    except ValueError:
        raise MalformedRow('cannot parse {} {!r}'.format(what, token), line=line)


def load_panel(path, schema=None):
    """
    Read a long-format panel CSV.

    :param path: file path
    :param schema: optional mapping from the canonical column names ``unit_id``, ``year``, ``variable``, ``value`` to
        the column names used in the file
    :return: :class:`RawPanel`
    :raises MalformedRow: with the 1-based line number of the offending row
    :raises DuplicateKey: if a ``(unit_id, year, variable)`` triple repeats
    :raises UnknownColumn: if a column cannot be resolved
    """
    raw = _read_strings(path, PANEL_COLUMNS, schema)
    years, values = [], []
    for k, (year, value) in enumerate(zip(raw['year'], raw['value'])):
        line = k + 2
        try:
            years.append(int(year.strip()))
        except ValueError:
            raise MalformedRow('cannot parse year {!r}'.format(year), line=line)
        values.append(_parse_value(value, line, 'value'))
    frame = pd.DataFrame({'unit_id': raw['unit_id'].str.strip(), 'year': np.array(years, dtype=int),
                          'variable': raw['variable'].str.strip(), 'value': np.array(values, dtype=float)})
    dup = frame.duplicated(['unit_id', 'year', 'variable'])
    if dup.any():
        k = int(np.flatnonzero(dup.to_numpy())[0])
        row = frame.iloc[k]
        raise DuplicateKey('line {}: duplicate entry ({}, {}, {})'.format(k + 2, row['unit_id'], row['year'],
                                                                          row['variable']))
    return RawPanel(frame)


def load_units(path, schema=None):
    """
    Read the units CSV ``unit_id,name,income_group,lat,lon``.

    :return: a :class:`pandas.DataFrame` indexed by ``unit_id`` in file order
    """
    raw = _read_strings(path, UNIT_COLUMNS, schema)
    lat = [_parse_value(v, k + 2, 'latitude') for k, v in enumerate(raw['lat'])]
    lon = [_parse_value(v, k + 2, 'longitude') for k, v in enumerate(raw['lon'])]
    frame = pd.DataFrame({'unit_id': raw['unit_id'].str.strip(), 'name': raw['name'].str.strip(),
                          'income_group': raw['income_group'].str.strip(), 'lat': lat, 'lon': lon})
    dup = frame['unit_id'].duplicated()
    if dup.any():
        raise DuplicateKey('duplicate unit {!r} in {}'.format(frame['unit_id'][dup].iloc[0], path))
    validate_coordinates(frame[['lat', 'lon']].to_numpy(), list(frame['unit_id']))
    return frame.set_index('unit_id', drop=False)


def bundled_path(name):
    """
    Path of the file *name* shipped in the :mod:`lacsh` data directory.
    """
    return str(importlib.resources.files('lacsh').joinpath('data').joinpath(name))


def reference_countries():
    """
    The bundled list of 120 countries with their index, name and anchor flag, for labelling runs on country data.

    :return: a :class:`pandas.DataFrame` indexed by ``index``
    """
    frame = pd.read_csv(bundled_path('countries.csv'), dtype={'name': str})
    frame['anchor'] = frame['anchor'].astype(bool)
    return frame.set_index('index')


def apply_transforms(panel, specs):
    """
    Apply the transforms of *specs* to the observed values of their variables.

    :param panel: :class:`RawPanel`
    :param specs: list of :class:`TransformSpec`
    :return: a new :class:`RawPanel`
    :raises DomainError: if sqrt meets a negative value or log a nonpositive one, naming the unit and year
    """
    frame = panel.frame.copy()
    known = set(frame['variable'])
    for spec in specs:
        if spec.variable_name not in known:
            raise UnknownColumn('transform given for unknown variable {!r}'.format(spec.variable_name))
        mask = (frame['variable'] == spec.variable_name).to_numpy() & frame['value'].notna().to_numpy()
        x = frame.loc[mask, 'value'].to_numpy()
        if spec.transform in ('sqrt', 'log'):
            bad = x < 0 if spec.transform == 'sqrt' else x <= 0
            if np.any(bad):
                row = frame.loc[mask].iloc[int(np.flatnonzero(bad)[0])]
                raise DomainError('{} of {} for unit {} in {}'.format(spec.transform, row['value'], row['unit_id'],
                                                                      row['year']))
        if spec.transform == 'sqrt':
            x = np.sqrt(x)
        elif spec.transform == 'log':
            x = np.log(x)
        elif spec.transform == 'cubic':
            x = x ** 3
        if spec.reversed:
            x = -x
        frame.loc[mask, 'value'] = x
    return RawPanel(frame)


def _year_range(years):
    if isinstance(years, (tuple, list)) and len(years) == 2 and all(isinstance(y, (int, np.integer)) for y in years):
        return list(range(int(years[0]), int(years[1]) + 1))
    if isinstance(years, (int, np.integer)):
        return [int(years)]
    return [int(y) for y in years]


def average_panel(panel, years, variables=None, units=None, on_missing='raise'):
    """
    Average every ``(unit, variable)`` over the observed values in *years*.

    :param panel: :class:`RawPanel`
    :param years: inclusive ``(first, last)`` pair, a single year or an iterable of years
    :param variables: variables to average, all by default
    :param units: unit ids (rows of the result), all by default
    :param on_missing: ``'raise'`` raises :class:`~lacsh.core.errors.AllMissing` for a pair without an observed value;
        ``'nan'`` leaves NaN
    :return: a tuple ``(means, counts)`` of :class:`pandas.DataFrame` with units as rows and variables as columns
    """
    frame = panel.frame
    yrs = _year_range(years)
    variables = list(variables) if variables is not None else sorted(frame['variable'].unique())
    units = list(units) if units is not None else list(pd.unique(frame['unit_id']))
    sel = frame[frame['year'].isin(yrs) & frame['variable'].isin(variables) & frame['value'].notna()]
    grouped = sel.groupby(['unit_id', 'variable'])['value']
    means = grouped.mean().unstack('variable').reindex(index=units, columns=variables)
    counts = grouped.count().unstack('variable').reindex(index=units, columns=variables).fillna(0).astype(int)
    if on_missing == 'raise':
        missing = means.isna().to_numpy()
        if missing.any():
            i, j = np.argwhere(missing)[0]
            raise AllMissing('no observed value of {} for unit {} in {}-{}'.format(variables[j], units[i], yrs[0],
                                                                                   yrs[-1]))
    return means, counts


def standardize(columns, names=None):
    """
    Center each column to mean zero and scale it to unit population standard deviation (denominator N).

    :param columns: n x k matrix
    :param names: optional column names used in error messages
    :return: a tuple ``(standardized, means, sds)``
    :raises ZeroVariance: naming the first constant column
    """
    X = np.asarray(columns, dtype=float)
    one_d = X.ndim == 1
    X = X.reshape(X.shape[0], -1)
    means = X.mean(axis=0)
    sds = X.std(axis=0)
    scale = np.maximum(1.0, np.abs(means))
    bad = sds <= 1e-12 * scale
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise ZeroVariance('column {} has zero variance'.format(names[j] if names is not None else j))
    Z = (X - means) / sds
    return (Z.ravel() if one_d else Z), means, sds


def prune_collinear(Xstar, Ystar, threshold=0.8, x_names=None, y_names=None):
    """
    Greedy elimination of collinear lagged metrics. While some column of *Ystar* has an absolute correlation of at
    least *threshold* with a column of *Xstar* or with another remaining column of *Ystar*, the one with the largest
    such correlation is removed (on ties, the one with the larger column index). Columns of *Xstar* are never removed.

    :return: a tuple ``(pruned Ystar, pruning_log, kept)`` where *kept* lists the retained column indices of *Ystar*
        and every log entry is a dict ``{'removed', 'partner', 'correlation'}``
    """
    if not 0 < threshold <= 1:
        raise InvalidValue('threshold must lie in (0, 1], got {}'.format(threshold))
    Ystar = np.asarray(Ystar, dtype=float)
    Xstar = np.asarray(Xstar, dtype=float)
    Xstar = Xstar.reshape(Ystar.shape[0], -1) if Xstar.size else np.empty((Ystar.shape[0], 0))
    k, q = Xstar.shape[1], Ystar.shape[1]
    x_names = list(x_names) if x_names is not None else ['X{}'.format(i) for i in range(k)]
    y_names = list(y_names) if y_names is not None else ['Ystar{}'.format(i) for i in range(q)]
    names = x_names + y_names
    if q == 0:
        return Ystar, [], []
    corr = np.atleast_2d(np.corrcoef(np.column_stack([Xstar, Ystar]), rowvar=False))
    corr = np.abs((corr + corr.T) / 2)
    kept = list(range(q))
    log = []
    while kept:
        best, best_r, best_partner = None, -1.0, None
        for j in kept:
            col = k + j
            partners = list(range(k)) + [k + i for i in kept if i != j]
            if not partners:
                continue
            r = corr[col, partners]
            m = int(np.argmax(r))
            # kept is ascending, so a tie within 1e-12 goes to the later (larger) index
            if r[m] >= threshold and r[m] >= best_r - 1e-12:
                best, best_r, best_partner = j, float(r[m]), partners[m]
        if best is None:
            break
        kept.remove(best)
        log.append({'removed': y_names[best], 'partner': names[best_partner], 'correlation': best_r})
        _logger.info('Pruned lagged metric %s (|r| = %.4f with %s).', y_names[best], best_r, names[best_partner])
    if not kept:
        _logger.info('Every lagged metric was pruned.')
    return Ystar[:, kept], log, kept


@dataclasses.dataclass
class PipelineAudit:
    """
    Reports of :func:`build_dataset`: the dropped units with the reason and the pruning log.
    """
    dropped: pd.DataFrame
    pruning: pd.DataFrame


@dataclasses.dataclass
class DataSpec:
    """
    What :func:`build_dataset` extracts from the raw tables.

    :param metrics: metric variables (the columns of *Y*)
    :param lagged_metrics: metrics whose lagged averages enter *Y\\** before pruning
    :param covariates: covariate variables (*X\\**)
    :param treatment: treatment variable
    :param current_year: year of the metrics *Y*
    :param lag_years: inclusive ``(first, last)`` range averaged for *X\\** and *Y\\**
    :param treatment_years: inclusive range averaged for the treatment, *lag_years* by default
    :param anchor: unit id of the anchor, None for an unanchored run
    :param prune_threshold: collinearity threshold
    :param transforms: list of :class:`TransformSpec`
    """
    metrics: list
    lagged_metrics: list
    covariates: list
    treatment: str
    current_year: int
    lag_years: tuple
    treatment_years: tuple = None
    anchor: str = None
    prune_threshold: float = 0.8
    transforms: list = dataclasses.field(default_factory=list)


def build_dataset(panel, units, spec):
    """
    Assemble a validated :class:`~lacsh.core.entity.Dataset`.

    :param panel: :class:`RawPanel`
    :param units: units table from :func:`load_units`
    :param spec: :class:`DataSpec`
    :return: a tuple ``(dataset, audit)`` with a :class:`PipelineAudit`
    :raises UnknownAnchor: if the anchor id is not among the units or its unit was dropped
    """
    if spec.anchor is not None and spec.anchor not in units.index:
        raise UnknownAnchor('anchor unit {!r} is not in the units file'.format(spec.anchor))
    known = set(panel.frame['variable'])
    for name in list(spec.metrics) + list(spec.lagged_metrics) + list(spec.covariates) + [spec.treatment]:
        if name not in known:
            raise UnknownColumn('variable {!r} does not occur in the panel'.format(name))
    for name in spec.lagged_metrics:
        if name not in spec.metrics:
            raise InvalidValue('lagged metric {!r} is not one of the metrics'.format(name))
    panel = apply_transforms(panel, spec.transforms)
    ids = list(units.index)
    dropped = []
    panel_units = set(panel.frame['unit_id'])
    for u in sorted(panel_units - set(ids)):
        dropped.append({'unit_id': u, 'reason': 'not in units file'})
    treatment_years = spec.treatment_years or spec.lag_years
    Ycur, _ = average_panel(panel, spec.current_year, spec.metrics, ids, on_missing='nan')
    X, _ = average_panel(panel, spec.lag_years, spec.covariates, ids, on_missing='nan')
    Ylag, _ = average_panel(panel, spec.lag_years, spec.lagged_metrics, ids, on_missing='nan')
    T, _ = average_panel(panel, treatment_years, [spec.treatment], ids, on_missing='nan')
    keep = []
    for u in ids:
        missing = [('{} ({})'.format(v, spec.current_year)) for v in spec.metrics if np.isnan(Ycur.at[u, v])]
        missing += [v for v in spec.covariates if np.isnan(X.at[u, v])]
        missing += ['{} (lagged)'.format(v) for v in spec.lagged_metrics if np.isnan(Ylag.at[u, v])]
        missing += [spec.treatment] if np.isnan(T.at[u, spec.treatment]) else []
        if missing:
            dropped.append({'unit_id': u, 'reason': 'missing ' + '; '.join(missing)})
            _logger.info('Dropped unit %s: missing %s.', u, ', '.join(missing))
        else:
            keep.append(u)
    if spec.anchor is not None and spec.anchor not in keep:
        raise UnknownAnchor('anchor unit {!r} was dropped because of missing values'.format(spec.anchor))

    log = OrderedDict()

    def std(frame, group, names):
        if not names:
            return np.empty((len(keep), 0))
        Z, means, sds = standardize(frame.loc[keep, names].to_numpy(dtype=float),
                                    [column_key(group, n) for n in names])
        for n, m, s in zip(names, means, sds):
            log[column_key(group, n)] = (float(m), float(s))
        return Z

    Ymat = std(Ycur, 'Y', list(spec.metrics))
    Xmat = std(X, 'X', list(spec.covariates))
    Ylmat = std(Ylag, 'Ystar', list(spec.lagged_metrics))
    Tvec = std(T, 'T', [spec.treatment]).ravel()
    Ylmat, pruning_log, kept = prune_collinear(Xmat, Ylmat, spec.prune_threshold, spec.covariates,
                                               spec.lagged_metrics)
    lagged_kept = [spec.lagged_metrics[j] for j in kept]
    for entry in pruning_log:
        log.pop(column_key('Ystar', entry['removed']), None)
    data = Dataset(Y=Ymat, Xstar=Xmat, Ystar=Ylmat, T=Tvec, coords=units.loc[keep, ['lat', 'lon']].to_numpy(),
                   unit_ids=keep, unit_names=list(units.loc[keep, 'name']),
                   income_group=list(units.loc[keep, 'income_group']),
                   anchor_index=None if spec.anchor is None else keep.index(spec.anchor),
                   metric_names=list(spec.metrics), covariate_names=list(spec.covariates),
                   lagged_metric_names=lagged_kept, treatment_name=spec.treatment, standardization_log=log,
                   pruning_log=pruning_log, prune_threshold=spec.prune_threshold)
    data.validate()
    audit = PipelineAudit(dropped=pd.DataFrame(dropped, columns=['unit_id', 'reason']),
                          pruning=pd.DataFrame(pruning_log, columns=['removed', 'partner', 'correlation']))
    return data, audit


def write_audit(audit, directory):
    """
    Write ``dropped_units.csv`` and ``pruning.csv`` into *directory*.
    """
    os.makedirs(directory, exist_ok=True)
    audit.dropped.to_csv(os.path.join(directory, 'dropped_units.csv'), index=False, lineterminator='\n')
    audit.pruning.to_csv(os.path.join(directory, 'pruning.csv'), index=False, float_format='%.17g',
                         lineterminator='\n')


__all__ = ['RawPanel', 'TransformSpec', 'DataSpec', 'PipelineAudit', 'load_panel', 'load_units', 'apply_transforms',
           'average_panel', 'standardize', 'prune_collinear', 'build_dataset', 'write_audit', 'MISSING_TOKENS',
           'TRANSFORMS', 'bundled_path', 'reference_countries']
