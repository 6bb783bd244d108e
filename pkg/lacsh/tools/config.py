# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The module :mod:`config` reads run configurations. A configuration is a flat plain text file of ``key = value`` lines,
where ``#`` starts a comment and nested concepts use dotted keys::

    seed = 42
    data.panel = panel.csv
    data.units = units.csv
    data.metrics = life_expectancy, infant_mortality
    data.lagged_metrics = infant_mortality
    data.covariates = gdp, education
    data.treatment = health_expenditure
    data.current_year = 2015
    data.lag_years = 2010-2014
    data.anchor = BDI
    transform.gdp = log
    transform.infant_mortality = sqrt, reversed
    mcmc.n_scans = 120000
    output.dir = results

Relative paths resolve against the directory of the configuration file. :func:`load_run_config` returns a
:class:`RunConfig`.
"""
import configparser
import dataclasses
import logging
import os
from typing import Optional

from ..core.entity import McmcConfig, PriorSpec
from ..core.errors import MissingKey, InvalidValue, MissingInput, MissingConfig
from .pipeline import DataSpec, TransformSpec

_logger = logging.getLogger(__name__)

_SECTION = 'lacsh'
#: recognized key prefixes
PREFIXES = ('data', 'transform', 'mcmc', 'prior', 'output', 'simulate', 'validate')
_TOP_LEVEL = ('seed',)


class ConfigFile:
    """
    Typed access to the flat ``key = value`` entries of a configuration file.

    :param entries: mapping from dotted keys to raw string values
    :param path: path of the file, used to resolve relative paths and in messages
    """
    def __init__(self, entries, path=None):
        self.entries = dict(entries)
        self.path = path
        self.base_dir = os.path.dirname(os.path.abspath(path)) if path else os.getcwd()

    @classmethod
    def read(cls, path):
        """
        Parse the file at *path*.

        :raises MissingConfig: if the file does not exist
        :raises InvalidValue: if a line is not a ``key = value`` pair
        """
        if not os.path.exists(path):
            raise MissingConfig('configuration file not found: {}'.format(path))
        with open(path, encoding='utf-8') as f:
            return cls.parse(f.read(), path)

    @classmethod
    def parse(cls, text, path=None):
        parser = configparser.ConfigParser(delimiters=('=',), comment_prefixes=('#',), inline_comment_prefixes=('#',),
                                           interpolation=None, strict=True, empty_lines_in_values=False)
        parser.optionxform = str
        try:
            parser.read_string('[{}]\n{}'.format(_SECTION, text), source=path or '<string>')
        except configparser.Error as e:
            raise InvalidValue('cannot parse configuration {}: {}'.format(path or '', e))
        entries = dict(parser.items(_SECTION))
        for key in entries:
            head = key.split('.', 1)[0]
            if head not in PREFIXES and key not in _TOP_LEVEL:
                _logger.warning('Unknown configuration key %s is ignored.', key)
        return cls(entries, path)

    def __contains__(self, key):
        return key in self.entries

    def section(self, prefix):
        """
        Entries under ``prefix.``, with the prefix stripped.
        """
        p = prefix + '.'
        return {k[len(p):]: v for k, v in self.entries.items() if k.startswith(p)}

    def get(self, key, default=dataclasses.MISSING):
        if key in self.entries:
            return self.entries[key].strip()
        if default is dataclasses.MISSING:
            raise MissingKey('required configuration key {!r} is missing'.format(key))
        return default

    def _typed(self, key, default, kind, convert):
        value = self.get(key, default)
        if value is default and default is not dataclasses.MISSING:
            return value
        try:
            return convert(value)
        except (TypeError, ValueError):
            raise InvalidValue('{} must be {}, got {!r}'.format(key, kind, value))

    def get_int(self, key, default=dataclasses.MISSING):
        return self._typed(key, default, 'an integer', int)

    def get_float(self, key, default=dataclasses.MISSING):
        return self._typed(key, default, 'a number', float)

    def get_bool(self, key, default=dataclasses.MISSING):
        def convert(v):
            v = v.lower()
            if v in ('1', 'true', 'yes', 'on'):
                return True
            if v in ('0', 'false', 'no', 'off'):
                return False
            raise ValueError(v)
        return self._typed(key, default, 'a boolean', convert)

    def get_list(self, key, default=dataclasses.MISSING):
        return self._typed(key, default, 'a comma-separated list', lambda v: [t.strip() for t in v.split(',')
                                                                              if t.strip()])

    def get_years(self, key, default=dataclasses.MISSING):
        """
        A year range written ``2010-2014`` (inclusive) or a single year, as a ``(first, last)`` tuple.
        """
        def convert(v):
            parts = [p.strip() for p in v.split('-')]
            if len(parts) == 1:
                return int(parts[0]), int(parts[0])
            if len(parts) != 2 or int(parts[0]) > int(parts[1]):
                raise ValueError(v)
            return int(parts[0]), int(parts[1])
        return self._typed(key, default, 'a year range such as 2010-2014', convert)

    def get_path(self, key, default=dataclasses.MISSING):
        value = self.get(key, default)
        if value is None:
            return None
        return os.path.normpath(os.path.join(self.base_dir, os.path.expanduser(value)))


def _none_or(convert):
    def wrapped(v):
        return None if v.lower() in ('none', '') else convert(v)
    return wrapped


def mcmc_config_from(cfg, seed=None):
    """
    Build a :class:`~lacsh.core.entity.McmcConfig` from the ``mcmc.*`` entries of *cfg*. Missing keys keep their
    defaults.
    """
    default = McmcConfig()
    kwargs = {}
    for f in dataclasses.fields(McmcConfig):
        key = 'mcmc.' + f.name
        if key not in cfg or f.name == 'seed':
            continue
        if f.name == 'fixed':
            kwargs['fixed'] = tuple(cfg.get_list(key))
        elif f.name == 'checkpoint_path':
            kwargs[f.name] = cfg.get_path(key)
        elif f.name == 'anchor_index':
            kwargs[f.name] = cfg._typed(key, None, 'an integer or none', _none_or(int))
        elif isinstance(getattr(default, f.name), bool):
            kwargs[f.name] = cfg.get_bool(key)
        elif isinstance(getattr(default, f.name), int):
            kwargs[f.name] = cfg.get_int(key)
        elif isinstance(getattr(default, f.name), float):
            kwargs[f.name] = cfg.get_float(key)
        else:
            kwargs[f.name] = cfg.get(key)
    kwargs['seed'] = cfg.get_int('seed', 0) if seed is None else int(seed)
    return McmcConfig(**kwargs).validate()


def prior_from(cfg):
    kwargs = {}
    for f in dataclasses.fields(PriorSpec):
        key = 'prior.' + f.name
        if key in cfg:
            kwargs[f.name] = cfg._typed(key, None, 'a number', _none_or(float))
    return PriorSpec(**kwargs)


@dataclasses.dataclass
class RunConfig:
    """
    A parsed run configuration.

    :param path: the configuration file
    :param data: :class:`~lacsh.tools.pipeline.DataSpec`, or None for configurations without a data section
    :param panel_path: panel CSV
    :param units_path: units CSV
    :param mcmc: :class:`~lacsh.core.entity.McmcConfig`
    :param prior: :class:`~lacsh.core.entity.PriorSpec`
    :param n_chains: number of independent chains
    :param output_dir: where the artifacts are written
    :param seed: the single seed all randomness derives from
    :param raw: the underlying :class:`ConfigFile`, for the ``simulate.*`` and ``validate.*`` sections
    """
    path: Optional[str]
    data: Optional[DataSpec]
    panel_path: Optional[str]
    units_path: Optional[str]
    mcmc: McmcConfig
    prior: PriorSpec
    n_chains: int
    output_dir: str
    seed: int
    raw: ConfigFile

    def validate(self):
        """
        Check that every referenced input file exists.

        :raises MissingInput: naming the missing path
        """
        for p in (self.panel_path, self.units_path):
            if p is not None and not os.path.exists(p):
                raise MissingInput('input file not found: {}'.format(p))
        if self.n_chains < 1:
            raise InvalidValue('mcmc.n_chains must be positive')
        return self


def data_spec_from(cfg):
    transforms = [TransformSpec.parse(name, text) for name, text in sorted(cfg.section('transform').items())]
    return DataSpec(metrics=cfg.get_list('data.metrics'), lagged_metrics=cfg.get_list('data.lagged_metrics', []),
                    covariates=cfg.get_list('data.covariates', []), treatment=cfg.get('data.treatment'),
                    current_year=cfg.get_int('data.current_year'), lag_years=cfg.get_years('data.lag_years'),
                    treatment_years=cfg.get_years('data.treatment_years', None),
                    anchor=_none_or(str)(cfg.get('data.anchor', 'none')),
                    prune_threshold=cfg.get_float('data.prune_threshold', 0.8), transforms=transforms)


def load_run_config(path, seed=None, output_dir=None, require_data=True):
    """
    Read and validate the run configuration at *path*.

    :param path: configuration file
    :param seed: overrides the ``seed`` key
    :param output_dir: overrides the ``output.dir`` key
    :param require_data: whether the ``data.*`` keys are mandatory
    :return: :class:`RunConfig`
    """
    cfg = ConfigFile.read(path)
    has_data = 'data.panel' in cfg or require_data
    seed = cfg.get_int('seed', 0) if seed is None else int(seed)
    out = output_dir if output_dir is not None else cfg.get_path('output.dir', None)
    if out is None:
        out = os.path.join(cfg.base_dir, 'output')
    run = RunConfig(path=path, data=data_spec_from(cfg) if has_data else None,
                    panel_path=cfg.get_path('data.panel') if has_data else None,
                    units_path=cfg.get_path('data.units') if has_data else None,
                    mcmc=mcmc_config_from(cfg, seed), prior=prior_from(cfg),
                    n_chains=cfg.get_int('mcmc.n_chains', 1), output_dir=out, seed=seed, raw=cfg)
    return run.validate()


__all__ = ['ConfigFile', 'RunConfig', 'load_run_config', 'mcmc_config_from', 'prior_from', 'data_spec_from']
