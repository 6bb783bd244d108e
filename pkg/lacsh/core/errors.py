# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The module :mod:`errors` defines the exception hierarchy raised throughout *lacsh*. Every exception derives from
:class:`LacshError`. Four category bases carry the exit code reported by the command line interface:

* :class:`ConfigError` (exit code 2): invalid or inconsistent run configuration
* :class:`DataError` (exit code 3): input data that cannot be ingested or violates a :class:`~lacsh.core.entity.Dataset`
  invariant
* :class:`SamplerError` (exit code 4): numerical failures inside the samplers and the probability model
* :class:`MismatchError` (exit code 5): arrays, chains and datasets whose shapes do not agree

Errors raised by the posterior analysis derive from :class:`AnalysisError` (exit code 1).
"""


class LacshError(Exception):
    """
    Base class of all errors raised by *lacsh*.
    """
    exit_code = 1


class ConfigError(LacshError):
    exit_code = 2


class DataError(LacshError):
    exit_code = 3


class SamplerError(LacshError):
    exit_code = 4


class MismatchError(LacshError):
    exit_code = 5


class AnalysisError(LacshError):
    exit_code = 1


# configuration
class MissingKey(ConfigError):
    pass


class InvalidValue(ConfigError):
    pass


class UnknownAnchor(ConfigError):
    pass


class MissingConfig(ConfigError):
    pass


# data ingestion
class MalformedRow(DataError):
    """
    A row of an input file could not be parsed. The offending (1-based) line number is kept in :attr:`line`.
    """
    def __init__(self, message, line=None):
        if line is not None:
            message = 'line {}: {}'.format(line, message)
        super().__init__(message)
        self.line = line


class DuplicateKey(DataError):
    pass


class UnknownColumn(DataError):
    pass


class MissingInput(DataError):
    pass


class DomainError(DataError):
    pass


class AllMissing(DataError):
    pass


class ZeroVariance(DataError):
    pass


class InvalidCoordinate(DataError):
    pass


class InvalidDataset(DataError):
    pass


class InvalidCheckpoint(DataError):
    pass


# numerics
class NotPositiveDefinite(SamplerError):
    pass


class CovarianceFactorizationFailure(SamplerError):
    pass


#: Alias used by the Gibbs updates.
FactorizationFailure = CovarianceFactorizationFailure


class InvalidDf(SamplerError):
    pass


class InvalidParameter(SamplerError):
    pass


class NonpositiveVariance(SamplerError):
    pass


class NonpositivePhi(SamplerError):
    pass


class NumericalUnderflow(SamplerError):
    pass


class EmpiricalCovarianceSingular(SamplerError):
    pass


class RejectionStall(SamplerError):
    pass


class InvalidState(SamplerError):
    pass


# shapes
class ShapeMismatch(MismatchError):
    pass


class LengthMismatch(MismatchError):
    pass


# analysis and statistics
class EmptyChain(AnalysisError):
    pass


class EmptyGrid(AnalysisError):
    pass


class IndexOutOfRange(AnalysisError):
    pass


class DegenerateCPO(AnalysisError):
    """
    Some conditional predictive ordinate is not finite. The affected unit indices are kept in :attr:`units`.
    """
    def __init__(self, message, units=()):
        super().__init__(message)
        self.units = list(units)


class GridTooLarge(AnalysisError):
    pass


class RankDeficient(AnalysisError):
    pass


class SingleClass(AnalysisError):
    pass


class DegenerateInput(AnalysisError):
    pass


class Separation(AnalysisError):
    """
    (Quasi-)complete separation detected in a logistic regression. The last iterate, if any, is kept in :attr:`fit`.
    """
    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


__all__ = ['LacshError', 'ConfigError', 'DataError', 'SamplerError', 'MismatchError', 'AnalysisError',
           'MissingKey', 'InvalidValue', 'UnknownAnchor', 'MissingConfig',
           'MalformedRow', 'DuplicateKey', 'UnknownColumn', 'MissingInput', 'DomainError', 'AllMissing',
           'ZeroVariance', 'InvalidCoordinate', 'InvalidDataset', 'InvalidCheckpoint',
           'NotPositiveDefinite', 'CovarianceFactorizationFailure', 'FactorizationFailure', 'InvalidDf',
           'InvalidParameter', 'NonpositiveVariance', 'NonpositivePhi', 'NumericalUnderflow',
           'EmpiricalCovarianceSingular', 'RejectionStall', 'InvalidState',
           'ShapeMismatch', 'LengthMismatch',
           'EmptyChain', 'EmptyGrid', 'IndexOutOfRange', 'DegenerateCPO', 'GridTooLarge', 'RankDeficient',
           'SingleClass', 'DegenerateInput', 'Separation']
