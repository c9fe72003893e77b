"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, data and schema problems with 3, numeric failures with 4.
"""


class OwaEnsembleError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(OwaEnsembleError):
    """Invalid configuration: unknown options, bad flag values, missing input paths."""


class DataError(OwaEnsembleError):
    """Invalid data: schema violations, label domain errors, degenerate datasets."""


class StratificationError(DataError):
    """A cross-validation fold could not be given both classes."""


class NumericError(OwaEnsembleError):
    """Numeric failure at runtime: non-finite values or corrupt model parameters."""


class DimensionError(NumericError):
    """Operands have incompatible shapes or lengths."""


class LeakageError(OwaEnsembleError):
    """A fitted component scored a sample from its own training folds."""
