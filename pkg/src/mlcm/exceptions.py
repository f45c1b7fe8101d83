"""Exception types raised across the package."""


class MlcmError(Exception):
    """Base class for all package-specific errors."""


class PanelFormatError(MlcmError):
    """Raised when panel input data violates the long-format contract
    (missing cells, duplicate (unit, time) pairs, non-numeric values,
    undeclared categorical columns, bad t0)."""


class DesignError(MlcmError):
    """Raised when a lag specification or forecast request cannot be
    satisfied by the available periods (infeasible windows, covariate
    references crossing the intervention date in ``lags_only`` mode)."""


class NotFittedError(MlcmError):
    """Raised when ``predict`` or a derived quantity is requested from an
    estimator that has not been fitted."""


class BootstrapError(MlcmError):
    """Raised when bootstrap resampling cannot produce valid replicates
    (failure rate above the retry budget, degenerate inputs)."""


class ConfigError(MlcmError):
    """Raised for malformed or incomplete run configuration files."""
