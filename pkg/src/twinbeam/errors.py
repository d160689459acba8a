"""Exception hierarchy for twinbeam."""


class TwinBeamError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(TwinBeamError, ValueError):
    pass


class DiscretizationError(TwinBeamError):
    """A mode is not adequately represented on the requested grid."""


class IncompatibleGridError(TwinBeamError, ValueError):
    pass


class DegenerateInputError(TwinBeamError, ValueError):
    pass


class InsufficientBasisError(TwinBeamError):
    pass


class NonUnitaryChangeError(TwinBeamError):
    """Two bases do not span the same subspace."""


class UnphysicalSpecError(TwinBeamError, ValueError):
    """Requested correlations would give a non positive-semidefinite covariance."""


class BasisConflictError(TwinBeamError, ValueError):
    pass


class InvalidTransformError(TwinBeamError, ValueError):
    pass


class PlaneMismatchError(TwinBeamError, ValueError):
    pass


class UndefinedNoiseError(TwinBeamError):
    """Normalized noise requested for zero detected flux."""


class InsufficientSpanError(TwinBeamError):
    pass


class RecordFormatError(TwinBeamError, ValueError):
    pass


class ConfigError(TwinBeamError, ValueError):
    """Invalid scenario configuration.

    ``key`` names the offending section/key, e.g. ``"sweep.target"``.
    """

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
