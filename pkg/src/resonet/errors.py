"""Exception types shared across the package."""


class ResonetError(Exception):
    """Base class for package-specific failures."""


class InvalidParameterError(ResonetError, ValueError):
    """A numeric or structural parameter is outside its valid domain."""


class TopologyError(ResonetError, ValueError):
    """Lattice wiring is inconsistent (bad indices, unreachable outputs)."""


class DataFormatError(ResonetError, ValueError):
    """An input file does not conform to the expected schema."""


class ConfigError(ResonetError, ValueError):
    """A configuration file or option set is invalid."""


class PoleError(ResonetError, ArithmeticError):
    """Evaluation requested on (or within guard distance of) an analytic pole."""

    def __init__(self, message: str, omega: float | None = None):
        super().__init__(message)
        self.omega = omega


class NearResonanceError(ResonetError, ArithmeticError):
    """AC system matrix is numerically singular at the requested frequency."""

    def __init__(self, message: str, omega: float | None = None,
                 cond: float | None = None):
        super().__init__(message)
        self.omega = omega
        self.cond = cond


class NumericError(ResonetError, RuntimeError):
    """Time-domain simulation or training diverged."""

    def __init__(self, message: str, step: int | None = None,
                 sample: int | str | None = None):
        super().__init__(message)
        self.step = step
        self.sample = sample


class UndecidableError(ResonetError, RuntimeError):
    """Classification cannot pick a class (e.g. all channel energies zero)."""
