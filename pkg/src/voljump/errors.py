"""Exception hierarchy shared by all voljump modules."""


class VoljumpError(Exception):
    """Base class for all library errors."""


class ConfigError(VoljumpError):
    """Invalid or inconsistent run configuration."""


class DomainError(VoljumpError):
    """Argument outside the mathematical domain of an operation."""


class CapabilityError(VoljumpError):
    """Requested operation not supported by this variant (e.g. no derivative,
    not samplable)."""


class ContractError(VoljumpError):
    """Caller violated an interface contract (shape mismatch, off-grid time)."""


class SolverError(VoljumpError):
    """Numerical solve failed to meet its tolerance.

    Carries the offending residual in ``residual``.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PropertyViolation(VoljumpError):
    """A verified mathematical property failed beyond tolerance.

    ``magnitude`` is the worst observed violation, ``where`` a human-readable
    locator (node index, path index, ...).
    """

    def __init__(self, message, magnitude=None, where=None):
        super().__init__(message)
        self.magnitude = magnitude
        self.where = where
