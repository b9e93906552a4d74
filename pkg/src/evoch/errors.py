class EvochError(Exception):
    """Base class for all errors raised by evoch."""


class ConfigurationError(EvochError, ValueError):
    pass


class GeometryError(EvochError):
    pass


class DomainError(EvochError, ValueError):
    """A potential was evaluated outside its domain."""


class StepError(EvochError):
    """Newton failed to converge within the iteration budget."""

    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)


class SolverError(EvochError):
    pass


class PreconditionError(EvochError, ValueError):
    pass
