"""Exception and warning classes used across the package."""


class TradeNetError(Exception):
    """Base class for all package errors."""


class ValidationError(TradeNetError, ValueError):
    """Raised when input data or configuration violates a contract."""


class DegenerateGraphError(TradeNetError, ValueError):
    pass


class ConvergenceError(TradeNetError, RuntimeError):
    """Raised by iterative solvers that exhaust their iteration budget.

    Attributes
    ----------
    residual : float
        L1 residual of the last iterate.
    """

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class EstimationError(TradeNetError, ValueError):
    pass


class InstrumentProliferationWarning(UserWarning):
    pass


class SingularMatrixWarning(UserWarning):
    pass


class VarianceComponentWarning(UserWarning):
    pass


class DataWarning(UserWarning):
    pass
