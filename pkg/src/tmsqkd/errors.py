"""Exception hierarchy shared by the library and the command line tool."""


class TmsQkdError(Exception):
    """Base class for all errors raised by :mod:`tmsqkd`."""


class UnphysicalStateError(TmsQkdError, ValueError):
    """A covariance matrix violates the uncertainty principle or is malformed.

    ``min_symplectic_eigenvalue`` carries the offending value when known.
    """

    def __init__(self, message, min_symplectic_eigenvalue=None):
        super().__init__(message)
        self.min_symplectic_eigenvalue = min_symplectic_eigenvalue


class SolverError(TmsQkdError, RuntimeError):
    """A numerical procedure failed to converge.

    ``best_residual`` is the smallest residual reached before giving up.
    """

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class NoThresholdError(TmsQkdError):
    """A threshold search found no sign change of the key rate."""
