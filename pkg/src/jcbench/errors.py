"""Exception taxonomy.

Two top-level categories matter for callers (and for CLI exit codes):
configuration problems (bad files, bad parameter combinations) and numerical
failures at run time (integration blow-ups, inadequate truncation, degenerate
null spaces).
"""


class JCBenchError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(JCBenchError):
    """Invalid configuration file, parameter set, or request."""


class NumericsError(JCBenchError):
    """A numerical procedure failed or a runtime invariant was violated."""


class IntegrationError(NumericsError):
    """Time integration failed (step-size underflow, non-finite right-hand side)."""

    def __init__(self, message, time=None):
        if time is not None:
            message = f"{message} (at t = {time:.6g})"
        super().__init__(message)
        self.time = time


class CutoffError(NumericsError):
    """The photon-number truncation is inadequate for the requested computation."""

    def __init__(self, message, time=None):
        if time is not None:
            message = f"{message} (first offending time t = {time:.6g})"
        super().__init__(message)
        self.time = time


class IntegrationDrift(NumericsError):
    """A sampled state violated a trajectory invariant (trace/hermiticity/positivity)."""

    def __init__(self, message, time=None):
        if time is not None:
            message = f"{message} (first offending time t = {time:.6g})"
        super().__init__(message)
        self.time = time


class NullSpaceError(NumericsError):
    """Steady-state kernel is missing, degenerate, or fails its residual check."""


class FixedPointSearchError(NumericsError):
    """No fixed point converged from any seed within the iteration budget."""


class ConstantSeriesError(NumericsError):
    """Pearson correlation requested for a zero-variance series."""
