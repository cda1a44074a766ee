"""Exception and warning types raised across the package."""


class NessGeoError(Exception):
    """Base class for all library errors."""


class ModelError(NessGeoError):
    """Invalid model definition (negative rates, bad level ordering, ...)."""


class ShapeError(NessGeoError, ValueError):
    """Operator has the wrong shape or symmetry."""


class NonUniqueSteadyState(NessGeoError):
    """Liouvillian kernel is more than one-dimensional."""


class NoSteadyState(NessGeoError):
    """Liouvillian has no numerically zero singular value."""


class ConditioningError(NessGeoError):
    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class SupportError(NessGeoError):
    """Perturbation has weight outside the support of the reference state."""


class IntegrationError(NessGeoError):
    """Trace or Hermiticity drift during time stepping."""


class RelaxationTimeout(NessGeoError):
    pass


class Unsupported(NessGeoError, NotImplementedError):
    pass


class LedgerInconsistency(NessGeoError):
    def __init__(self, message, worst_index=None, worst_time=None, residual=None):
        super().__init__(message)
        self.worst_index = worst_index
        self.worst_time = worst_time
        self.residual = residual


class MetricSingular(NessGeoError):
    pass


class GeodesicNoConvergence(NessGeoError):
    pass


class BoundViolation(NessGeoError):
    def __init__(self, message, worst_time=None, slack=None):
        super().__init__(message)
        self.worst_time = worst_time
        self.slack = slack


class SupportWarning(UserWarning):
    """Eigenvalues were clamped to the probability floor."""


class TailWarning(UserWarning):
    """Exponential tail correction is a large fraction of a Green-Kubo integral."""
