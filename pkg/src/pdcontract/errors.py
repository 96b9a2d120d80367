"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`PDContractError`. Condition errors (a bound's standing inequality
fails) are kept separate from validation errors so callers such as the CLI
can map them to distinct exit codes.
"""


class PDContractError(Exception):
    """Base class for package errors."""


class DimensionError(PDContractError, ValueError):
    """Array shapes are inconsistent."""


class NotPSDError(PDContractError, ValueError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""


class RankError(PDContractError, ValueError):
    """A constraint matrix does not have full row rank."""

    def __init__(self, message, singular_value=None):
        super().__init__(message)
        self.singular_value = singular_value


class ConvexityError(PDContractError, ValueError):
    """The objective is not strictly convex on the admissible domain."""


class GraphError(PDContractError, ValueError):
    """Malformed edge list."""


class OptimizerError(PDContractError, RuntimeError):
    """The KKT solve did not converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DivergenceError(PDContractError, RuntimeError):
    """Integration produced a non-finite or runaway state."""

    def __init__(self, message, last_time=None):
        super().__init__(message)
        self.last_time = last_time


class ConfigurationError(PDContractError, ValueError):
    """Observer or scenario configuration is inconsistent."""


class MetricError(PDContractError, ValueError):
    """The metric transformation cannot be built for this alpha."""


class CertificationError(PDContractError, RuntimeError):
    """The quadratic form of the certificate is not positive definite."""


class DegeneratePairError(PDContractError, ValueError):
    """Two trajectories coincide, so no decay rate can be measured."""


class WindowError(PDContractError, ValueError):
    """Requested time window is not covered by the trajectory grid."""


class DomainError(PDContractError, ValueError):
    """Sampling box is empty or degenerate."""


class ConditionError(PDContractError, ValueError):
    """A bound's standing inequality does not hold.

    Attributes
    ----------
    condition : str
        The inequality that failed, e.g. ``"beta_hat > xi"``.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class StabilityConditionError(ConditionError):
    """A layer of a hierarchical stack violates the recursion conditions."""

    def __init__(self, message, condition=None, layer=None):
        super().__init__(message, condition)
        self.layer = layer


class SchemaError(PDContractError, ValueError):
    """A run configuration does not validate."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
