"""Exception hierarchy shared by the package."""


class EndsLabError(Exception):
    """Base class for all package errors."""


class ModelError(EndsLabError, ValueError):
    """A model description violates its invariants."""


class DomainTooSmall(EndsLabError, ValueError):
    pass


class SingularSystem(EndsLabError, RuntimeError):
    pass


class MaximumPrincipleViolation(EndsLabError, RuntimeError):
    """A Dirichlet solution left the open interval (0, 1)."""


class NotConverged(EndsLabError, RuntimeError):
    pass


class NonPositiveInput(EndsLabError, ValueError):
    pass


class EmptyLayer(EndsLabError, ValueError):
    pass


class InsufficientLayers(EndsLabError, ValueError):
    pass


class NotSubsolution(EndsLabError, ValueError):
    pass


class EmptyTrialSet(EndsLabError, ValueError):
    pass


class TailTooFat(EndsLabError, ValueError):
    pass


class ConfigError(EndsLabError, ValueError):
    pass
