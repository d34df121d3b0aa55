"""Exception hierarchy shared by all modules."""


class ParetoHopError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(ParetoHopError, ValueError):
    """Invalid user configuration (unknown problem, out-of-range parameter)."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class InputError(ParetoHopError, ValueError):
    """Numerical input violating an operation's precondition."""


class CapabilityError(ParetoHopError):
    """Requested feature is outside what an object supports (e.g. order p > p_max)."""


class SubproblemError(ParetoHopError):
    """The step subsolver could not certify any step.

    Attributes
    ----------
    best : StepCertificate or None
        Best uncertified iterate found, for diagnostics.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SearchError(ParetoHopError):
    """Regularized search hit its trial cap without an accepted step."""

    def __init__(self, message, trials=None):
        super().__init__(message)
        self.trials = list(trials) if trials is not None else []
