"""Exception hierarchy."""


class LqrIssError(Exception):
    """Base class for all library errors."""


class NumericalError(LqrIssError):
    pass


class NotHurwitz(NumericalError):
    pass


class NotStabilizing(NumericalError):
    pass


class IllConditioned(NumericalError):
    pass


class DimensionMismatch(LqrIssError, ValueError):
    pass


class InvalidPlant(LqrIssError, ValueError):
    pass


class NoStabilizingInit(NumericalError):
    pass


class Stalled(NumericalError):
    pass


class NegativeArgument(LqrIssError, ValueError):
    pass


class UnknownLemma(LqrIssError, KeyError):
    pass


class LeftAdmissibleSet(NumericalError):
    """A flow step produced a gain outside the stabilizing set."""


class ProbeRejected(NumericalError):
    pass


class InvalidWBar(LqrIssError, ValueError):
    pass


class OutOfDomain(LqrIssError, ValueError):
    pass


class ConfigError(LqrIssError, ValueError):
    pass
