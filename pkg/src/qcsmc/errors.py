"""Exception hierarchy shared by all qcsmc modules."""


class QcsmcError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(QcsmcError, ValueError):
    """A scenario or parameter record failed validation."""


class GammaTooSmall(ConfigError):
    pass


class DisturbanceExceedsBound(ConfigError):
    pass


class NonFinite(ConfigError):
    pass


class BadTable(ConfigError):
    pass


class EpsilonOutOfRange(ConfigError):
    pass


class PreconditionViolated(QcsmcError, ValueError):
    pass


class UndefinedOnAxis(QcsmcError, ValueError):
    """The original control law has no value on the x2-axis away from the origin."""


class NotInU(QcsmcError, ValueError):
    pass


class NotInCa(QcsmcError, ValueError):
    pass


class NotCovered(QcsmcError, ValueError):
    """Initial state lies in C outside C_a, where no closed form exists."""


class DegenerateOrigin(QcsmcError, ValueError):
    pass


class OutOfWindow(QcsmcError, ValueError):
    pass


class NonFiniteState(QcsmcError, ArithmeticError):
    pass


class NoCPhase(QcsmcError, ValueError):
    pass
