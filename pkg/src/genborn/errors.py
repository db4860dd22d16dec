"""Exception hierarchy shared by all genborn modules."""


class GenbornError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(GenbornError, ValueError):
    pass


class NonConvergence(GenbornError, ArithmeticError):
    pass


class NonFinite(GenbornError, ArithmeticError):
    pass


class ZeroNorm(InvalidParameter):
    pass


class OutOfRange(GenbornError, ArithmeticError):
    """First-order probability left [0, 1]; alpha too large for the linearised rule."""


class DegenerateSupport(GenbornError, ValueError):
    pass


class ConfigError(GenbornError, ValueError):
    pass
