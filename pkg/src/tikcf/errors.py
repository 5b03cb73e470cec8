"""Exception hierarchy shared by every tikcf module."""


class TikcfError(Exception):
    """Base class for all errors raised by this package."""


class InputError(TikcfError, ValueError):
    """Malformed caller input (shapes, files, configuration)."""


class NumericalError(TikcfError, ArithmeticError):
    """A numerical routine could not produce a valid result."""


class DimensionMismatch(InputError):
    pass


class LengthMismatch(InputError):
    pass


class RankDeficient(NumericalError):
    pass


class SingularFilter(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class NoBracket(NumericalError):
    pass


class NonFinite(NumericalError):
    pass


class ZeroDenominator(NumericalError):
    pass


class RegionTooSmall(InputError):
    pass


class EmptyMask(InputError):
    pass


class EmptySequence(InputError):
    pass


class ConfigError(InputError):
    pass


class SequenceFormatError(InputError):
    pass
