"""Exception hierarchy.

Two branches matter to callers: :class:`InputError` (bad files, bad
configuration; CLI exit code 1) and :class:`NumericalError` (the physics or
the optimizer could not produce an answer; CLI exit code 2).
"""


class PolcavError(Exception):
    """Base class for every error raised by this package."""


class InputError(PolcavError):
    pass


class NumericalError(PolcavError):
    pass


class ParseError(InputError):
    pass


class ValidationError(InputError):
    """Invalid configuration value. ``key`` names the offending entry."""

    def __init__(self, key, message=None):
        self.key = key
        super().__init__(f"{key}: {message}" if message else key)


class FormatError(InputError):
    pass


class UnitError(InputError):
    pass


class InstabilityError(NumericalError):
    """Total mechanical damping is not positive (parametric instability)."""


class NoCancellation(NumericalError):
    pass


class NoPeak(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class DegenerateFit(NumericalError):
    pass


class NotDecaying(NumericalError):
    pass


class DivisionDegenerate(NumericalError):
    pass


class OutOfRange(NumericalError):
    pass


class OutOfBounds(NumericalError):
    pass


class FlatSurface(NumericalError):
    pass


class UnstableCavity(NumericalError):
    pass
