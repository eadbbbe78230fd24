"""Exception types shared across the package."""

from __future__ import annotations


class WMError(Exception):
    """Base class for all library errors."""


class ConfigError(WMError, ValueError):
    pass


class PoleArgument(WMError, ValueError):
    pass


class NearPole(WMError, ValueError):
    def __init__(self, message: str, pole_index: int | None = None):
        super().__init__(message)
        self.pole_index = pole_index


class NonPositiveArg(WMError, ValueError):
    pass


class NonPositiveTime(WMError, ValueError):
    pass


class NonSquare(WMError, ValueError):
    pass


class BadOrder(WMError, ValueError):
    pass


class NonConvergent(WMError, ArithmeticError):
    pass


class UnsupportedN(WMError, ValueError):
    pass


class SizeMismatch(WMError, ValueError):
    pass


class DegenerateIndex(WMError, ValueError):
    pass


class DegenerateDrift(WMError, ValueError):
    pass


class DegenerateStart(WMError, ValueError):
    pass


class RPrimeNotInConfig(WMError, ValueError):
    pass


class ContourViolation(WMError, ValueError):
    pass


class TooFewSamples(WMError, ValueError):
    pass


class SingularShift(WMError, ValueError):
    pass
