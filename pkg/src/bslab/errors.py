"""Exception types shared across the package."""

from __future__ import annotations


class BslabError(Exception):
    """Base class for all package errors."""


class InvalidBody(BslabError, ValueError):
    """A body description violates its construction invariants."""


class BodyParseError(InvalidBody):
    """A JSON body description could not be parsed.

    ``key`` is the dotted path of the offending field (for example
    ``"base.matrix"``), or ``""`` when the document itself is malformed.
    """

    def __init__(self, message: str, key: str = ""):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


class CenterNotInterior(BslabError, ValueError):
    pass


class SupportUnavailable(BslabError):
    pass


class PolarUnavailable(BslabError):
    pass


class DegenerateInput(BslabError, ValueError):
    pass


class NoConvergence(BslabError, RuntimeError):
    def __init__(self, message: str, iterations: int, gap: float, result=None):
        super().__init__(message)
        self.iterations = iterations
        self.gap = gap
        self.result = result


class SymmetryMismatch(BslabError, ValueError):
    pass


class NonFiniteIntegrand(BslabError, FloatingPointError):
    def __init__(self, message: str, direction=None):
        super().__init__(message)
        self.direction = direction


class ZeroExponent(BslabError, ValueError):
    pass


class NonPositiveAlpha(BslabError, ValueError):
    pass


class EquivalenceViolation(BslabError, AssertionError):
    pass


class IntegerBetaCase(BslabError, ValueError):
    """Raised for integer exponents in ``[1, n]``; ``k`` is that integer."""

    def __init__(self, k: int):
        super().__init__(f"beta={k} is an integer in [1, n]; use the log-corrected bound")
        self.k = k


class UnresolvedAsymptotics(BslabError, RuntimeError):
    """Lower- and upper-range slope fits disagree; ``result`` holds the scan."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class BoundViolation(BslabError, AssertionError):
    def __init__(self, message: str, gammas=None, report=None):
        super().__init__(message)
        self.gammas = gammas
        self.report = report


class DegenerateFit(BslabError, ValueError):
    pass
