"""Exception types shared across the package.

Every computational failure raises a subclass of :class:`SpApproxError`, so
the command-line front end can report the error name and exit non-zero.
"""

from __future__ import annotations


class SpApproxError(Exception):
    """Base class for all library errors."""


class DescriptorError(SpApproxError, ValueError):
    """A system or run descriptor failed validation."""


class NonDecayingSystem(SpApproxError):
    """Moduli of a system do not decrease to zero on the enumerated prefix."""


class ZeroEntry(SpApproxError):
    """A zero multiplier was found where the system must be non-vanishing."""


class BudgetExceeded(SpApproxError):
    """Enumeration needed more indices than the configured budget allows."""


class DivergentTail(SpApproxError):
    """A power tail of the rearrangement is infinite or cannot be bounded."""


class NoFiniteSup(SpApproxError):
    """The certified n-term scan did not terminate within budget."""


class NonMonotoneSystem(SpApproxError):
    """A constrained n-term computation received non-monotone moduli."""


class UnsupportedFamily(SpApproxError):
    """The requested constrained family has no exact formula here."""


class ZeroDivisor(SpApproxError):
    """Differentiation hit an undeclared zero multiplier."""


class InvalidCoefficient(SpApproxError, ValueError):
    """A stored coefficient is zero or below the representable threshold."""


class SupportViolation(SpApproxError):
    """An element is supported outside the admissible index region."""


class QuadratureFailure(SpApproxError):
    """The quadrature error estimate exceeded its tolerance."""


class SlowConvergence(SpApproxError):
    """A series did not reach its tolerance within the term budget."""


class RootBracketFailure(SpApproxError):
    """A monotone root could not be bracketed."""


class BranchPreconditionFailed(SpApproxError):
    """An order-estimate branch was requested outside its preconditions."""


class RegimeMismatch(SpApproxError):
    """Exact and order data were computed for different regimes."""


class ParameterOutOfRange(SpApproxError, ValueError):
    """A method parameter lies outside its admissible range."""


class InvalidMajorant(SpApproxError, ValueError):
    """A majorant fails one of the admissibility conditions."""
