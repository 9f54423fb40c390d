"""
Exceptions raised across the package, and the exit codes the CLI maps them to.

Library code only raises; `lambdipole.cli.main` is the one place that turns
these into process exit codes.
"""

from __future__ import annotations

from typing import Any, Optional


# Exit-code map used by the command line
EXIT_OK = 0
EXIT_IO = 1
EXIT_DOMAIN = 2
EXIT_VERIFY = 3
EXIT_NOT_CONVERGED = 4
EXIT_NUMERICAL = 5
EXIT_USAGE = 64


class LambDipoleError(ValueError):
    """Base class for every error raised by this package."""

    exit_code = EXIT_DOMAIN


class DomainError(LambDipoleError):
    """An argument lies outside the domain of the operation."""


class SingularityError(DomainError):
    """A kernel was evaluated at its singular point."""


class NoRootError(LambDipoleError):
    """The matching-condition scan ran out of range without a sign change."""


class InfeasibleError(LambDipoleError):
    """Multiplier bracket cannot be formed: the configuration cannot carry the impulse."""


class VerificationFailed(LambDipoleError):
    exit_code = EXIT_VERIFY


class ConvergenceFailure(LambDipoleError):
    exit_code = EXIT_NOT_CONVERGED


class CFLViolation(LambDipoleError):
    """Time step too large for the current velocity field."""

    exit_code = EXIT_NUMERICAL

    def __init__(self, ratio: float, limit: float):
        self.ratio = ratio
        self.limit = limit
        super().__init__(f"CFL ratio {ratio:.4f} exceeds limit {limit:.2f}")


class NumericalAbort(LambDipoleError):
    """Non-finite values appeared during time integration."""

    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, last_good: Optional[Any] = None):
        self.last_good = last_good
        super().__init__(message)


class UsageError(LambDipoleError):
    exit_code = EXIT_USAGE
