"""Exception hierarchy shared by the library and the command line."""

from __future__ import annotations


class LenscalError(Exception):
    """Base class for all errors raised by lenscal."""


class DomainError(LenscalError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class ConfigError(LenscalError, ValueError):
    """Malformed configuration, profile specification or input file."""


class NumericError(LenscalError, RuntimeError):
    """A numerical procedure failed to converge or became unstable.

    ``diagnostics`` carries whatever the failing routine knew at the time
    (residual history, error estimates, term counts).
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class FitError(LenscalError, ValueError):
    """A least-squares fit was rejected (unphysical curvature, rank deficiency, too few points)."""
