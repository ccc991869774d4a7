"""Exception types shared across the pipeline."""

from __future__ import annotations


class CoverageError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(CoverageError):
    """Invalid parameter or configuration value."""


class ValidationError(CoverageError):
    """One or more input-data problems, collected before raising."""

    def __init__(self, problems, context=None):
        self.problems = list(problems)
        self.context = context
        head = f"{context}: " if context else ""
        lines = "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(f"{head}{len(self.problems)} validation problem(s)\n{lines}")


class ProviderError(CoverageError):
    """A routing provider could not deliver a travel time."""


class BudgetExceededError(ProviderError):
    """The number of required requests exceeds the configured budget."""


class FiltrationError(CoverageError):
    """Structural problem with a filtration (non-monotone, not face-closed)."""


class FiltrationTooLargeError(FiltrationError):
    """Materializing the filtration would exceed the configured triangle cap."""
