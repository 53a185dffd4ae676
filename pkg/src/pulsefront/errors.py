"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: hypothesis failures exit 2,
numerical non-convergence exits 3, invariant violations exit 4.
"""

from __future__ import annotations


class PulsefrontError(Exception):
    """Base class for all library errors."""


class ConfigError(PulsefrontError):
    """Invalid run configuration; carries every violation found."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class HypothesisError(PulsefrontError):
    """A standing hypothesis required by the requested computation fails."""


class ConvergenceError(PulsefrontError):
    """An iterative solve did not converge, or a bracket/root does not exist."""


class InvariantError(PulsefrontError):
    """A verified quantity violated a structural invariant."""
