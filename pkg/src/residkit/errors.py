# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Exceptions and warnings raised by residkit."""

from pathlib import Path


class ResidkitError(Exception):
    """Base class for all residkit errors."""


class DomainError(ResidkitError, ValueError):
    """A probability or parameter lies outside the domain of an operation."""


class DegenerateError(ResidkitError, ValueError):
    """A predictive distribution has zero spread where division by it is needed."""


class RootNotBracketed(ResidkitError, RuntimeError):
    """The two-sided calibration equation has no bracketed root."""


class DensityZero(ResidkitError, ValueError):
    """The working density vanishes where a density ratio is evaluated."""


class MissingDistribution(ResidkitError, LookupError):
    """No predictive distribution was supplied for a unit."""

    def __init__(self, unit_id: str) -> None:
        self.unit_id = unit_id
        super().__init__(f"No predictive distribution for unit: {unit_id}")

    def __str__(self) -> str:
        return self.args[0]


class EmptyInput(ResidkitError, ValueError):
    """An operation received no records."""


class TooFewPoints(ResidkitError, ValueError):
    """Not enough values for a statistic to be defined."""


class ZeroVariance(ResidkitError, ValueError):
    """Within-chain variance is zero, so the scale reduction factor is undefined."""


class InvariantViolation(ResidkitError, AssertionError):
    """A theoretical identity failed to hold for computed quantities."""


class ConfigError(ResidkitError, ValueError):
    """A simulation configuration is invalid."""


class InputFormatError(ResidkitError, ValueError):
    """An input file is malformed."""

    def __init__(self, path: str | Path, line: int | None, message: str) -> None:
        self.path = Path(path)
        self.line = line
        location = f"{self.path}:{line}" if line is not None else f"{self.path}"
        super().__init__(f"{location}: {message}")


class NonConvergenceWarning(UserWarning):
    """At least one Gelman-Rubin statistic exceeded the convergence threshold."""
