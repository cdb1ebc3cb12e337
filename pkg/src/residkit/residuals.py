# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Standard and percentile-based residuals.

The standard residual is (y - mean) / sd under the unit's predictive
distribution. The percentile-based residual maps the observation's
percentile location in the predictive distribution to a standard normal
quantile. Atom-bearing distributions (discrete families, point masses and
empirical draw sets) subtract half of the point mass at the observation
before the quantile map, which centers ties and keeps residuals finite.
For empirical draws this count-below-plus-half-ties rule is a deterministic
generalization of randomized quantile residuals.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Mapping, NamedTuple, Tuple

import numpy as np
from scipy.special import ndtri

from residkit.distributions import PredictiveDistribution
from residkit.errors import DegenerateError, DomainError, MissingDistribution, ResidkitError

DEFAULT_TRUNC_BOUND = 5.0

CSV_COLUMNS = (
    "unit_id",
    "y",
    "percentile",
    "r_star",
    "r_ddag",
    "r_star_truncated",
    "r_ddag_truncated",
)


class Which(str, Enum):
    """Residual kind selector."""

    STAR = "star"
    DDAG = "ddag"


class PercentileResidual(NamedTuple):
    percentile: float
    residual: float
    truncated: bool


@dataclass(frozen=True)
class ResidualRecord:
    """Residuals of one unit's observation."""

    unit_id: Any
    y: float
    percentile: float
    r_star: float
    r_ddag: float
    r_star_truncated: bool = False
    r_ddag_truncated: bool = False
    fitted: float = math.nan

    @property
    def truncated(self) -> Tuple[bool, bool]:
        return self.r_star_truncated, self.r_ddag_truncated

    def residual(self, which: Which) -> float:
        return self.r_star if Which(which) is Which.STAR else self.r_ddag

    def is_truncated(self, which: Which) -> bool:
        return self.r_star_truncated if Which(which) is Which.STAR else self.r_ddag_truncated

    def to_row(self) -> Dict[str, Any]:
        return {column: getattr(self, column) for column in CSV_COLUMNS}


@dataclass
class BatchResult:
    """Records for every unit that could be processed, plus per-unit errors."""

    records: List[ResidualRecord] = field(default_factory=list)
    errors: List[ResidkitError] = field(default_factory=list)

    @property
    def n_truncated(self) -> Dict[str, int]:
        return {
            "r_star": sum(record.r_star_truncated for record in self.records),
            "r_ddag": sum(record.r_ddag_truncated for record in self.records),
        }


def truncate(value: float, bound: float) -> Tuple[float, bool]:
    """Clip a residual to [-bound, bound].

    Returns:
        The clipped value and whether clipping happened
    """
    if value > bound:
        return bound, True
    if value < -bound:
        return -bound, True
    return value, False


def standard_residual(y: float, d: PredictiveDistribution) -> float:
    """Compute the (observed - expected) / sd residual, untruncated.

    Args:
        y: Observed value
        d: Working predictive distribution

    Returns:
        The standard residual

    Raises:
        DegenerateError: If the predictive standard deviation is zero
    """
    mu, sigma = d.mean_sd()
    if not sigma > 0 or not math.isfinite(sigma):
        raise DegenerateError(f"Predictive sd of {d!r} is {sigma}; standard residual undefined")
    return (y - mu) / sigma


def percentile_residual(
    y: float, d: PredictiveDistribution, trunc_bound: float = DEFAULT_TRUNC_BOUND
) -> PercentileResidual:
    """Compute the percentile-based residual of an observation.

    Args:
        y: Observed value (finite)
        d: Working predictive distribution
        trunc_bound: Residuals are clipped to [-trunc_bound, trunc_bound]

    Returns:
        The percentile location fed to the normal quantile, the residual,
        and whether the residual was truncated
    """
    if not math.isfinite(y):
        raise DomainError(f"Observation must be finite, got {y}")
    percentiles, residuals, truncated = percentile_residuals([y], d, trunc_bound)
    return PercentileResidual(
        float(percentiles[0]), float(residuals[0]), bool(truncated[0])
    )


def percentile_residuals(
    ys: Any, d: PredictiveDistribution, trunc_bound: float = DEFAULT_TRUNC_BOUND
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized percentile-based residuals of many observations under one law.

    Percentiles of exactly 0 or 1 map to -trunc_bound and +trunc_bound with the
    truncation flag set.

    Returns:
        Arrays of percentiles, truncated residuals and truncation flags
    """
    ys = np.asarray(ys, dtype=float)
    if d.discrete:
        half = 0.5 * np.asarray(d.point_mass(ys))
        percentile = np.clip(np.asarray(d.cdf(ys)) - half, 0.0, 1.0)
        upper = np.clip(np.asarray(d.sf(ys)) + half, 0.0, 1.0)
    else:
        percentile = np.asarray(d.cdf(ys))
        upper = np.asarray(d.sf(ys))
    # Work from the smaller tail so large residuals keep their precision and
    # mirrored percentiles give exactly opposite residuals.
    raw = np.where(percentile > upper, -ndtri(upper), ndtri(percentile))

    raw = np.where(percentile <= 0.0, -np.inf, raw)
    raw = np.where(upper <= 0.0, np.inf, raw)
    percentile = np.where(upper <= 0.0, 1.0, percentile)
    truncated = np.abs(raw) > trunc_bound
    return percentile, np.clip(raw, -trunc_bound, trunc_bound), truncated


def residual_record(
    unit_id: Any,
    y: float,
    d: PredictiveDistribution,
    trunc_bound: float = DEFAULT_TRUNC_BOUND,
) -> ResidualRecord:
    """Compute both residuals for one unit.

    Raises:
        DegenerateError: If the standard residual is undefined
    """
    percentile, r_ddag, ddag_truncated = percentile_residual(y, d, trunc_bound)
    r_star, star_truncated = truncate(standard_residual(y, d), trunc_bound)
    return ResidualRecord(
        unit_id=unit_id,
        y=float(y),
        percentile=percentile,
        r_star=r_star,
        r_ddag=r_ddag,
        r_star_truncated=star_truncated,
        r_ddag_truncated=ddag_truncated,
        fitted=d.mean_sd()[0],
    )


def batch_residuals(
    observations: Iterable[Tuple[Any, float]],
    dists: Mapping[Any, PredictiveDistribution],
    trunc_bound: float = DEFAULT_TRUNC_BOUND,
) -> BatchResult:
    """Compute residual records for a set of units.

    Units without a distribution are reported in the error list rather than
    aborting the batch. A unit whose predictive sd is zero still gets a
    record, with r_star set to NaN, and its DegenerateError is reported.

    Args:
        observations: (unit_id, y) pairs
        dists: Predictive distribution per unit_id
        trunc_bound: Truncation bound, must be > 0

    Returns:
        Records in input order and the per-unit errors
    """
    if not trunc_bound > 0:
        raise DomainError(f"trunc_bound must be > 0, got {trunc_bound}")

    result = BatchResult()
    for unit_id, y in observations:
        d = dists.get(unit_id)
        if d is None:
            result.errors.append(MissingDistribution(unit_id))
            continue

        try:
            record = residual_record(unit_id, y, d, trunc_bound)
        except DegenerateError as e:
            percentile, r_ddag, ddag_truncated = percentile_residual(y, d, trunc_bound)
            record = ResidualRecord(
                unit_id=unit_id,
                y=float(y),
                percentile=percentile,
                r_star=math.nan,
                r_ddag=r_ddag,
                r_ddag_truncated=ddag_truncated,
                fitted=d.mean_sd()[0],
            )
            result.errors.append(DegenerateError(f"Unit {unit_id}: {e}"))
        result.records.append(record)

    return result
