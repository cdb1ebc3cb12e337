# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Decisions and plot data derived from a set of residuals.

Outlier tests refer each residual to N(0, 1) and optionally correct for
testing many units at once. Panel data covers Q-Q pairs, a smoothed
density and the empirical CDF, each with its N(0, 1) reference, for
plotting elsewhere. Truncated residuals stay in every computation and are
counted in the report.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Sequence

import numpy as np
import pandas as pd
from scipy import stats
from scipy.integrate import trapezoid
from scipy.special import ndtr, ndtri

from residkit.calibration import Side, TestSpec
from residkit.errors import EmptyInput, TooFewPoints
from residkit.io import write_frame
from residkit.residuals import ResidualRecord, Which

KDE_GRID_POINTS = 512
KDE_GRID_BANDWIDTHS = 3.0
KS_MIN_POINTS = 8
PANEL_NAMES = ("qq", "density", "ecdf")


class Correction(str, Enum):
    NONE = "none"
    BONFERRONI = "bonferroni"
    BH = "bh"


class KsResult(NamedTuple):
    statistic: float
    pvalue: float


@dataclass(frozen=True)
class Outlier:
    """Outlier test outcome for one unit."""

    unit_id: Any
    residual: float
    raw_pvalue: float
    adjusted_pvalue: float
    rejected: bool
    truncated: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "unit_id": self.unit_id,
            "residual": self.residual,
            "raw_pvalue": self.raw_pvalue,
            "adjusted_pvalue": self.adjusted_pvalue,
            "rejected": self.rejected,
            "truncated": self.truncated,
        }


@dataclass
class Panels:
    """Plot data for one residual set.

    Attributes:
        qq: Rows of (theoretical_quantile, sample_quantile)
        density: Rows of (grid_x, kde_value, reference_density)
        ecdf: Rows of (x, ecdf_value, reference_cdf)
        fitted: Rows of (fitted, residual)
        bandwidth: Kernel bandwidth used for the density
        threshold: Right-sided rejection cut-off Phi^{-1}(1 - alpha)
    """

    qq: np.ndarray
    density: np.ndarray
    ecdf: np.ndarray
    fitted: np.ndarray
    bandwidth: float
    threshold: float

    def frames(self) -> Dict[str, pd.DataFrame]:
        return {
            "qq": pd.DataFrame(self.qq, columns=["theoretical_quantile", "sample_quantile"]),
            "density": pd.DataFrame(
                self.density, columns=["grid_x", "kde_value", "reference_density"]
            ),
            "ecdf": pd.DataFrame(self.ecdf, columns=["x", "ecdf_value", "reference_cdf"]),
            "fitted": pd.DataFrame(self.fitted, columns=["fitted", "residual"]),
        }

    def to_dict(self) -> Dict[str, Any]:
        panels: Dict[str, Any] = {
            name: frame.to_dict(orient="list") for name, frame in self.frames().items()
        }
        panels["bandwidth"] = self.bandwidth
        panels["threshold"] = self.threshold
        return panels


@dataclass
class DiagnosticsReport:
    """Global fit, outliers and plot data for one residual kind."""

    which: Which
    spec: TestSpec
    correction: Correction
    n_units: int
    ks_statistic: float | None
    ks_pvalue: float | None
    outliers: List[Outlier] = field(default_factory=list)
    panels: Panels | None = None
    n_truncated: int = 0

    @property
    def n_rejected(self) -> int:
        return sum(outlier.rejected for outlier in self.outliers)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "which": self.which.value,
            "spec": self.spec.to_dict(),
            "correction": self.correction.value,
            "n_units": self.n_units,
            "n_truncated": self.n_truncated,
            "n_rejected": self.n_rejected,
            "ks_statistic": self.ks_statistic,
            "ks_pvalue": self.ks_pvalue,
            "outliers": [outlier.to_dict() for outlier in self.outliers],
            "panels": self.panels.to_dict() if self.panels is not None else None,
        }


def raw_pvalues(residuals: Sequence[float], side: Side) -> np.ndarray:
    """P-values of residuals against N(0, 1) for the given test side."""
    r = np.asarray(residuals, dtype=float)
    side = Side(side)
    if side is Side.RIGHT:
        return ndtr(-r)
    if side is Side.LEFT:
        return ndtr(r)
    return np.minimum(1.0, 2.0 * ndtr(-np.abs(r)))


def adjust_pvalues(pvalues: Sequence[float], correction: Correction) -> np.ndarray:
    """Adjust p-values for multiple testing across all units.

    Bonferroni multiplies by the number of tests; BH returns
    Benjamini-Hochberg adjusted p-values, so rejecting those at or below
    alpha is the step-up procedure.
    """
    p = np.asarray(pvalues, dtype=float)
    correction = Correction(correction)
    if correction is Correction.BONFERRONI:
        return np.minimum(1.0, p * p.size)
    if correction is Correction.BH:
        return stats.false_discovery_control(p, method="bh")
    return p.copy()


def outlier_test(
    records: Sequence[ResidualRecord],
    which: Which,
    spec: TestSpec,
    correction: Correction = Correction.NONE,
) -> List[Outlier]:
    """Flag units whose residual falls in the N(0, 1) rejection region.

    Records whose selected residual is undefined (NaN) are not tested.

    Args:
        records: Residual records
        which: Residual kind to test
        spec: Test side and level
        correction: Multiple testing correction applied across units

    Returns:
        One outcome per tested record, in input order

    Raises:
        EmptyInput: If no record has a defined residual
    """
    which = Which(which)
    tested = [record for record in records if math.isfinite(record.residual(which))]
    if not tested:
        raise EmptyInput("Outlier test needs at least one residual")

    residuals = np.array([record.residual(which) for record in tested])
    raw = raw_pvalues(residuals, spec.side)
    adjusted = adjust_pvalues(raw, correction)

    return [
        Outlier(
            unit_id=record.unit_id,
            residual=float(residual),
            raw_pvalue=float(p),
            adjusted_pvalue=float(q),
            rejected=bool(q <= spec.alpha),
            truncated=record.is_truncated(which),
        )
        for record, residual, p, q in zip(tested, residuals, raw, adjusted)
    ]


def ks_test_vs_std_normal(residuals: Sequence[float]) -> KsResult:
    """One-sample Kolmogorov-Smirnov test against N(0, 1).

    The p-value comes from the asymptotic Kolmogorov distribution.

    Raises:
        TooFewPoints: If fewer than 8 residuals are given
    """
    values = np.asarray(residuals, dtype=float)
    if values.size < KS_MIN_POINTS:
        raise TooFewPoints(
            f"KS test needs at least {KS_MIN_POINTS} residuals, got {values.size}"
        )
    result = stats.ks_1samp(values, ndtr, method="asymp")
    return KsResult(float(result.statistic), float(result.pvalue))


def silverman_bandwidth(values: np.ndarray) -> float:
    """Silverman's rule 0.9 min(sd, IQR/1.34) n^(-1/5).

    When one spread measure is zero the other is used; when both are, unit
    spread is assumed (residuals live on the N(0, 1) scale).
    """
    sd = float(np.std(values, ddof=1))
    q75, q25 = np.percentile(values, [75, 25])
    spreads = [s for s in (sd, float(q75 - q25) / 1.34) if s > 0]
    spread = min(spreads) if spreads else 1.0
    return 0.9 * spread * values.size ** (-0.2)


def _kde(values: np.ndarray, bandwidth: float, grid: np.ndarray) -> np.ndarray:
    sd = float(np.std(values, ddof=1))
    if sd > 0:
        kernel = stats.gaussian_kde(values, bw_method=bandwidth / sd)
        density = kernel(grid)
    else:
        density = stats.norm.pdf(grid, loc=values[0], scale=bandwidth)
    # Rescale so the emitted grid carries unit mass.
    return density / trapezoid(density, grid)


def panel_data(
    records: Sequence[ResidualRecord], which: Which, alpha: float = 0.05
) -> Panels:
    """Build Q-Q, density, ECDF and residual-versus-fitted plot data.

    Args:
        records: Residual records; undefined residuals are skipped
        which: Residual kind to summarize
        alpha: Level of the right-sided rejection cut-off carried for plots

    Raises:
        TooFewPoints: If fewer than two residuals are defined
    """
    which = Which(which)
    usable = [record for record in records if math.isfinite(record.residual(which))]
    values = np.array([record.residual(which) for record in usable], dtype=float)
    n = values.size
    if n < 2:
        raise TooFewPoints(f"Panel data needs at least 2 residuals, got {n}")

    ordered = np.sort(values)
    theoretical = ndtri((np.arange(1, n + 1) - 0.5) / n)
    qq = np.column_stack([theoretical, ordered])

    bandwidth = silverman_bandwidth(values)
    grid = np.linspace(
        ordered[0] - KDE_GRID_BANDWIDTHS * bandwidth,
        ordered[-1] + KDE_GRID_BANDWIDTHS * bandwidth,
        KDE_GRID_POINTS,
    )
    density = np.column_stack([grid, _kde(values, bandwidth, grid), stats.norm.pdf(grid)])

    empirical = stats.ecdf(values).cdf
    ecdf = np.column_stack(
        [empirical.quantiles, empirical.probabilities, ndtr(empirical.quantiles)]
    )

    fitted = np.array([[record.fitted, record.residual(which)] for record in usable])

    return Panels(
        qq=qq,
        density=density,
        ecdf=ecdf,
        fitted=fitted,
        bandwidth=bandwidth,
        threshold=float(-ndtri(alpha)),
    )


def diagnose(
    records: Sequence[ResidualRecord],
    which: Which,
    spec: TestSpec,
    correction: Correction = Correction.NONE,
) -> DiagnosticsReport:
    """Run outlier tests, the KS check and panel construction together.

    The KS fields are left empty when fewer than 8 residuals are defined.
    """
    which = Which(which)
    outliers = outlier_test(records, which, spec, correction)
    values = [outlier.residual for outlier in outliers]

    try:
        ks = ks_test_vs_std_normal(values)
    except TooFewPoints:
        ks = None

    panels = panel_data(records, which, spec.alpha) if len(values) >= 2 else None

    return DiagnosticsReport(
        which=which,
        spec=spec,
        correction=Correction(correction),
        n_units=len(outliers),
        ks_statistic=ks.statistic if ks else None,
        ks_pvalue=ks.pvalue if ks else None,
        outliers=outliers,
        panels=panels,
        n_truncated=sum(outlier.truncated for outlier in outliers),
    )


def write_panels(
    panels: Panels,
    out_dir: str | Path,
    prefix: str = "",
    suffix: str = "",
    fmt: str = "csv",
    names: Sequence[str] = PANEL_NAMES,
) -> List[Path]:
    """Write panel data files named ``{prefix}{panel}{suffix}.{fmt}``.

    Returns:
        Paths of the written files
    """
    out_dir = Path(out_dir)
    frames = panels.frames()
    written = []
    for name in names:
        path = out_dir / f"{prefix}{name}{suffix}.{fmt}"
        write_frame(frames[name], path, fmt)
        written.append(path)
    return written
