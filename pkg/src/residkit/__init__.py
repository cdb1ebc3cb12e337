# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Percentile-based residuals for model assessment."""

from residkit.__about__ import __version__
from residkit.calibration import (
    CalibrationReport,
    Classification,
    Side,
    TestSpec,
    calibrated_alpha,
    classify_standard,
    full_report,
    power_percentile,
    power_standard,
    rddag_law,
    type1_error_standard,
)
from residkit.diagnostics import (
    Correction,
    DiagnosticsReport,
    diagnose,
    ks_test_vs_std_normal,
    outlier_test,
    panel_data,
)
from residkit.distributions import (
    EmpiricalDistribution,
    ParametricDistribution,
    PointMassDistribution,
    PredictiveDistribution,
    make_distribution,
)
from residkit.manifest import RunManifest
from residkit.residuals import (
    ResidualRecord,
    Which,
    batch_residuals,
    percentile_residual,
    standard_residual,
)

__all__ = [
    "__version__",
    "CalibrationReport",
    "Classification",
    "Correction",
    "DiagnosticsReport",
    "EmpiricalDistribution",
    "ParametricDistribution",
    "PointMassDistribution",
    "PredictiveDistribution",
    "ResidualRecord",
    "RunManifest",
    "Side",
    "TestSpec",
    "Which",
    "batch_residuals",
    "calibrated_alpha",
    "classify_standard",
    "diagnose",
    "full_report",
    "ks_test_vs_std_normal",
    "make_distribution",
    "outlier_test",
    "panel_data",
    "percentile_residual",
    "power_percentile",
    "power_standard",
    "rddag_law",
    "standard_residual",
    "type1_error_standard",
]
