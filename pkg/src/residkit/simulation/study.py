# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Replicated rejection-rate study and the single illustrative replication.

Each study replication generates data under one hypothesis, fits the
working model, and tests one designated unit at the right-sided nominal
level with the standard residual, the standard residual at its calibrated
level, and the percentile-based residual. Replications are independent
tasks seeded from (master_seed, hypothesis, N, replication), so results do
not depend on the number of worker processes.
"""

import logging
import math
import os
import warnings
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Any, Dict, List, NamedTuple, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import ndtri

from residkit.calibration import Side, TestSpec, empirical_calibrated_alpha
from residkit.diagnostics import KsResult, Panels, ks_test_vs_std_normal, panel_data
from residkit.errors import NonConvergenceWarning, ResidkitError
from residkit.residuals import (
    ResidualRecord,
    Which,
    percentile_residual,
    residual_record,
    standard_residual,
)
from residkit.simulation.config import Hypothesis, SimConfig
from residkit.simulation.data import generate_dataset
from residkit.simulation.sampler import fit_working_model

logger = logging.getLogger(__name__)

THREADS_ENV = "RESIDKIT_THREADS"

STUDY_COLUMNS = (
    "hypothesis",
    "N",
    "n_replications",
    "n_failed",
    "n_nonconverged",
    "rejection_rate_star",
    "se_star",
    "rejection_rate_star_calibrated",
    "se_star_calibrated",
    "rejection_rate_ddag",
    "se_ddag",
    "mean_calibrated_alpha",
    "se_calibrated_alpha",
)


class ReplicationOutcome(NamedTuple):
    """Test decisions of one replication; ``failed`` holds the error text."""

    hypothesis: Hypothesis
    N: int
    replication: int
    reject_star: bool = False
    reject_star_calibrated: bool = False
    reject_ddag: bool = False
    calibrated_alpha: float = math.nan
    converged: bool = True
    failed: str | None = None


@dataclass
class StudyCell:
    """Rejection rates of one (hypothesis, N) cell with Monte Carlo SEs."""

    hypothesis: Hypothesis
    N: int
    n_replications: int
    n_failed: int
    n_nonconverged: int
    rejection_rate_star: float
    se_star: float
    rejection_rate_star_calibrated: float
    se_star_calibrated: float
    rejection_rate_ddag: float
    se_ddag: float
    mean_calibrated_alpha: float
    se_calibrated_alpha: float

    @property
    def n_used(self) -> int:
        return self.n_replications - self.n_failed

    def to_row(self) -> Dict[str, Any]:
        row = {column: getattr(self, column) for column in STUDY_COLUMNS}
        row["hypothesis"] = self.hypothesis.value
        return row


@dataclass
class StudyReport:
    cells: List[StudyCell] = field(default_factory=list)

    def cell(self, hypothesis: Hypothesis, N: int) -> StudyCell:
        for cell in self.cells:
            if cell.hypothesis is Hypothesis(hypothesis) and cell.N == N:
                return cell
        raise KeyError(f"No study cell for ({hypothesis}, {N})")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([cell.to_row() for cell in self.cells], columns=list(STUDY_COLUMNS))


@dataclass
class FigureReplication:
    """One replication over K units with residuals and plot data of both kinds."""

    hypothesis: Hypothesis
    records: List[ResidualRecord]
    panels: Dict[Which, Panels]
    ks: Dict[Which, KsResult]
    rejection_fraction: Dict[Which, float]
    rhat: Dict[str, float]

    def summary(self) -> Dict[str, Any]:
        return {
            "hypothesis": self.hypothesis.value,
            "n_units": len(self.records),
            "rhat": self.rhat,
            **{
                which.value: {
                    "ks_statistic": self.ks[which].statistic,
                    "ks_pvalue": self.ks[which].pvalue,
                    "rejection_fraction": self.rejection_fraction[which],
                    "n_truncated": sum(r.is_truncated(which) for r in self.records),
                }
                for which in Which
            },
        }


def _binomial_se(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n) if n > 0 else math.nan


def resolve_workers(requested: int | None = None) -> int:
    """Worker count: the request, capped by RESIDKIT_THREADS when set."""
    workers = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            workers = min(workers, int(cap))
        except ValueError:
            logger.debug("Ignoring non-integer %s=%r", THREADS_ENV, cap)
    return max(1, workers)


def task_seed(
    cfg: SimConfig, hypothesis: Hypothesis, N: int, replication: int
) -> np.random.SeedSequence:
    key = [cfg.master_seed, Hypothesis(hypothesis).index, N, replication]
    return np.random.SeedSequence(key)


def run_replication(task: Tuple[SimConfig, Hypothesis, int, int]) -> ReplicationOutcome:
    """Run one replication; failures are reported in the outcome, not raised."""
    cfg, hypothesis, N, replication = task
    data_seed, fit_seed = task_seed(cfg, hypothesis, N, replication).spawn(2)
    spec = TestSpec(Side.RIGHT, cfg.alpha_nominal)
    z = float(-ndtri(cfg.alpha_nominal))

    try:
        data = generate_dataset(cfg, hypothesis, data_seed, n_units=N)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            output = fit_working_model(data, cfg, fit_seed)

        unit = cfg.tested_unit
        d = output.predictive_distribution(unit)
        y = float(data.y[unit])
        r_star = standard_residual(y, d)
        r_ddag = percentile_residual(y, d, cfg.trunc_bound).residual
        alpha_star = empirical_calibrated_alpha(d, spec)
    except (ResidkitError, FloatingPointError, ValueError) as e:
        logger.debug(
            "Dropping replication %s of (%s, N=%s): %s", replication, hypothesis.value, N, e
        )
        return ReplicationOutcome(hypothesis, N, replication, failed=str(e))

    return ReplicationOutcome(
        hypothesis=hypothesis,
        N=N,
        replication=replication,
        reject_star=r_star > z,
        reject_star_calibrated=alpha_star > 0.0 and r_star > float(-ndtri(alpha_star)),
        reject_ddag=r_ddag > z,
        calibrated_alpha=alpha_star,
        converged=output.converged,
    )


def summarize_cell(
    hypothesis: Hypothesis, N: int, outcomes: Sequence[ReplicationOutcome]
) -> StudyCell:
    """Reduce replication outcomes to rejection rates and standard errors."""
    used = [outcome for outcome in outcomes if outcome.failed is None]
    n = len(used)

    def rate(attribute: str) -> float:
        return float(np.mean([getattr(o, attribute) for o in used])) if n else math.nan

    star, calibrated, ddag = rate("reject_star"), rate("reject_star_calibrated"), rate("reject_ddag")
    alphas = np.array([o.calibrated_alpha for o in used])
    mean_alpha = float(alphas.mean()) if n else math.nan
    se_alpha = float(alphas.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan

    return StudyCell(
        hypothesis=hypothesis,
        N=N,
        n_replications=len(outcomes),
        n_failed=len(outcomes) - n,
        n_nonconverged=sum(not o.converged for o in used),
        rejection_rate_star=star,
        se_star=_binomial_se(star, n),
        rejection_rate_star_calibrated=calibrated,
        se_star_calibrated=_binomial_se(calibrated, n),
        rejection_rate_ddag=ddag,
        se_ddag=_binomial_se(ddag, n),
        mean_calibrated_alpha=mean_alpha,
        se_calibrated_alpha=se_alpha,
    )


def run_study(
    cfg: SimConfig,
    workers: int | None = None,
    hypotheses: Sequence[Hypothesis] = (Hypothesis.NULL, Hypothesis.ALTERNATIVE),
) -> StudyReport:
    """Run every replication of every (hypothesis, N) cell.

    Args:
        cfg: Study settings
        workers: Worker processes; capped by RESIDKIT_THREADS
        hypotheses: Hypotheses to simulate under

    Returns:
        One cell per (hypothesis, N); empty when n_replications is 0
    """
    if cfg.n_replications == 0:
        return StudyReport()

    cells = [(Hypothesis(h), N) for h in hypotheses for N in cfg.cells]
    tasks = [(cfg, h, N, rep) for h, N in cells for rep in range(cfg.n_replications)]

    n_workers = min(resolve_workers(workers), len(tasks))
    logger.debug("Running %d replications on %d worker(s)", len(tasks), n_workers)
    if n_workers == 1:
        outcomes = [run_replication(task) for task in tasks]
    else:
        with Pool(processes=n_workers) as pool:
            outcomes = pool.map(run_replication, tasks)

    report = StudyReport()
    for i, (hypothesis, N) in enumerate(cells):
        chunk = outcomes[i * cfg.n_replications : (i + 1) * cfg.n_replications]
        report.cells.append(summarize_cell(hypothesis, N, chunk))
    return report


def figure_replication(cfg: SimConfig, hypothesis: Hypothesis) -> FigureReplication:
    """Fit one dataset of K units and summarize both residual kinds for plotting.

    Warns:
        NonConvergenceWarning: If the fit did not converge
    """
    hypothesis = Hypothesis(hypothesis)
    seed = np.random.SeedSequence(cfg.master_seed, spawn_key=(hypothesis.index, cfg.K))
    data_seed, fit_seed = seed.spawn(2)

    data = generate_dataset(cfg, hypothesis, data_seed, n_units=cfg.K)
    output = fit_working_model(data, cfg, fit_seed)

    records = [
        residual_record(int(unit_id), float(y), output.predictive_distribution(i), cfg.trunc_bound)
        for i, (unit_id, y) in enumerate(zip(data.unit_id, data.y))
    ]

    z = float(-ndtri(cfg.alpha_nominal))
    panels, ks, rejection = {}, {}, {}
    for which in Which:
        values = [record.residual(which) for record in records]
        panels[which] = panel_data(records, which, cfg.alpha_nominal)
        ks[which] = ks_test_vs_std_normal(values)
        rejection[which] = float(np.mean(np.asarray(values) > z))

    return FigureReplication(
        hypothesis=hypothesis,
        records=records,
        panels=panels,
        ks=ks,
        rejection_fraction=rejection,
        rhat=output.rhat,
    )
