# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Package for the Beta-regression simulation study."""

from residkit.simulation.config import Hypothesis, SimConfig, load_sim_config
from residkit.simulation.convergence import gelman_rubin
from residkit.simulation.data import Dataset, generate_dataset
from residkit.simulation.sampler import McmcOutput, fit_working_model
from residkit.simulation.study import (
    FigureReplication,
    StudyCell,
    StudyReport,
    figure_replication,
    run_study,
)

__all__ = [
    "Dataset",
    "FigureReplication",
    "Hypothesis",
    "McmcOutput",
    "SimConfig",
    "StudyCell",
    "StudyReport",
    "figure_replication",
    "fit_working_model",
    "gelman_rubin",
    "generate_dataset",
    "load_sim_config",
    "run_study",
]
