# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Beta-regression data generation.

Y_k ~ Beta(a_k, b) with log a_k = beta0 + beta1 x1_k + beta2 x2_k,
x1 ~ N(0, 1) and x2 ~ Bernoulli(1/2).
"""

from dataclasses import dataclass
from typing import Any, List, Tuple

import numpy as np
import pandas as pd

from residkit.simulation.config import Hypothesis, SimConfig

# Beta draws with tiny shape parameters can round to the boundary.
UNIT_LOW = float(np.finfo(float).tiny)
UNIT_HIGH = 1.0 - float(np.finfo(float).epsneg)


def clip_unit(values: Any) -> np.ndarray:
    """Keep values strictly inside (0, 1)."""
    return np.clip(values, UNIT_LOW, UNIT_HIGH)


@dataclass
class Dataset:
    """One simulated sample. Unit ids run from 1."""

    unit_id: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return int(self.y.size)

    def rows(self) -> List[Tuple[int, float, int, float]]:
        return [
            (int(u), float(a), int(b), float(y))
            for u, a, b, y in zip(self.unit_id, self.x1, self.x2, self.y)
        ]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({"unit_id": self.unit_id, "x1": self.x1, "x2": self.x2, "y": self.y})


def simulate_response(
    x1: np.ndarray,
    x2: np.ndarray,
    beta0: float,
    beta1: float,
    beta2: float,
    b: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw Beta responses for given covariates."""
    a = np.exp(beta0 + beta1 * np.asarray(x1, dtype=float) + beta2 * np.asarray(x2, dtype=float))
    return clip_unit(rng.beta(a, b))


def generate_dataset(
    cfg: SimConfig,
    hypothesis: Hypothesis,
    rep_seed: Any,
    n_units: int | None = None,
) -> Dataset:
    """Generate one dataset under the null or alternative model.

    Args:
        cfg: Simulation config
        hypothesis: NULL sets beta2 = 0, ALTERNATIVE uses cfg.beta2_alt
        rep_seed: Seed or SeedSequence; equal seeds give identical data
        n_units: Number of units, defaults to cfg.K
    """
    n = cfg.K if n_units is None else n_units
    rng = np.random.default_rng(rep_seed)
    x1 = rng.standard_normal(n)
    x2 = rng.binomial(1, 0.5, size=n)
    y = simulate_response(x1, x2, cfg.beta0, cfg.beta1, cfg.beta2(hypothesis), cfg.b_true, rng)
    return Dataset(unit_id=np.arange(1, n + 1), x1=x1, x2=x2, y=y)
