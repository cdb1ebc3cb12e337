# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Gelman-Rubin potential scale reduction factor."""

import math
from typing import Any

import numpy as np

from residkit.errors import TooFewPoints, ZeroVariance

MIN_CHAIN_LENGTH = 10
RHAT_THRESHOLD = 1.1


def gelman_rubin(chains: Any) -> float:
    """Potential scale reduction factor of one parameter.

    R = sqrt(((n - 1)/n W + B/n) / W), where W is the mean within-chain
    variance and B/n the variance of the chain means.

    Args:
        chains: Array of shape (n_chains, n) holding one trace per chain

    Raises:
        TooFewPoints: With fewer than 2 chains or fewer than 10 iterations
        ZeroVariance: If every chain is constant
    """
    traces = np.asarray(chains, dtype=float)
    if traces.ndim != 2 or traces.shape[0] < 2:
        raise TooFewPoints("Gelman-Rubin needs at least 2 chains")
    n = traces.shape[1]
    if n < MIN_CHAIN_LENGTH:
        raise TooFewPoints(
            f"Gelman-Rubin needs chains of length >= {MIN_CHAIN_LENGTH}, got {n}"
        )

    within = float(np.mean(np.var(traces, axis=1, ddof=1)))
    if within <= 0.0:
        raise ZeroVariance("Within-chain variance is zero")
    between_over_n = float(np.var(np.mean(traces, axis=1), ddof=1))

    pooled = (n - 1) / n * within + between_over_n
    return math.sqrt(pooled / within)


def split_gelman_rubin(trace: Any) -> float:
    """Scale reduction of a single chain, comparing its two halves."""
    values = np.asarray(trace, dtype=float)
    half = values.size // 2
    return gelman_rubin(np.vstack([values[:half], values[half : 2 * half]]))
