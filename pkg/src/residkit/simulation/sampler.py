# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Metropolis-within-Gibbs fit of the working Beta-regression model.

The working model omits x2: Y_k ~ Beta(a_k, b), log a_k = beta0 + beta1 x1_k,
with beta0, beta1 independent N(0, 10^2) and b ~ Uniform(0, 5). Each
parameter is updated in turn by a Gaussian random walk whose log step size
is adapted during burn-in by a Robbins-Monro recursion toward the target
acceptance rate, then frozen.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, List

import numpy as np
from scipy.special import betaln

from residkit.distributions import EmpiricalDistribution
from residkit.errors import DomainError, NonConvergenceWarning
from residkit.simulation.config import SimConfig
from residkit.simulation.convergence import RHAT_THRESHOLD, gelman_rubin, split_gelman_rubin
from residkit.simulation.data import Dataset, clip_unit

logger = logging.getLogger(__name__)

PARAMETERS = ("beta0", "beta1", "b")
PRIOR_SD = 10.0
B_UPPER = 5.0
INITIAL_STEPS = (0.1, 0.1, 0.2)
ADAPT_EXPONENT = 0.6
ACCEPTANCE_BAND = (0.2, 0.5)


@dataclass
class McmcOutput:
    """Posterior and predictive draws of one working-model fit.

    Attributes:
        unit_ids: Unit id per predictive column
        predictive_matrix: Predictive draws, shape (n_draws, n_units)
        posterior_draws: Retained draws, shape (n_chains, n_retained, 3)
        rhat: Scale reduction factor per parameter
        acceptance_rates: Post burn-in acceptance rate per parameter block
    """

    unit_ids: np.ndarray
    predictive_matrix: np.ndarray
    posterior_draws: np.ndarray
    rhat: Dict[str, float]
    acceptance_rates: Dict[str, float]

    @property
    def converged(self) -> bool:
        return all(value <= RHAT_THRESHOLD for value in self.rhat.values())

    def predictive_distribution(self, index: int) -> EmpiricalDistribution:
        """Empirical predictive law of the unit in column ``index``."""
        return EmpiricalDistribution(self.predictive_matrix[:, index])

    @cached_property
    def predictive_draws(self) -> Dict[int, EmpiricalDistribution]:
        return {
            int(unit_id): self.predictive_distribution(i)
            for i, unit_id in enumerate(self.unit_ids)
        }

    def posterior_mean(self) -> Dict[str, float]:
        pooled = self.posterior_draws.reshape(-1, len(PARAMETERS))
        return dict(zip(PARAMETERS, pooled.mean(axis=0).tolist()))

    def posterior_sd(self) -> Dict[str, float]:
        pooled = self.posterior_draws.reshape(-1, len(PARAMETERS))
        return dict(zip(PARAMETERS, pooled.std(axis=0, ddof=1).tolist()))


class _WorkingPosterior:
    """Unnormalized log posterior of (beta0, beta1, b)."""

    def __init__(self, data: Dataset) -> None:
        self.x1 = np.asarray(data.x1, dtype=float)
        self.log_y = np.log(data.y)
        self.log1m_y = np.log1p(-np.asarray(data.y, dtype=float))

    def __call__(self, theta: np.ndarray) -> float:
        beta0, beta1, b = theta
        if not 0.0 < b < B_UPPER:
            return -math.inf
        with np.errstate(over="ignore", invalid="ignore"):
            a = np.exp(beta0 + beta1 * self.x1)
            loglik = np.sum((a - 1.0) * self.log_y + (b - 1.0) * self.log1m_y - betaln(a, b))
        if not np.isfinite(loglik):
            return -math.inf
        return float(loglik) - 0.5 * (beta0**2 + beta1**2) / PRIOR_SD**2


def _initial_values(rng: np.random.Generator) -> np.ndarray:
    # Over-dispersed relative to the posterior.
    return np.array(
        [rng.normal(0.0, 1.0), rng.normal(0.0, 1.0), rng.uniform(0.5, B_UPPER - 0.5)]
    )


def _run_chain(
    log_post: _WorkingPosterior, cfg: SimConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    theta = _initial_values(rng)
    current = log_post(theta)
    while not math.isfinite(current):
        theta = _initial_values(rng)
        current = log_post(theta)

    log_step = np.log(INITIAL_STEPS)
    accepted = np.zeros(len(PARAMETERS))
    trace = np.empty((cfg.n_iter, len(PARAMETERS)))

    for t in range(cfg.n_iter):
        for j in range(len(PARAMETERS)):
            proposal = theta.copy()
            proposal[j] += math.exp(log_step[j]) * rng.standard_normal()
            candidate = log_post(proposal)
            accept = math.log(rng.uniform()) < candidate - current
            if accept:
                theta, current = proposal, candidate
            if t < cfg.n_burnin:
                log_step[j] += (t + 1) ** -ADAPT_EXPONENT * (accept - cfg.target_acceptance)
            else:
                accepted[j] += accept
        trace[t] = theta

    rates = accepted / (cfg.n_iter - cfg.n_burnin)
    logger.debug(
        "Chain finished: steps %s, acceptance %s",
        np.round(np.exp(log_step), 4).tolist(),
        np.round(rates, 3).tolist(),
    )
    return trace, rates


def _rhat(retained: np.ndarray) -> Dict[str, float]:
    if retained.shape[0] >= 2:
        return {
            name: gelman_rubin(retained[:, :, j]) for j, name in enumerate(PARAMETERS)
        }
    return {
        name: split_gelman_rubin(retained[0, :, j]) for j, name in enumerate(PARAMETERS)
    }


def fit_working_model(data: Dataset, cfg: SimConfig, rep_seed: Any) -> McmcOutput:
    """Fit the working model and draw one predictive value per retained iteration.

    Draws are retained after burn-in at the thinning interval and pooled
    across chains, so each unit gets n_chains * retained_per_chain
    predictive draws. With one chain the scale reduction compares its two
    halves.

    Args:
        data: Observations; every y must lie in (0, 1)
        cfg: Sampler settings
        rep_seed: Seed or SeedSequence; equal seeds give identical output

    Raises:
        DomainError: If some y is outside (0, 1)

    Warns:
        NonConvergenceWarning: If any scale reduction factor exceeds 1.1
    """
    y = np.asarray(data.y, dtype=float)
    if not np.all((y > 0.0) & (y < 1.0)):
        raise DomainError("Working model needs every observation inside (0, 1)")

    seed = (
        rep_seed
        if isinstance(rep_seed, np.random.SeedSequence)
        else np.random.SeedSequence(rep_seed)
    )
    *chain_seeds, predictive_seed = seed.spawn(cfg.n_chains + 1)

    log_post = _WorkingPosterior(data)
    traces: List[np.ndarray] = []
    rates: List[np.ndarray] = []
    for chain_seed in chain_seeds:
        trace, chain_rates = _run_chain(log_post, cfg, np.random.default_rng(chain_seed))
        traces.append(trace[cfg.n_burnin :: cfg.thin])
        rates.append(chain_rates)

    retained = np.stack(traces)
    acceptance = dict(zip(PARAMETERS, np.mean(rates, axis=0).tolist()))
    low, high = ACCEPTANCE_BAND
    for name, rate in acceptance.items():
        if not low <= rate <= high:
            logger.debug("Acceptance rate of %s is %.3f, outside [%s, %s]", name, rate, low, high)

    rhat = _rhat(retained)
    if any(value > RHAT_THRESHOLD for value in rhat.values()):
        warnings.warn(
            f"Working model did not converge: rhat {rhat}", NonConvergenceWarning, stacklevel=2
        )

    pooled = retained.reshape(-1, len(PARAMETERS))
    a = np.exp(pooled[:, [0]] + pooled[:, [1]] * np.asarray(data.x1, dtype=float)[None, :])
    rng = np.random.default_rng(predictive_seed)
    predictive = clip_unit(rng.beta(a, pooled[:, [2]]))

    return McmcOutput(
        unit_ids=np.asarray(data.unit_id),
        predictive_matrix=predictive,
        posterior_draws=retained,
        rhat=rhat,
        acceptance_rates=acceptance,
    )
