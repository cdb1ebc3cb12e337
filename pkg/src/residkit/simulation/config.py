# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Configuration of the Beta-regression simulation study."""

import dataclasses
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Tuple

import yaml

from residkit.diagnostics import KS_MIN_POINTS
from residkit.errors import ConfigError


class Hypothesis(str, Enum):
    """True data-generating model: without or with the omitted covariate effect."""

    NULL = "null"
    ALTERNATIVE = "alternative"

    @property
    def index(self) -> int:
        return 0 if self is Hypothesis.NULL else 1


@dataclass(frozen=True)
class SimConfig:
    """Parameters of the simulation study.

    ``sample_size_N`` is the number of units generated and fitted in each
    study replication; ``K`` is the number of units in the single
    illustrative replication behind the residual plots.
    """

    K: int = 1000
    beta0: float = 0.0
    beta1: float = 1.0
    beta2_alt: float = -5.0
    b_true: float = 3.0
    n_iter: int = 2000
    n_burnin: int = 1000
    n_chains: int = 2
    n_replications: int = 200
    alpha_nominal: float = 0.05
    master_seed: int = 20110923
    sample_size_N: int = 200
    thin: int = 1
    sample_sizes: Tuple[int, ...] = ()
    tested_unit: int = 0
    trunc_bound: float = 5.0
    target_acceptance: float = 0.44

    def __post_init__(self) -> None:
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))

        problems = []
        if self.K < KS_MIN_POINTS:
            problems.append(f"K must be >= {KS_MIN_POINTS}, got {self.K}")
        if self.b_true <= 0:
            problems.append(f"b_true must be > 0, got {self.b_true}")
        if self.n_burnin < 0 or self.n_iter <= self.n_burnin:
            problems.append(
                f"n_iter must exceed n_burnin >= 0, got {self.n_iter} and {self.n_burnin}"
            )
        if self.n_chains < 1:
            problems.append(f"n_chains must be >= 1, got {self.n_chains}")
        if self.n_replications < 0:
            problems.append(f"n_replications must be >= 0, got {self.n_replications}")
        if not 0.0 < self.alpha_nominal < 1.0:
            problems.append(f"alpha_nominal must be in (0, 1), got {self.alpha_nominal}")
        if self.master_seed < 0:
            problems.append(f"master_seed must be >= 0, got {self.master_seed}")
        if self.thin < 1:
            problems.append(f"thin must be >= 1, got {self.thin}")
        if self.trunc_bound <= 0:
            problems.append(f"trunc_bound must be > 0, got {self.trunc_bound}")
        if not 0.2 <= self.target_acceptance <= 0.5:
            problems.append(
                f"target_acceptance must be in [0.2, 0.5], got {self.target_acceptance}"
            )
        if self.retained_per_chain < 10:
            problems.append(
                "At least 10 retained iterations per chain are needed for convergence checks"
            )
        smallest = min(self.cells)
        if smallest < 1:
            problems.append(f"Sample sizes must be >= 1, got {smallest}")
        if not 0 <= self.tested_unit < min(smallest, self.K):
            problems.append(
                f"tested_unit {self.tested_unit} is outside the generated units"
            )

        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def cells(self) -> Tuple[int, ...]:
        """Per-replication sample sizes, one study cell each."""
        return self.sample_sizes or (self.sample_size_N,)

    @property
    def retained_per_chain(self) -> int:
        return len(range(self.n_burnin, self.n_iter, max(self.thin, 1)))

    def beta2(self, hypothesis: Hypothesis) -> float:
        return 0.0 if Hypothesis(hypothesis) is Hypothesis.NULL else self.beta2_alt

    def replace(self, **changes: Any) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data["sample_sizes"] = list(self.sample_sizes)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SimConfig":
        """Build a config from a mapping, rejecting unknown keys."""
        if not isinstance(data, dict):
            raise ConfigError(f"Configuration must be a mapping, got {type(data).__name__}")

        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown configuration key(s): {', '.join(unknown)}")

        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"Invalid configuration value: {e}") from e


def load_sim_config(config_path: str | Path) -> SimConfig:
    """Load a simulation config from a YAML or JSON file.

    An empty file yields the defaults.

    Raises:
        FileNotFoundError: If config file doesn't exist
        ConfigError: If the file is not valid YAML or holds invalid settings
    """
    config_path = Path(config_path)
    if not config_path.exists():
        raise FileNotFoundError(f"Configuration file not found: {config_path}")

    try:
        with open(config_path, encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in configuration file: {e}") from e

    return SimConfig.from_dict(data or {})
