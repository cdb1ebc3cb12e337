# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Predictive distributions used to compute residuals.

A predictive distribution is the working model's law for a single unit's
observable. Parametric kinds wrap frozen ``scipy.stats`` distributions;
``PointMass`` and ``Empirical`` carry their atoms directly. All values are
immutable after construction, so they can be shared across workers.
"""

import math
from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, Tuple

import numpy as np
from scipy import stats
from scipy.special import ndtr, ndtri

from residkit.errors import DomainError

# Empirical draws and observations are compared after rounding to this
# many significant digits.
SIGNIFICANT_DIGITS = 12


def std_normal_cdf(x: Any) -> Any:
    """Standard normal CDF, scalar or elementwise."""
    return ndtr(x)


def std_normal_pdf(x: Any) -> Any:
    """Standard normal density, scalar or elementwise."""
    return stats.norm.pdf(x)


def std_normal_quantile(u: Any) -> Any:
    """Standard normal quantile function.

    Args:
        u: Probability or array of probabilities, strictly inside (0, 1)

    Returns:
        The quantile(s) z with Phi(z) = u

    Raises:
        DomainError: If any probability lies outside (0, 1)
    """
    arr = np.asarray(u, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise DomainError(f"Standard normal quantile needs 0 < u < 1, got {u!r}")
    return ndtri(u)


def canonical_round(values: Any) -> np.ndarray:
    """Round values to SIGNIFICANT_DIGITS significant digits.

    Values below 1e-300 in magnitude, zeros and non-finite values are left
    untouched.
    """
    arr = np.array(values, dtype=float, copy=True, ndmin=1)
    mask = np.isfinite(arr) & (np.abs(arr) >= 1e-300)
    if np.any(mask):
        scale = np.power(10.0, np.floor(np.log10(np.abs(arr[mask]))))
        arr[mask] = np.round(arr[mask] / scale, SIGNIFICANT_DIGITS - 1) * scale
    return arr


def _as_output(result: Any, like: Any) -> Any:
    """Return a float for scalar input, an array otherwise."""
    if np.ndim(like) == 0:
        return float(np.asarray(result).reshape(-1)[0])
    return np.asarray(result, dtype=float)


class PredictiveDistribution(ABC):
    """Common interface of every predictive distribution kind."""

    kind: str = ""

    @property
    @abstractmethod
    def discrete(self) -> bool:
        """Whether the distribution has atoms (half-correction applies)."""

    @abstractmethod
    def cdf(self, y: Any) -> Any:
        """Cumulative probability pr(Y <= y)."""

    def sf(self, y: Any) -> Any:
        """Survival probability pr(Y > y)."""
        return _as_output(1.0 - np.asarray(self.cdf(y)), y)

    @abstractmethod
    def point_mass(self, y: Any) -> Any:
        """Probability of exactly y; zero for continuous kinds."""

    @abstractmethod
    def inv_cdf(self, u: Any) -> Any:
        """Quantile function (generalized inverse for atom-bearing kinds)."""

    def isf(self, u: Any) -> Any:
        """Inverse survival function, defined for continuous kinds only."""
        raise DomainError(f"Inverse survival function undefined for {self.kind}")

    def pdf(self, y: Any) -> Any:
        """Density, defined for continuous kinds only."""
        raise DomainError(f"Density undefined for discrete kind {self.kind}")

    @abstractmethod
    def mean_sd(self) -> Tuple[float, float]:
        """Mean and standard deviation of the distribution."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        """Draw from the distribution with the given generator."""

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """JSON-serializable descriptor."""

    @staticmethod
    def from_dict(spec: Dict[str, Any]) -> "PredictiveDistribution":
        """Build a distribution from its JSON descriptor.

        Args:
            spec: Mapping with "kind" and either "params" or, for Empirical,
                "draws"

        Returns:
            The predictive distribution

        Raises:
            DomainError: If the descriptor is incomplete or invalid
        """
        if not isinstance(spec, dict) or "kind" not in spec:
            raise DomainError(f"Distribution descriptor needs a 'kind': {spec!r}")
        kind = spec["kind"]
        if kind == "Empirical":
            if "draws" not in spec:
                raise DomainError("Empirical descriptor needs 'draws'")
            return EmpiricalDistribution(spec["draws"])
        params = spec.get("params", {})
        if not isinstance(params, dict):
            raise DomainError(f"'params' must be a mapping for kind {kind}")
        return make_distribution(kind, **params)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PredictiveDistribution):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(repr(self))

    def __repr__(self) -> str:
        params = self.to_dict().get("params", {})
        inner = ", ".join(f"{key}={value!r}" for key, value in params.items())
        return f"{self.kind}({inner})"


def _positive(*names: str) -> Callable[[Dict[str, float]], None]:
    def check(params: Dict[str, float]) -> None:
        for name in names:
            if not params[name] > 0:
                raise DomainError(f"Parameter '{name}' must be > 0, got {params[name]}")

    return check


def _probability(name: str) -> Callable[[Dict[str, float]], None]:
    def check(params: Dict[str, float]) -> None:
        if not 0.0 <= params[name] <= 1.0:
            raise DomainError(f"Parameter '{name}' must be in [0, 1], got {params[name]}")

    return check


def _check_uniform(params: Dict[str, float]) -> None:
    if not params["lo"] < params["hi"]:
        raise DomainError(f"Uniform needs lo < hi, got {params['lo']} >= {params['hi']}")


def _check_binomial(params: Dict[str, float]) -> None:
    n = params["n"]
    if n < 0 or int(n) != n:
        raise DomainError(f"Binomial 'n' must be a non-negative integer, got {n}")
    _probability("p")(params)


# kind -> (parameter names, discrete, validator, scipy builder)
_FAMILIES: Dict[str, Tuple[Tuple[str, ...], bool, Callable, Callable]] = {
    "Normal": (
        ("mu", "sigma"),
        False,
        _positive("sigma"),
        lambda p: stats.norm(loc=p["mu"], scale=p["sigma"]),
    ),
    "LogNormal": (
        ("mu_log", "sigma_log"),
        False,
        _positive("sigma_log"),
        lambda p: stats.lognorm(s=p["sigma_log"], scale=math.exp(p["mu_log"])),
    ),
    "Beta": (
        ("a", "b"),
        False,
        _positive("a", "b"),
        lambda p: stats.beta(p["a"], p["b"]),
    ),
    "Gamma": (
        ("shape", "rate"),
        False,
        _positive("shape", "rate"),
        lambda p: stats.gamma(a=p["shape"], scale=1.0 / p["rate"]),
    ),
    "Exponential": (
        ("rate",),
        False,
        _positive("rate"),
        lambda p: stats.expon(scale=1.0 / p["rate"]),
    ),
    "Uniform": (
        ("lo", "hi"),
        False,
        _check_uniform,
        lambda p: stats.uniform(loc=p["lo"], scale=p["hi"] - p["lo"]),
    ),
    "Bernoulli": (
        ("p",),
        True,
        _probability("p"),
        lambda p: stats.bernoulli(p["p"]),
    ),
    "Binomial": (
        ("n", "p"),
        True,
        _check_binomial,
        lambda p: stats.binom(int(p["n"]), p["p"]),
    ),
    "Poisson": (
        ("lam",),
        True,
        _positive("lam"),
        lambda p: stats.poisson(p["lam"]),
    ),
}

PARAMETRIC_KINDS = tuple(_FAMILIES)


class ParametricDistribution(PredictiveDistribution):
    """A named parametric family backed by a frozen scipy distribution."""

    def __init__(self, kind: str, **params: float) -> None:
        """Initialize the distribution.

        Args:
            kind: Family name, one of PARAMETRIC_KINDS
            **params: Family parameters by name

        Raises:
            DomainError: If the kind is unknown or parameters are invalid
        """
        if kind not in _FAMILIES:
            raise DomainError(f"Unknown distribution kind: {kind}")
        names, discrete, validate, build = _FAMILIES[kind]

        missing = [name for name in names if name not in params]
        extra = [name for name in params if name not in names]
        if missing or extra:
            raise DomainError(
                f"{kind} takes parameters {', '.join(names)}; "
                f"missing: {missing}, unexpected: {extra}"
            )

        values: Dict[str, float] = {}
        for name in names:
            try:
                values[name] = float(params[name])
            except (TypeError, ValueError) as e:
                raise DomainError(f"Parameter '{name}' is not a number") from e
            if not math.isfinite(values[name]):
                raise DomainError(f"Parameter '{name}' must be finite")
        validate(values)

        self.kind = kind
        self._params = values
        self._discrete = discrete
        self._frozen = build(values)

    @property
    def params(self) -> Dict[str, float]:
        return dict(self._params)

    @property
    def discrete(self) -> bool:
        return self._discrete

    def cdf(self, y: Any) -> Any:
        return _as_output(self._frozen.cdf(y), y)

    def sf(self, y: Any) -> Any:
        return _as_output(self._frozen.sf(y), y)

    def pdf(self, y: Any) -> Any:
        if self._discrete:
            return super().pdf(y)
        return _as_output(self._frozen.pdf(y), y)

    def point_mass(self, y: Any) -> Any:
        if not self._discrete:
            return _as_output(np.zeros(np.shape(y)), y)
        return _as_output(self._frozen.pmf(y), y)

    def inv_cdf(self, u: Any) -> Any:
        arr = np.asarray(u, dtype=float)
        if self._discrete:
            if np.any((arr < 0.0) | (arr > 1.0)):
                raise DomainError(f"Probability must be in [0, 1], got {u!r}")
            lower = self._frozen.support()[0]
            return _as_output(np.maximum(self._frozen.ppf(arr), lower), u)
        if np.any(~((arr > 0.0) & (arr < 1.0))):
            raise DomainError(f"{self.kind} quantile needs 0 < u < 1, got {u!r}")
        return _as_output(self._frozen.ppf(arr), u)

    def isf(self, u: Any) -> Any:
        if self._discrete:
            return super().isf(u)
        arr = np.asarray(u, dtype=float)
        if np.any(~((arr > 0.0) & (arr < 1.0))):
            raise DomainError(f"{self.kind} inverse survival needs 0 < u < 1, got {u!r}")
        return _as_output(self._frozen.isf(arr), u)

    def mean_sd(self) -> Tuple[float, float]:
        return float(self._frozen.mean()), float(self._frozen.std())

    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        draws = self._frozen.rvs(size=size, random_state=rng)
        return float(draws) if size is None else np.asarray(draws, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "params": dict(self._params)}


class PointMassDistribution(PredictiveDistribution):
    """All probability on a single value."""

    kind = "PointMass"

    def __init__(self, c: float) -> None:
        c = float(c)
        if not math.isfinite(c):
            raise DomainError("PointMass location must be finite")
        self.c = c
        self._key = canonical_round(c)[0]

    @property
    def discrete(self) -> bool:
        return True

    def cdf(self, y: Any) -> Any:
        return _as_output((canonical_round(y) >= self._key).astype(float), y)

    def point_mass(self, y: Any) -> Any:
        return _as_output((canonical_round(y) == self._key).astype(float), y)

    def inv_cdf(self, u: Any) -> Any:
        arr = np.asarray(u, dtype=float)
        if np.any((arr < 0.0) | (arr > 1.0)):
            raise DomainError(f"Probability must be in [0, 1], got {u!r}")
        return _as_output(np.full(np.shape(arr), self.c), u)

    def mean_sd(self) -> Tuple[float, float]:
        return self.c, 0.0

    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        return self.c if size is None else np.full(size, self.c)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "params": {"c": self.c}}


class EmpiricalDistribution(PredictiveDistribution):
    """The discrete law putting mass 1/n on each of n draws.

    Draws (typically MCMC predictive samples) are stored sorted after
    canonical rounding, and observations are rounded the same way before
    counting ties.
    """

    kind = "Empirical"

    def __init__(self, draws: Any) -> None:
        """Initialize from a sequence of draws.

        Args:
            draws: At least two finite real values

        Raises:
            DomainError: If fewer than two draws or any draw is not finite
        """
        try:
            arr = np.asarray(draws, dtype=float).reshape(-1)
        except (TypeError, ValueError) as e:
            raise DomainError("Empirical draws must be numbers") from e
        if arr.size < 2:
            raise DomainError(f"Empirical needs at least 2 draws, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("Empirical draws must be finite")

        self._draws = np.sort(canonical_round(arr))
        self._draws.setflags(write=False)
        self._levels = np.arange(1, arr.size + 1) / arr.size

    @property
    def draws(self) -> np.ndarray:
        return self._draws

    @property
    def n(self) -> int:
        return int(self._draws.size)

    @property
    def discrete(self) -> bool:
        return True

    def cdf(self, y: Any) -> Any:
        below = np.searchsorted(self._draws, canonical_round(y), side="right")
        return _as_output(below / self.n, y)

    def point_mass(self, y: Any) -> Any:
        key = canonical_round(y)
        ties = np.searchsorted(self._draws, key, side="right") - np.searchsorted(
            self._draws, key, side="left"
        )
        return _as_output(ties / self.n, y)

    def inv_cdf(self, u: Any) -> Any:
        arr = np.asarray(u, dtype=float)
        if np.any((arr < 0.0) | (arr > 1.0)):
            raise DomainError(f"Probability must be in [0, 1], got {u!r}")
        index = np.minimum(np.searchsorted(self._levels, arr, side="left"), self.n - 1)
        return _as_output(self._draws[index], u)

    def mean_sd(self) -> Tuple[float, float]:
        return float(np.mean(self._draws)), float(np.std(self._draws, ddof=1))

    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        draws = rng.choice(self._draws, size=size, replace=True)
        return float(draws) if size is None else np.asarray(draws, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "draws": self._draws.tolist()}

    def __repr__(self) -> str:
        return f"Empirical(n={self.n})"


def make_distribution(kind: str, **params: Any) -> PredictiveDistribution:
    """Construct any distribution kind by name.

    Args:
        kind: One of PARAMETRIC_KINDS, "PointMass" or "Empirical"
        **params: Parameters of the kind ("c" for PointMass, "draws" for
            Empirical)

    Returns:
        The predictive distribution
    """
    if kind == "PointMass":
        if set(params) != {"c"}:
            raise DomainError("PointMass takes exactly one parameter: c")
        return PointMassDistribution(params["c"])
    if kind == "Empirical":
        if set(params) != {"draws"}:
            raise DomainError("Empirical takes exactly one parameter: draws")
        return EmpiricalDistribution(params["draws"])
    return ParametricDistribution(kind, **params)
