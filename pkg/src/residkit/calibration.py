# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Type I error, calibration and power of standard and percentile residuals.

Everything here conditions on a fixed working distribution D (mean mu0, sd
sigma0) and, for power, a fixed true distribution F. Testing the standard
residual R* against N(0, 1) at nominal level alpha rejects when the
observation passes the Gaussian quantile mu0 + sigma0 * z, so its real size
depends on how much tail mass D puts beyond that point. The percentile
residual rejects beyond the quantile of D itself and has exact size.

The analytic operations need continuous distributions. Discrete working laws
must be handled by Monte Carlo (see ``simulate_rejection_rate``).
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, NamedTuple, Tuple

import numpy as np
from scipy.optimize import bisect
from scipy.special import ndtr, ndtri

from residkit.distributions import (
    EmpiricalDistribution,
    PointMassDistribution,
    PredictiveDistribution,
    std_normal_pdf,
)
from residkit.errors import (
    DegenerateError,
    DensityZero,
    DomainError,
    InvariantViolation,
    RootNotBracketed,
)
from residkit.residuals import Which, percentile_residuals

ROOT_TOLERANCE = 1e-10
ROOT_MAX_ITER = 200
ROOT_BRACKET = (1e-12, 1.0 - 1e-12)
EXACT_TOLERANCE = 1e-9
# Tolerance for the size/power identities checked by full_report.
IDENTITY_TOLERANCE = 1e-8


class Side(str, Enum):
    RIGHT = "right"
    LEFT = "left"
    TWO_SIDED = "two"


class Classification(str, Enum):
    INFLATED = "Inflated"
    EXACT = "Exact"
    CONSERVATIVE = "Conservative"


@dataclass(frozen=True)
class TestSpec:
    """Test side and nominal level.

    Two-sided tests split alpha evenly between the tails, so alpha must not
    exceed 0.5 for them.
    """

    __test__ = False

    side: Side = Side.RIGHT
    alpha: float = 0.05

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "side", Side(self.side))
        except ValueError as e:
            raise DomainError(f"Unknown test side: {self.side!r}") from e
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.side is Side.TWO_SIDED and self.alpha > 0.5:
            raise DomainError(f"Two-sided alpha must be <= 0.5, got {self.alpha}")

    def to_dict(self) -> Dict[str, Any]:
        return {"side": self.side.value, "alpha": self.alpha}


@dataclass(frozen=True)
class CalibrationReport:
    """Size, calibration and power summary for one (F, D, test) triple."""

    spec: TestSpec
    effective_alpha: float
    classification: Classification
    calibrated_alpha: float
    pow_star_raw: float
    pow_star_calibrated: float
    pow_ddag: float
    truth: Dict[str, Any] = field(default_factory=dict)
    working: Dict[str, Any] = field(default_factory=dict)
    root_residual: float | None = None

    def to_dict(self) -> Dict[str, Any]:
        report = {
            "spec": self.spec.to_dict(),
            "truth": self.truth,
            "working": self.working,
            "effective_alpha": self.effective_alpha,
            "classification": self.classification.value,
            "calibrated_alpha": self.calibrated_alpha,
            "pow_star_raw": self.pow_star_raw,
            "pow_star_calibrated": self.pow_star_calibrated,
            "pow_ddag": self.pow_ddag,
        }
        if self.root_residual is not None:
            report["root_residual"] = self.root_residual
        return report


class RddagLaw(NamedTuple):
    cdf: float
    density: float


class MonteCarloEstimate(NamedTuple):
    rate: float
    se: float
    n_draws: int


def _moments(d: PredictiveDistribution) -> Tuple[float, float]:
    mu, sigma = d.mean_sd()
    if not sigma > 0 or not math.isfinite(sigma):
        raise DegenerateError(f"Working distribution {d!r} has sd {sigma}")
    return mu, sigma


def _require_continuous(d: PredictiveDistribution, role: str = "working") -> None:
    if isinstance(d, PointMassDistribution):
        raise DegenerateError(f"{role} distribution {d!r} is a point mass with sd 0")
    if d.discrete:
        raise DomainError(
            f"Analytic calibration needs a continuous {role} distribution, got {d!r}; "
            "use Monte Carlo for discrete laws"
        )


def _z_upper(p: float) -> float:
    """Standard normal quantile at 1 - p, computed from the p side."""
    return -float(ndtri(p))


def _z_lower(p: float) -> float:
    return float(ndtri(p))


def _upper_quantile(d: PredictiveDistribution, p: float) -> float:
    """D^{-1}(1 - p), from the survival side for continuous kinds."""
    if d.discrete:
        return float(d.inv_cdf(1.0 - p))
    return float(d.isf(p))


def two_sided_rejection_rate(d: PredictiveDistribution, x: float) -> float:
    """Rejection probability under D of a two-sided R* test at nominal level x.

    Computes 1 - D(mu0 + sigma0 z_{1-x/2}) + D(mu0 + sigma0 z_{x/2}).
    """
    mu, sigma = _moments(d)
    upper = mu + sigma * _z_upper(x / 2.0)
    lower = mu + sigma * _z_lower(x / 2.0)
    return float(d.sf(upper)) + float(d.cdf(lower))


def _solve_two_sided(d: PredictiveDistribution, alpha: float) -> Tuple[float, float]:
    """Find x with two_sided_rejection_rate(d, x) = alpha by bisection.

    Returns:
        The root and the absolute equation residual there

    Raises:
        RootNotBracketed: If the equation changes no sign on the bracket or
            the residual tolerance is not reached
    """
    lo, hi = ROOT_BRACKET

    def equation(x: float) -> float:
        return two_sided_rejection_rate(d, x) - alpha

    f_lo, f_hi = equation(lo), equation(hi)
    if f_lo > 0.0 or f_hi < 0.0:
        raise RootNotBracketed(
            f"Two-sided equation for {d!r} at alpha={alpha} is not bracketed: "
            f"f({lo})={f_lo:.3g}, f({hi})={f_hi:.3g}"
        )
    try:
        root = bisect(equation, lo, hi, xtol=1e-16, maxiter=ROOT_MAX_ITER)
    except RuntimeError as e:
        raise RootNotBracketed(f"Bisection failed for {d!r}: {e}") from e

    residual = abs(equation(root))
    if residual >= ROOT_TOLERANCE:
        raise RootNotBracketed(
            f"Bisection for {d!r} stopped with |f|={residual:.3g} >= {ROOT_TOLERANCE}"
        )
    return float(root), residual


def type1_error_standard(d: PredictiveDistribution, spec: TestSpec) -> float:
    """Effective Type I error of R* referred to N(0, 1) at nominal level alpha.

    Right: 1 - D(mu0 + sigma0 z_{1-alpha}); left: D(mu0 + sigma0 z_alpha);
    two-sided: the root x of 1 - D(mu0 + sigma0 z_{1-x/2}) +
    D(mu0 + sigma0 z_{x/2}) = alpha.

    Raises:
        DegenerateError: If D has zero spread
        RootNotBracketed: If the two-sided equation cannot be solved
    """
    _require_continuous(d)
    mu, sigma = _moments(d)
    if spec.side is Side.RIGHT:
        return float(d.sf(mu + sigma * _z_upper(spec.alpha)))
    if spec.side is Side.LEFT:
        return float(d.cdf(mu + sigma * _z_lower(spec.alpha)))
    return _solve_two_sided(d, spec.alpha)[0]


def classify_standard(d: PredictiveDistribution, spec: TestSpec) -> Classification:
    """Classify the size of the R* test as inflated, exact or conservative.

    For a right-sided test R* is inflated when the Gaussian quantile
    mu0 + sigma0 z_{1-alpha} lies below D^{-1}(1 - alpha). Left-sided tests
    mirror this; two-sided tests compare the two-sided rejection rate with
    alpha.
    """
    _require_continuous(d)
    mu, sigma = _moments(d)

    if spec.side is Side.TWO_SIDED:
        rate = two_sided_rejection_rate(d, spec.alpha)
        gap = rate - spec.alpha
        if abs(gap) <= EXACT_TOLERANCE:
            return Classification.EXACT
        return Classification.INFLATED if gap > 0 else Classification.CONSERVATIVE

    if spec.side is Side.RIGHT:
        gaussian = mu + sigma * _z_upper(spec.alpha)
        working = _upper_quantile(d, spec.alpha)
        # Inflated when the Gaussian cut-off is further in than D's.
        gap = working - gaussian
    else:
        gaussian = mu + sigma * _z_lower(spec.alpha)
        working = float(d.inv_cdf(spec.alpha))
        gap = gaussian - working

    if abs(gap) <= EXACT_TOLERANCE * max(1.0, abs(working)):
        return Classification.EXACT
    return Classification.INFLATED if gap > 0 else Classification.CONSERVATIVE


def _power_standard(
    f: PredictiveDistribution, mu: float, sigma: float, side: Side, alpha: float
) -> float:
    if side is Side.RIGHT:
        return float(f.sf(mu + sigma * _z_upper(alpha)))
    if side is Side.LEFT:
        return float(f.cdf(mu + sigma * _z_lower(alpha)))
    return float(f.sf(mu + sigma * _z_upper(alpha / 2.0))) + float(
        f.cdf(mu + sigma * _z_lower(alpha / 2.0))
    )


def power_standard(
    f: PredictiveDistribution, d: PredictiveDistribution, spec: TestSpec
) -> float:
    """Raw power of R* under truth F, not adjusted for its miscalibrated size.

    Right: 1 - F(mu0 + sigma0 z_{1-alpha}).

    Raises:
        DegenerateError: If D has zero spread
    """
    mu, sigma = _moments(d)
    return _power_standard(f, mu, sigma, spec.side, spec.alpha)


def power_percentile(
    f: PredictiveDistribution, d: PredictiveDistribution, spec: TestSpec
) -> float:
    """Power of the percentile residual test; right-sided it is 1 - F(D^{-1}(1 - alpha))."""
    _require_continuous(d)
    if spec.side is Side.RIGHT:
        return float(f.sf(d.isf(spec.alpha)))
    if spec.side is Side.LEFT:
        return float(f.cdf(d.inv_cdf(spec.alpha)))
    half = spec.alpha / 2.0
    return float(f.sf(d.isf(half))) + float(f.cdf(d.inv_cdf(half)))


def _calibrated_alpha(d: PredictiveDistribution, spec: TestSpec) -> float:
    mu, sigma = _moments(d)
    if spec.side is Side.RIGHT:
        return float(ndtr(-(_upper_quantile(d, spec.alpha) - mu) / sigma))
    if spec.side is Side.LEFT:
        return float(ndtr((float(d.inv_cdf(spec.alpha)) - mu) / sigma))
    return _solve_two_sided(d, spec.alpha)[0]


def calibrated_alpha(d: PredictiveDistribution, spec: TestSpec) -> float:
    """Nominal level at which the R* test has true size alpha under D.

    Right: alpha* = 1 - Phi_{mu0,sigma0}(D^{-1}(1 - alpha)); the left side
    mirrors it with alpha* = Phi_{mu0,sigma0}(D^{-1}(alpha)). Two-sided
    calibration solves the two-sided rejection equation for the nominal
    level whose rejection rate is alpha.
    """
    _require_continuous(d)
    return _calibrated_alpha(d, spec)


def empirical_calibrated_alpha(d: EmpiricalDistribution, spec: TestSpec) -> float:
    """Calibrated level for a draw set, plugging in sample moments and quantiles.

    Raises:
        DomainError: For two-sided tests, whose equation has no exact root
            under a step CDF
    """
    if spec.side is Side.TWO_SIDED:
        raise DomainError("Two-sided calibration needs a continuous distribution")
    return _calibrated_alpha(d, spec)


def power_star_calibrated(
    f: PredictiveDistribution, d: PredictiveDistribution, spec: TestSpec
) -> float:
    """Power of R* tested at the calibrated level."""
    mu, sigma = _moments(d)
    return _power_standard(f, mu, sigma, spec.side, calibrated_alpha(d, spec))


def rddag_law(
    f: PredictiveDistribution, d: PredictiveDistribution, r: float
) -> RddagLaw:
    """CDF and density of the percentile residual under truth F at the point r.

    G(r) = F(D^{-1}(Phi(r))) and g(r) = phi(r) f(x) / d(x) with
    x = D^{-1}(Phi(r)).

    Raises:
        DensityZero: If the working density vanishes at x
    """
    _require_continuous(d)
    _require_continuous(f, role="true")

    tail = float(ndtr(-abs(r)))
    if tail <= 0.0:
        return RddagLaw(1.0 if r > 0 else 0.0, 0.0)
    x = float(d.isf(tail)) if r > 0 else float(d.inv_cdf(tail))

    working_density = float(d.pdf(x))
    if not working_density > 0:
        raise DensityZero(f"Working density of {d!r} vanishes at {x}")
    density = float(std_normal_pdf(r)) * float(f.pdf(x)) / working_density
    return RddagLaw(float(f.cdf(x)), density)


def full_report(
    f: PredictiveDistribution, d: PredictiveDistribution, spec: TestSpec
) -> CalibrationReport:
    """Assemble size, calibration and power for one (F, D, test) triple.

    For one-sided tests the report is checked against two identities: the
    raw R* power sits above, at or below the percentile power exactly as
    its size is inflated, exact or conservative, and the calibrated R*
    power equals the percentile power.

    For two-sided tests ``effective_alpha`` is the root x of the two-sided
    equation, the nominal level at which R* rejects with probability alpha
    under D. The classification instead compares the two-sided rejection
    rate at the nominal alpha, the sum of both tails, with alpha. An
    inflated two-sided test therefore reports a root below alpha: for
    Exponential(1) at alpha = 0.05 the upper tail contributes about 0.052
    and the lower tail nothing, so the rate exceeds alpha while the root is
    about 0.046.

    Raises:
        InvariantViolation: If one of the identities fails
    """
    _require_continuous(d)
    mu, sigma = _moments(d)

    root_residual = None
    if spec.side is Side.TWO_SIDED:
        effective, root_residual = _solve_two_sided(d, spec.alpha)
        calibrated = effective
    else:
        effective = type1_error_standard(d, spec)
        calibrated = _calibrated_alpha(d, spec)

    classification = classify_standard(d, spec)
    pow_star_raw = power_standard(f, d, spec)
    pow_star_cal = _power_standard(f, mu, sigma, spec.side, calibrated)
    pow_ddag = power_percentile(f, d, spec)

    if spec.side is not Side.TWO_SIDED:
        _check_identities(spec, classification, effective, pow_star_raw, pow_star_cal, pow_ddag)

    return CalibrationReport(
        spec=spec,
        effective_alpha=effective,
        classification=classification,
        calibrated_alpha=calibrated,
        pow_star_raw=pow_star_raw,
        pow_star_calibrated=pow_star_cal,
        pow_ddag=pow_ddag,
        truth=f.to_dict(),
        working=d.to_dict(),
        root_residual=root_residual,
    )


def _check_identities(
    spec: TestSpec,
    classification: Classification,
    effective: float,
    pow_star_raw: float,
    pow_star_cal: float,
    pow_ddag: float,
) -> None:
    if abs(pow_star_cal - pow_ddag) > IDENTITY_TOLERANCE:
        raise InvariantViolation(
            f"Calibrated R* power {pow_star_cal} differs from R-ddag power {pow_ddag}"
        )

    size_gap = effective - spec.alpha
    power_gap = pow_star_raw - pow_ddag
    if classification is Classification.INFLATED:
        consistent = size_gap > -IDENTITY_TOLERANCE and power_gap > -IDENTITY_TOLERANCE
    elif classification is Classification.CONSERVATIVE:
        consistent = size_gap < IDENTITY_TOLERANCE and power_gap < IDENTITY_TOLERANCE
    else:
        consistent = abs(size_gap) <= IDENTITY_TOLERANCE and abs(power_gap) <= IDENTITY_TOLERANCE
    if not consistent:
        raise InvariantViolation(
            f"{classification.value} size does not match ordering: "
            f"size gap {size_gap:.3g}, power gap {power_gap:.3g}"
        )


def simulate_rejection_rate(
    f: PredictiveDistribution,
    d: PredictiveDistribution,
    spec: TestSpec,
    which: Which,
    n_draws: int,
    rng: np.random.Generator,
    level: float | None = None,
) -> MonteCarloEstimate:
    """Monte Carlo rejection rate of a residual test with data drawn from F.

    Args:
        f: True distribution the observations are drawn from
        d: Working distribution the residuals are computed under
        spec: Test side and nominal alpha
        which: Residual kind to test
        n_draws: Number of simulated observations
        rng: Random generator
        level: Nominal level to test at instead of spec.alpha, e.g. a
            calibrated level for R*

    Returns:
        Rejection fraction, its binomial standard error and the draw count
    """
    level = spec.alpha if level is None else level
    ys = np.asarray(f.sample(rng, size=n_draws), dtype=float)

    if Which(which) is Which.STAR:
        mu, sigma = _moments(d)
        residuals = (ys - mu) / sigma
    else:
        _, residuals, _ = percentile_residuals(ys, d, trunc_bound=np.inf)

    if spec.side is Side.RIGHT:
        rejected = residuals > _z_upper(level)
    elif spec.side is Side.LEFT:
        rejected = residuals < _z_lower(level)
    else:
        rejected = np.abs(residuals) > _z_upper(level / 2.0)

    rate = float(np.mean(rejected))
    return MonteCarloEstimate(rate, math.sqrt(rate * (1.0 - rate) / n_draws), n_draws)
