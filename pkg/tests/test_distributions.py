# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Tests for the distributions module."""

import math

import numpy as np
import pytest
from scipy import stats

from residkit.distributions import (
    PARAMETRIC_KINDS,
    EmpiricalDistribution,
    ParametricDistribution,
    PointMassDistribution,
    PredictiveDistribution,
    canonical_round,
    make_distribution,
    std_normal_quantile,
)
from residkit.errors import DomainError

CONTINUOUS = [
    make_distribution("Normal", mu=1.5, sigma=2.0),
    make_distribution("LogNormal", mu_log=0.2, sigma_log=0.7),
    make_distribution("Beta", a=2.0, b=3.0),
    make_distribution("Gamma", shape=2.5, rate=1.5),
    make_distribution("Exponential", rate=1.0),
    make_distribution("Uniform", lo=-1.0, hi=3.0),
]

DISCRETE = [
    make_distribution("Bernoulli", p=0.3),
    make_distribution("Binomial", n=5, p=0.4),
    make_distribution("Poisson", lam=3.0),
    PointMassDistribution(2.0),
    EmpiricalDistribution([1, 1, 2, 3, 3, 3]),
]


def test_cdf_normal_median():
    """Test the standard normal CDF at zero."""
    assert make_distribution("Normal", mu=0, sigma=1).cdf(0.0) == pytest.approx(0.5)


def test_cdf_beta_one_one_is_uniform():
    """Test that Beta(1, 1) has the uniform CDF."""
    assert make_distribution("Beta", a=1, b=1).cdf(0.3) == pytest.approx(0.3)


def test_cdf_exponential_median():
    """Test the Exponential(1) CDF at its median."""
    assert make_distribution("Exponential", rate=1).cdf(math.log(2)) == pytest.approx(0.5)


def test_cdf_vectorized_input_returns_array():
    """Test that array input gives array output."""
    d = make_distribution("Normal", mu=0, sigma=1)
    values = d.cdf(np.array([-1.0, 0.0, 1.0]))

    assert isinstance(values, np.ndarray)
    assert values == pytest.approx([stats.norm.cdf(-1), 0.5, stats.norm.cdf(1)])


def test_sf_keeps_precision_in_upper_tail():
    """Test that the survival function does not round to zero far out."""
    d = make_distribution("Normal", mu=0, sigma=1)
    assert d.sf(10.0) == pytest.approx(7.619853e-24, rel=1e-6)


@pytest.mark.parametrize("d", CONTINUOUS + DISCRETE, ids=repr)
def test_cdf_is_nondecreasing(d):
    """Test the CDF on a sorted grid of 10^4 points."""
    grid = np.linspace(-5.0, 25.0, 10_000)
    values = np.asarray(d.cdf(grid))

    assert np.all(np.diff(values) >= 0.0)
    assert values[0] >= 0.0
    assert values[-1] <= 1.0


def test_inv_cdf_uniform_identity():
    """Test the Uniform(0, 1) quantile function."""
    assert make_distribution("Uniform", lo=0, hi=1).inv_cdf(0.25) == pytest.approx(0.25)


def test_inv_cdf_exponential_closed_form():
    """Test the Exponential quantile against -log(1 - u)."""
    d = make_distribution("Exponential", rate=1)
    assert d.inv_cdf(0.95) == pytest.approx(-math.log(0.05), rel=1e-12)


def test_empirical_generalized_inverse():
    """Test that the Empirical quantile is the smallest draw reaching u."""
    assert EmpiricalDistribution([1, 2, 3, 4]).inv_cdf(0.5) == 2.0


def test_empirical_inverse_matches_exhaustive_scan():
    """Test the Empirical quantile against a scan of its draws."""
    d = EmpiricalDistribution([3.0, 1.0, 2.0, 2.0, 5.0])
    for u in np.linspace(0.0, 1.0, 41):
        expected = min(y for y in d.draws if d.cdf(y) >= u)
        assert d.inv_cdf(u) == expected


def test_empirical_inverse_is_consistent_with_cdf():
    """Test cdf(inv_cdf(u)) >= u with nothing smaller reaching u."""
    rng = np.random.default_rng(17)
    d = EmpiricalDistribution(rng.normal(size=500).round(2))
    for u in rng.uniform(size=200):
        q = d.inv_cdf(u)
        assert d.cdf(q) >= u
        below = d.draws[d.draws < q]
        if below.size:
            assert d.cdf(below[-1]) < u


def test_empirical_cdf_converges_to_parametric():
    """Test that 10^5 draws give an Empirical CDF within 0.01 of the source law."""
    source = make_distribution("Gamma", shape=2.0, rate=1.0)
    d = EmpiricalDistribution(source.sample(np.random.default_rng(3), size=100_000))
    grid = np.concatenate([d.draws, np.linspace(0.0, 15.0, 1_000)])

    distance = np.max(np.abs(np.asarray(d.cdf(grid)) - np.asarray(source.cdf(grid))))
    assert distance < 0.01


@pytest.mark.parametrize("d", CONTINUOUS, ids=repr)
def test_inv_cdf_round_trip(d):
    """Test cdf(inv_cdf(u)) = u for continuous kinds."""
    for u in [0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99]:
        assert d.cdf(d.inv_cdf(u)) == pytest.approx(u, abs=1e-8)


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
def test_continuous_inv_cdf_rejects_boundary(u):
    """Test that continuous quantiles need u strictly inside (0, 1)."""
    with pytest.raises(DomainError):
        make_distribution("Normal", mu=0, sigma=1).inv_cdf(u)


def test_discrete_inv_cdf_accepts_closed_interval():
    """Test that discrete quantiles accept u = 0."""
    d = make_distribution("Poisson", lam=2.0)
    assert d.inv_cdf(0.0) == 0.0
    assert d.inv_cdf(0.5) == 2.0


def test_isf_matches_inverse_of_complement():
    """Test isf(p) against inv_cdf(1 - p)."""
    d = make_distribution("Gamma", shape=2.0, rate=1.0)
    assert d.isf(0.05) == pytest.approx(d.inv_cdf(0.95), rel=1e-10)


def test_point_mass_bernoulli():
    """Test the Bernoulli atom at one."""
    assert make_distribution("Bernoulli", p=0.5).point_mass(1) == pytest.approx(0.5)


def test_point_mass_of_point_mass():
    """Test that a point mass puts everything on its location."""
    assert PointMassDistribution(3.0).point_mass(3.0) == 1.0


def test_point_mass_empirical_ties():
    """Test that tied draws add up."""
    assert EmpiricalDistribution([1, 1, 2, 4]).point_mass(1.0) == pytest.approx(0.5)


def test_continuous_kinds_have_no_atoms():
    """Test that continuous kinds report zero point mass."""
    assert make_distribution("Normal", mu=0, sigma=1).point_mass(0.0) == 0.0


def test_empirical_ties_after_rounding():
    """Test that float noise does not break tie detection."""
    d = EmpiricalDistribution([0.1 + 0.2, 0.5])
    assert d.point_mass(0.3) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "d, support",
    [
        (make_distribution("Bernoulli", p=0.3), range(2)),
        (make_distribution("Binomial", n=1, p=0.5), range(2)),
        (make_distribution("Binomial", n=7, p=0.35), range(8)),
        (make_distribution("Binomial", n=20, p=0.9), range(21)),
        (make_distribution("Poisson", lam=3.0), range(60)),
    ],
    ids=repr,
)
def test_point_masses_sum_to_one(d, support):
    """Test that atoms over the (truncated) support sum to one."""
    total = float(np.sum(d.point_mass(np.array(list(support), dtype=float))))
    assert total == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("d", DISCRETE, ids=repr)
def test_discrete_kinds(d):
    """Test that atom-bearing kinds are discrete with pr(Y < y) >= 0."""
    assert d.discrete
    for y in [0.0, 1.0, 2.0, 3.0]:
        assert d.cdf(y) - d.point_mass(y) >= -1e-15


@pytest.mark.parametrize("d", CONTINUOUS, ids=repr)
def test_continuous_kinds_are_not_discrete(d):
    """Test the discrete flag of continuous kinds."""
    assert not d.discrete


def test_mean_sd_beta():
    """Test Beta(2, 3) moments."""
    mu, sd = make_distribution("Beta", a=2, b=3).mean_sd()
    assert mu == pytest.approx(0.4)
    assert sd == pytest.approx(0.2)


def test_mean_sd_point_mass():
    """Test that a point mass has zero spread."""
    assert PointMassDistribution(5.0).mean_sd() == (5.0, 0.0)


def test_mean_sd_empirical_uses_sample_divisor():
    """Test the n - 1 divisor of the Empirical sd."""
    mu, sd = EmpiricalDistribution([1, 2, 3]).mean_sd()
    assert mu == pytest.approx(2.0)
    assert sd == pytest.approx(1.0)


def test_mean_sd_gamma_rate_parameterization():
    """Test that Gamma takes a rate, not a scale."""
    mu, sd = make_distribution("Gamma", shape=4.0, rate=2.0).mean_sd()
    assert mu == pytest.approx(2.0)
    assert sd == pytest.approx(1.0)


def test_sample_point_mass_returns_location():
    """Test sampling a point mass."""
    rng = np.random.default_rng(7)
    assert PointMassDistribution(3.0).sample(rng) == 3.0


def test_sample_normal_mean():
    """Test the mean of 10^6 standard normal draws."""
    rng = np.random.default_rng(1)
    draws = make_distribution("Normal", mu=0, sigma=1).sample(rng, size=1_000_000)
    assert abs(draws.mean()) < 0.005


def test_sample_uniform_ks():
    """Test uniform draws with a KS distance."""
    rng = np.random.default_rng(2)
    draws = make_distribution("Uniform", lo=0, hi=1).sample(rng, size=1_000_000)
    assert stats.kstest(draws, "uniform").statistic < 0.002


def test_same_seed_same_draws():
    """Test that equal seeds give equal draws."""
    d = make_distribution("Gamma", shape=2.0, rate=3.0)
    first = d.sample(np.random.default_rng(11), size=5)
    second = d.sample(np.random.default_rng(11), size=5)
    assert np.array_equal(first, second)


@pytest.mark.parametrize(
    "u, expected",
    [(0.5, 0.0), (0.975, 1.959963984540054), (0.95, 1.6448536269514722)],
)
def test_std_normal_quantile_known_values(u, expected):
    """Test standard normal quantiles at familiar levels."""
    assert std_normal_quantile(u) == pytest.approx(expected, abs=1e-12)


def test_std_normal_quantile_inverts_cdf():
    """Test Phi^-1(Phi(x)) = x where Phi(x) is not rounded toward one."""
    x = np.linspace(-6.0, 5.0, 111)
    assert std_normal_quantile(stats.norm.cdf(x)) == pytest.approx(x, abs=1e-9)


@pytest.mark.parametrize("u", [0.0, 1.0, 2.0])
def test_std_normal_quantile_domain(u):
    """Test that the quantile needs 0 < u < 1."""
    with pytest.raises(DomainError):
        std_normal_quantile(u)


def test_every_parametric_kind_is_registered():
    """Test the list of parametric families."""
    assert set(PARAMETRIC_KINDS) == {
        "Normal",
        "LogNormal",
        "Beta",
        "Gamma",
        "Exponential",
        "Uniform",
        "Bernoulli",
        "Binomial",
        "Poisson",
    }


def test_unknown_kind():
    """Test make_distribution with a family residkit does not have."""
    with pytest.raises(DomainError, match="Unknown distribution kind"):
        make_distribution("Cauchy", loc=0, scale=1)


def test_missing_parameter():
    """Test make_distribution with a parameter left out."""
    with pytest.raises(DomainError, match="missing"):
        make_distribution("Normal", mu=0)


def test_non_positive_sigma():
    """Test that sigma must be positive."""
    with pytest.raises(DomainError):
        make_distribution("Normal", mu=0, sigma=0)


def test_uniform_bounds():
    """Test that Uniform needs lo < hi."""
    with pytest.raises(DomainError):
        make_distribution("Uniform", lo=1, hi=1)


def test_empirical_needs_two_draws():
    """Test Empirical with a single draw."""
    with pytest.raises(DomainError):
        EmpiricalDistribution([1.0])


def test_empirical_rejects_nan():
    """Test Empirical with a non-finite draw."""
    with pytest.raises(DomainError):
        EmpiricalDistribution([1.0, math.nan])


def test_empirical_draws_are_read_only():
    """Test that stored draws cannot be modified."""
    d = EmpiricalDistribution([2.0, 1.0])
    with pytest.raises(ValueError):
        d.draws[0] = 5.0


@pytest.mark.parametrize(
    "spec",
    [
        {"kind": "Normal", "params": {"mu": 0.0, "sigma": 1.0}},
        {"kind": "Binomial", "params": {"n": 4.0, "p": 0.25}},
        {"kind": "PointMass", "params": {"c": 3.0}},
        {"kind": "Empirical", "draws": [1.0, 2.0, 2.0]},
    ],
)
def test_descriptor(spec):
    """Test building a distribution from its JSON descriptor."""
    d = PredictiveDistribution.from_dict(spec)
    assert d.to_dict() == spec
    assert d == PredictiveDistribution.from_dict(d.to_dict())


def test_descriptor_needs_kind():
    """Test a descriptor without a kind."""
    with pytest.raises(DomainError):
        PredictiveDistribution.from_dict({"params": {}})


def test_repr():
    """Test the short text form of distributions."""
    assert repr(ParametricDistribution("Exponential", rate=1)) == "Exponential(rate=1.0)"
    assert repr(EmpiricalDistribution([1, 2, 3])) == "Empirical(n=3)"


def test_canonical_round_collapses_float_noise():
    """Test that 0.1 + 0.2 and 0.3 round to the same value."""
    assert canonical_round(0.1 + 0.2)[0] == canonical_round(0.3)[0]
    assert canonical_round(0.0)[0] == 0.0
