"""Scalar kernel tests. Frozen constants were computed independently with
30-digit mpmath arithmetic."""

import math

import numpy as np
import pytest

from decoybb84.errors import ConfigError
from decoybb84.numerics import (
    binary_entropy,
    entropy_comparison,
    hoeffding_delta,
    intensity_posterior,
    poisson_pmf,
    serfling_gamma,
    spiked_uniform_entropies,
    tau_m,
)

TWO_INTENSITIES = [(0.7, 0.5), (0.3, 0.1)]


class TestBinaryEntropy:
    def test_endpoints_and_truncation(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(0.5) == 1.0
        assert binary_entropy(0.7) == 1.0
        assert binary_entropy(1.0) == 1.0

    def test_closed_form_value(self):
        # mpmath: h(0.11) = 0.499915958164528
        assert binary_entropy(0.11) == pytest.approx(0.499915958164528, abs=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            binary_entropy(-1e-9)

    def test_mirror_symmetry_before_truncation(self):
        # The untruncated form is symmetric: evaluating the raw expression at
        # 1 - x reproduces h(x) for x <= 0.5.
        for x in np.linspace(0.01, 0.49, 25):
            mirrored = -(1 - x) * math.log2(1 - x) - x * math.log2(x)
            assert binary_entropy(x) == pytest.approx(mirrored, rel=1e-12)

    def test_non_decreasing_on_unit_interval(self):
        grid = [binary_entropy(x) for x in np.linspace(0.0, 1.0, 101)]
        assert all(b >= a - 1e-12 for a, b in zip(grid, grid[1:]))


class TestHoeffdingDelta:
    def test_worked_values(self):
        # sqrt(5e5 * ln 1e10) = 3393.07021220756
        assert hoeffding_delta(10**6, 1e-10) == pytest.approx(3393.07021220756, rel=1e-12)
        assert hoeffding_delta(10**8, 1e-10) == pytest.approx(33930.7021220756, rel=1e-12)
        assert hoeffding_delta(2, math.exp(-1)) == pytest.approx(1.0, rel=1e-12)

    def test_sqrt_scaling(self):
        assert hoeffding_delta(4 * 10**6, 1e-10) == pytest.approx(
            2 * hoeffding_delta(10**6, 1e-10), rel=1e-12
        )

    def test_monotone_in_n_and_inverse_eps(self):
        for n1, n2 in [(10, 20), (100, 101), (10**4, 10**6)]:
            assert hoeffding_delta(n2, 1e-5) > hoeffding_delta(n1, 1e-5)
        for e1, e2 in [(1e-3, 1e-4), (0.5, 0.1), (1e-9, 1e-12)]:
            assert hoeffding_delta(1000, e2) > hoeffding_delta(1000, e1)

    def test_domain_errors(self):
        for bad_n in (0, -1):
            with pytest.raises(ValueError):
                hoeffding_delta(bad_n, 0.5)
        for bad_eps in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                hoeffding_delta(10, bad_eps)


class TestSerflingGamma:
    def test_worked_values(self):
        # mpmath: gamma(1e-10, 1e5, 1e5) = 0.0214597675609265
        assert serfling_gamma(1e-10, 10**5, 10**5) == pytest.approx(
            0.0214597675609265, rel=1e-12
        )
        assert serfling_gamma(math.exp(-1), 1, 1) == pytest.approx(2.0, rel=1e-12)

    def test_strictly_decreasing_in_both_sample_sizes(self):
        a = 1e-10
        for b in [10, 100, 1000, 10**5]:
            for c in [10, 100, 1000, 10**5]:
                assert serfling_gamma(a, 2 * b, c) < serfling_gamma(a, b, c)
                assert serfling_gamma(a, b, 2 * c) < serfling_gamma(a, b, c)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            serfling_gamma(1e-10, 0, 10)
        with pytest.raises(ValueError):
            serfling_gamma(1e-10, 10, 0)
        with pytest.raises(ValueError):
            serfling_gamma(1.0, 10, 10)


class TestPoissonPmf:
    def test_vacuum_source(self):
        assert poisson_pmf(0.0, 0) == 1.0
        assert poisson_pmf(0.0, 3) == 0.0

    def test_worked_value(self):
        # 0.5 * exp(-0.5) = 0.303265329856317
        assert poisson_pmf(0.5, 1) == pytest.approx(0.303265329856317, rel=1e-12)

    def test_normalization(self):
        for k in (0.1, 0.5, 1.0, 5.0):
            total = math.fsum(poisson_pmf(k, m) for m in range(200))
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_log_space_tail_matches_exact_rational(self):
        # Exact big-integer oracle: e^-k k^m / m! with m! from math.factorial.
        for k, m in [(1.0, 25), (0.8, 40), (2.0, 60)]:
            exact = math.exp(-k) * k**m / math.factorial(m)
            assert poisson_pmf(k, m) == pytest.approx(exact, rel=1e-10)

    def test_negative_m_rejected(self):
        with pytest.raises(ValueError):
            poisson_pmf(0.5, -1)


class TestTauM:
    def test_worked_value(self):
        # 0.7 e^-0.5 + 0.3 e^-0.1 = 0.696022687209631
        assert tau_m(TWO_INTENSITIES, 0) == pytest.approx(0.696022687209631, rel=1e-12)

    def test_single_intensity_reduces_to_poisson(self):
        for m in range(6):
            assert tau_m([(1.0, 0.4)], m) == pytest.approx(poisson_pmf(0.4, m), rel=1e-14)

    def test_total_probability(self):
        total = math.fsum(tau_m(TWO_INTENSITIES, m) for m in range(100))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_probability_sum_violation(self):
        with pytest.raises(ConfigError):
            tau_m([(0.7, 0.5), (0.2, 0.1)], 0)


class TestIntensityPosterior:
    def test_single_intensity(self):
        assert intensity_posterior([(1.0, 0.4)], 3, 0.4) == pytest.approx(1.0, rel=1e-14)

    def test_worked_value(self):
        # 0.7 e^-0.5 / tau_0 = 0.609996584308133
        assert intensity_posterior(TWO_INTENSITIES, 0, 0.5) == pytest.approx(
            0.609996584308133, rel=1e-12
        )

    @pytest.mark.parametrize(
        "intensities",
        [TWO_INTENSITIES, [(0.6, 0.6), (0.25, 0.2), (0.15, 0.05)]],
    )
    def test_posteriors_normalize_for_all_m(self, intensities):
        for m in range(21):
            total = math.fsum(intensity_posterior(intensities, m, k) for _, k in intensities)
            assert abs(total - 1.0) <= 1e-12

    def test_degenerate_tau_rejected(self):
        with pytest.raises(ValueError):
            intensity_posterior([(1.0, 0.0)], 1, 0.0)

    def test_unknown_intensity_rejected(self):
        with pytest.raises(ValueError):
            intensity_posterior(TWO_INTENSITIES, 0, 0.25)


class TestEntropyComparison:
    def test_uniform(self):
        shannon, h_min = entropy_comparison([1 / 16] * 16)
        assert shannon == pytest.approx(4.0, abs=1e-12)
        assert h_min == pytest.approx(4.0, abs=1e-12)

    def test_point_mass(self):
        assert entropy_comparison([1.0]) == (0.0, 0.0)

    def test_min_entropy_never_exceeds_shannon(self, rng):
        for _ in range(50):
            raw = rng.random(rng.integers(2, 40))
            dist = raw / raw.sum()
            shannon, h_min = entropy_comparison(dist.tolist())
            assert h_min <= shannon + 1e-12

    def test_validation(self):
        with pytest.raises(ValueError):
            entropy_comparison([0.5, 0.4])
        with pytest.raises(ValueError):
            entropy_comparison([1.2, -0.2])


class TestSpikedUniform:
    def test_matches_materialized_distribution(self):
        n = 4096
        dist = [0.5] + [0.5 / (n - 1)] * (n - 1)
        expected = entropy_comparison(dist)
        analytic = spiked_uniform_entropies(0.5, n)
        assert analytic[0] == pytest.approx(expected[0], rel=1e-12)
        assert analytic[1] == pytest.approx(expected[1], rel=1e-12)

    def test_half_mass_over_64_bit_support(self):
        shannon, h_min = spiked_uniform_entropies(0.5, 2.0**64)
        assert shannon == pytest.approx(33.0, abs=1e-9)
        assert h_min == 1.0
