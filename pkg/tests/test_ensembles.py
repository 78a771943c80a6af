import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spectral_reg.ensembles import (
    BLOCK, RngSpec, blocks, sample_complex_ginibre, sample_real_ginibre, singular_value_samples,
    smin_cdf_exact, smin_samples, verify_s1_tail, verify_small_ball, verify_smin_law, verify_sst_real,
    wilson_interval,
)


class TestRngSpec:
    @pytest.mark.parametrize("seed,stream", [(-1, 0), (2**64, 0), (0, -3), (1.5, 0)])
    def test_rejects(self, seed, stream):
        with pytest.raises(ValueError):
            RngSpec(seed, stream)

    def test_reproducible(self):
        a = RngSpec(42, 3).generator(7).standard_normal(5)
        b = RngSpec(42, 3).generator(7).standard_normal(5)
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("other", [RngSpec(42, 4), RngSpec(43, 3)])
    def test_streams_differ(self, other):
        a = RngSpec(42, 3).generator(7).standard_normal(5)
        assert not np.array_equal(a, other.generator(7).standard_normal(5))
        assert not np.array_equal(a, RngSpec(42, 3).generator(8).standard_normal(5))

    def test_child(self):
        assert RngSpec(5, 1).child(9) == RngSpec(5, 9)

    def test_philox(self):
        assert isinstance(RngSpec(1).generator().bit_generator, np.random.Philox)


class TestGinibre:
    @pytest.mark.parametrize("n", [1, 4, 16])
    def test_entry_variance(self, n):
        g = sample_complex_ginibre(n, RngSpec(n).generator(), size=4000)
        # real and imaginary parts each have variance 1/(2n)
        assert np.var(g.real) == pytest.approx(1 / (2 * n), rel=0.05)
        assert np.var(g.imag) == pytest.approx(1 / (2 * n), rel=0.05)
        assert abs(np.mean(g.real * g.imag)) < 5 / (2 * n) / math.sqrt(g.size)

    def test_real_variance_and_dtype(self):
        g = sample_real_ginibre(8, RngSpec(0).generator(), size=2000)
        assert g.dtype == np.complex128 and not np.any(g.imag)
        assert np.var(g.real) == pytest.approx(1 / 8, rel=0.05)

    def test_consumption_order(self):
        # the batch equals consecutive single draws from the same generator
        batch = sample_complex_ginibre(3, RngSpec(9).generator(), size=2)
        g = RngSpec(9).generator()
        singles = [sample_complex_ginibre(3, g) for _ in range(2)]
        assert np.array_equal(batch, np.stack(singles))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sample_complex_ginibre(0, RngSpec(0).generator())


class TestBlocks:
    @given(st.integers(0, 5 * BLOCK + 3))
    def test_cover(self, trials):
        parts = list(blocks(trials))
        assert sum(c for _, c in parts) == trials
        assert [b for b, _ in parts] == list(range(len(parts)))
        assert all(c == BLOCK for _, c in parts[:-1])

    def test_prefix_stable(self):
        # the first 1000 trials are the same whatever the total
        a = smin_samples(np.zeros((3, 3)), 1.0, 1000, RngSpec(1))
        b = smin_samples(np.zeros((3, 3)), 1.0, 2500, RngSpec(1))
        assert np.array_equal(a, b[:1000])


class TestLaws:
    @pytest.mark.parametrize("n,eps,expected", [(1, 1.0, 1 - math.exp(-1)), (2, 0.5, 1 - math.exp(-1)),
                                                (10, 0.01, 1 - math.exp(-0.01)), (3, 0.0, 0.0)])
    def test_smin_cdf_values(self, n, eps, expected):
        assert smin_cdf_exact(n, eps) == pytest.approx(expected, rel=1e-14)

    def test_smin_cdf_rejects_negative(self):
        with pytest.raises(ValueError):
            smin_cdf_exact(2, -0.1)

    def test_n1_is_exponential_modulus(self):
        # n = 1: |g|^2 is exponential with mean 1
        s = smin_samples(np.zeros((1, 1)), 1.0, 20000, RngSpec(3))
        assert np.mean(s**2) == pytest.approx(1.0, rel=0.03)


class TestWilson:
    @pytest.mark.parametrize("k,n", [(0, 100), (5, 100), (50, 100), (100, 100), (123, 100000)])
    def test_against_statsmodels(self, k, n):
        proportion = pytest.importorskip("statsmodels.stats.proportion")
        lo, hi = proportion.proportion_confint(k, n, alpha=0.01, method="wilson")
        ours = wilson_interval(k, n)
        assert float(ours[0]) == pytest.approx(lo, abs=1e-12)
        assert float(ours[1]) == pytest.approx(hi, abs=1e-12)

    @given(st.integers(1, 10**6), st.data())
    def test_contains_point_estimate(self, trials, data):
        k = data.draw(st.integers(0, trials))
        lo, hi = wilson_interval(k, trials)
        assert 0 <= lo <= k / trials <= hi <= 1


class TestVerifiers:
    def test_smin_law_passes(self):
        rep = verify_smin_law(3, np.linspace(0.05, 0.6, 6), 5000, RngSpec(4))
        assert rep.passed and rep.kind == "exact" and rep.trials == 5000
        assert "PASS" in rep.table()

    def test_smin_law_detects_wrong_n(self):
        # samples from n = 3 compared with the n = 3 law, but a grid scaled as if n were 1:
        # the theoretical values are off by a factor 9 in the exponent and must fail
        rep = verify_smin_law(3, np.linspace(0.05, 0.6, 6), 5000, RngSpec(4))
        wrong = 1 - np.exp(-np.asarray(rep.grid) ** 2)
        assert not np.all((np.asarray(rep.lower) <= wrong) & (wrong <= np.asarray(rep.upper)))

    def test_s1_tail(self):
        rep = verify_s1_tail(4, [0.0, 0.25, 0.5], 2000, RngSpec(5))
        assert rep.passed and rep.kind == "upper"
        assert 1.0 < rep.extra["mean_s1"] < 2 * math.sqrt(2)

    def test_small_ball(self):
        rep = verify_small_ball(np.diag([1, 2, 3]), 0.5, [0.01, 0.05], 2000, RngSpec(6))
        assert rep.passed
        np.testing.assert_allclose(rep.theoretical, [9 * 1e-4 / 0.25, 9 * 25e-4 / 0.25])

    def test_sst_real_requires_real(self):
        with pytest.raises(ValueError):
            verify_sst_real(np.eye(2) * 1j, [0.1], 1000, RngSpec(0))

    def test_minimum_trials(self):
        with pytest.raises(ValueError):
            verify_smin_law(2, [0.1], 999, RngSpec(0))

    def test_json_roundtrip(self):
        rep = verify_sst_real(np.zeros((2, 2)), [0.05, 0.1], 1000, RngSpec(8))
        import json
        assert json.loads(rep.to_json())["counts"] == rep.counts

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            singular_value_samples(np.eye(2), 1.0, 10, RngSpec(0), kind="quaternion")
