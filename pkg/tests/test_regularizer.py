import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from spectral_reg.conditioning import kappa_V
from spectral_reg.ensembles import RngSpec
from spectral_reg.matrix_core import operator_norm
from spectral_reg.regions import Disk
from spectral_reg.regularizer import (
    bulk_overlap_profile, davies_tradeoff, jordan_block, jordan_scan, optimize_st, regularize,
    st_constraint, theorem_a_bound, verify_theorem_b,
)


class TestConstants:
    def test_optimum_values(self):
        opt = optimize_st()
        assert opt.t == pytest.approx(3.7487, abs=1e-3)
        assert opt.objective == pytest.approx(3.8822, abs=1e-3)
        assert opt.objective == pytest.approx(opt.t * math.sqrt(opt.s))

    def test_constraint_strict(self):
        opt = optimize_st()
        assert st_constraint(opt.t, opt.s) < 1

    def test_independent_oracle(self):
        # stationarity of t sqrt(s(t)) solved by root finding on the derivative
        def s_of(t):
            return 1 / (1 - 2 * math.exp(-4 * (t - 2 * math.sqrt(2)) ** 2))

        def dobj(t, h=1e-6):
            f = lambda x: x * math.sqrt(s_of(x))
            return (f(t + h) - f(t - h)) / (2 * h)

        t_star = brentq(dobj, 3.3, 4.5, xtol=1e-12)
        assert optimize_st().t == pytest.approx(t_star, abs=1e-6)

    @given(st.floats(3.3, 6.0))
    def test_optimum_is_minimal(self, t):
        s = 1 / (1 - 2 * math.exp(-4 * (t - 2 * math.sqrt(2)) ** 2))
        if s <= 0:
            return
        assert t * math.sqrt(s) >= optimize_st().objective - 1e-9

    @pytest.mark.parametrize("n,delta,expected", [(1, 0.5, 12.0), (4, 0.1, 352.0), (10, 0.1, 4 * 10**1.5 * 11)])
    def test_theorem_a_bound(self, n, delta, expected):
        assert theorem_a_bound(n, delta) == pytest.approx(expected)


class TestRegularize:
    def test_jordan10_certified(self):
        j = jordan_block(10)
        res = regularize(j, 0.1, 100, RngSpec(1))
        assert res.certified
        assert res.norm_E <= 0.1 * operator_norm(j)
        assert res.kappa_V_after <= theorem_a_bound(10, 0.1)
        # the reported kappa matches an independent recomputation
        assert kappa_V(j + res.E).kappa_V_unit_columns == pytest.approx(res.kappa_V_after, rel=1e-6)

    def test_deterministic(self):
        a = regularize(jordan_block(5), 0.2, 10, RngSpec(3))
        b = regularize(jordan_block(5), 0.2, 10, RngSpec(3))
        assert np.array_equal(a.E, b.E) and a.attempts_used == b.attempts_used

    def test_scale_invariance(self):
        # A and 5A use the same normalized draws
        a = regularize(jordan_block(4), 0.3, 10, RngSpec(2))
        b = regularize(5 * jordan_block(4), 0.3, 10, RngSpec(2))
        np.testing.assert_allclose(b.E, 5 * a.E, rtol=1e-12)
        assert b.norm_E <= 0.3 * 5

    def test_zero_matrix_absolute_budget(self):
        res = regularize(np.zeros((3, 3)), 0.5, 20, RngSpec(0))
        assert res.scale == 1.0 and res.norm_E < 0.5

    @pytest.mark.parametrize("delta", [0.0, 1.0, 1.5, -0.1])
    def test_delta_domain(self, delta):
        with pytest.raises(ValueError):
            regularize(np.eye(2), delta, 10, RngSpec(0))

    def test_attempts_domain(self):
        with pytest.raises(ValueError):
            regularize(np.eye(2), 0.5, 0, RngSpec(0))

    def test_to_dict_fields(self):
        d = regularize(jordan_block(3), 0.5, 5, RngSpec(0)).to_dict()
        assert {"certificate", "certified", "within_bound", "kappa_V_after", "norm_E"} <= set(d)


class TestDavies:
    def test_tradeoff_bound(self):
        res = davies_tradeoff(jordan_block(6), 1e-4, RngSpec(4))
        assert res.delta == pytest.approx(2 * 6**0.75 * 1e-2)
        assert res.within_bound
        assert res.bound == pytest.approx(8 * 6**1.5 * 1e-2)

    def test_delta_clamped_below_one(self):
        res = davies_tradeoff(jordan_block(8), 0.5, RngSpec(0), max_attempts=5)
        assert res.delta < 1

    def test_requires_unit_norm(self):
        with pytest.raises(ValueError):
            davies_tradeoff(2 * np.eye(2), 1e-3, RngSpec(0))


class TestMonteCarlo:
    def test_theorem_b_zero_matrix(self):
        rep = verify_theorem_b(np.zeros((4, 4)), 0.5, Disk(0j, 2.0), 1000, RngSpec(1))
        assert rep.passed
        assert rep.bound == pytest.approx(16 * 4 / 0.25)
        assert rep.lower <= rep.mean <= rep.upper

    def test_theorem_b_delta_domain(self):
        with pytest.raises(ValueError):
            verify_theorem_b(np.eye(2), 1.2, Disk(0j, 2.0), 10, RngSpec(0))

    def test_jordan_scan_shape(self):
        scan = jordan_scan(3, [1e-1, 1e-2, 1e-3], 20, RngSpec(2))
        assert len(scan.min_kappa) == 3
        assert all(m <= med for m, med in zip(scan.min_kappa, scan.median_kappa))
        assert scan.min_kappa[0] < scan.min_kappa[-1]
        np.testing.assert_allclose(scan.davies_upper, [2 / d ** (2 / 3) for d in scan.deltas])

    def test_jordan_scan_rejects_n1(self):
        with pytest.raises(ValueError):
            jordan_scan(1, [0.1], 5, RngSpec(0))

    def test_bulk_profile_small(self):
        prof = bulk_overlap_profile(10, 30, [0.0, 0.5, 1.0, 2.0], RngSpec(3))
        assert sum(prof.counts) <= 300
        assert prof.theory == pytest.approx([1 - 0.25**2, 1 - 0.75**2, 1 - 1.5**2])
        # every eigenvalue has kappa >= 1, so the total is at least n / n^2
        assert prof.total_over_n2 >= 0.1
