import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spectral_reg.conditioning import kappa_V, overlap_sum_in_region, report_from_spectral
from spectral_reg.matrix_core import NearDefectiveError, eig
from spectral_reg.regions import Disk, Rect


class TestKappaV:
    def test_upper_2x2_closed_form(self):
        # V = [[1, 1/sqrt2], [0, 1/sqrt2]]: kappa = sqrt((1 + 1/sqrt2) / (1 - 1/sqrt2)) = 1 + sqrt2
        rep = kappa_V([[1, 1], [0, 2]])
        assert rep.kappa_V_unit_columns == pytest.approx(1 + math.sqrt(2), rel=1e-12)
        assert rep.overlap_sum == pytest.approx(4.0, rel=1e-12)
        assert rep.lemma_bound == pytest.approx(math.sqrt(8), rel=1e-12)

    def test_normal_is_one(self):
        rep = kappa_V(np.diag([1, 1j, -2, 3]))
        assert rep.kappa_V_unit_columns == pytest.approx(1.0)
        assert rep.overlap_sum == pytest.approx(4.0)

    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_lemma_bound_holds(self, n, seed):
        r = np.random.default_rng(seed)
        a = r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))
        try:
            rep = kappa_V(a)
        except NearDefectiveError:
            return
        assert rep.kappa_V_unit_columns <= rep.lemma_bound * (1 + 1e-9)
        assert rep.overlap_sum >= n - 1e-9

    def test_to_dict(self):
        d = kappa_V(np.eye(2) + np.diag([0, 1])).to_dict()
        assert set(d) == {"kappa_V_unit_columns", "overlap_sum", "lemma_bound", "n"}


class TestOverlapSum:
    def test_region_selects(self):
        m = [[1, 1], [0, 2]]
        assert overlap_sum_in_region(m, Disk(0j, 3)) == pytest.approx(4.0)
        assert overlap_sum_in_region(m, Disk(0j, 1.5)) == pytest.approx(2.0)
        assert overlap_sum_in_region(m, Rect(1.5 - 1j, 3 + 1j)) == pytest.approx(2.0)

    def test_boundary_excluded(self):
        assert overlap_sum_in_region(np.diag([1.0, 0.0]), Disk(0j, 1.0)) == pytest.approx(1.0)

    def test_reuses_spectral(self):
        sd = eig([[1, 1], [0, 2]])
        assert overlap_sum_in_region(None, Disk(0j, 3), spectral=sd) == report_from_spectral(sd).overlap_sum
