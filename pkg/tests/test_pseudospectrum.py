"""Pseudospectral fields, contours and areas against exact level sets."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spectral_reg.matrix_core import NearDefectiveError
from spectral_reg.pseudospectrum import (
    CHUNK, ContourSet, GridTooLargeError, contours, contours_svg, default_eps_schedule,
    limiting_overlap_estimate, polygon_area, pseudospectrum_area, smin_at, smin_field,
)
from spectral_reg.regions import Disk, Rect

J2 = np.array([[0, 1], [0, 0]], dtype=complex)
UPPER = np.array([[1, 1], [0, 2]], dtype=complex)


class TestSminField:
    @given(st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False), min_size=1, max_size=4))
    def test_normal_matrix_distance(self, diag):
        # for a normal matrix sigma_min(z - D) = dist(z, spectrum)
        z = np.array([0.3 + 0.1j, -2 + 2j, 4.5 - 1j])
        expected = np.min(np.abs(z[:, None] - np.array(diag)[None, :]), axis=1)
        np.testing.assert_allclose(smin_at(np.diag(diag), z), expected, atol=1e-12)

    def test_jordan2_closed_form(self):
        # sigma_min(z - J2)^2 = |z|^2 + 1/2 - sqrt(|z|^2 + 1/4)
        z = np.array([0.1, 0.5j, -1 + 1j, 2.0])
        r2 = np.abs(z) ** 2
        np.testing.assert_allclose(smin_at(J2, z), np.sqrt(r2 + 0.5 - np.sqrt(r2 + 0.25)), rtol=1e-10)

    def test_grid_includes_corners(self):
        f = smin_field(UPPER, Rect(-1 - 2j, 3 + 2j), 5, 7)
        assert f.values.shape == (5, 7)
        assert (f.xs[0], f.xs[-1], f.ys[0], f.ys[-1]) == (-1, 3, -2, 2)
        # node (2, 3) is z = 1, an eigenvalue
        assert f.values[2, 3] == pytest.approx(0.0, abs=1e-15)

    def test_worker_independence(self):
        r = np.random.default_rng(0)
        a = r.standard_normal((6, 6))
        z = r.standard_normal(3 * CHUNK + 17) + 1j * r.standard_normal(3 * CHUNK + 17)
        assert np.array_equal(smin_at(a, z, workers=1), smin_at(a, z, workers=3))

    def test_memory_guard(self):
        with pytest.raises(GridTooLargeError):
            smin_field(np.eye(50), Rect(-1 - 1j, 1 + 1j), 4000, 4000, memory_budget=1 << 20)

    @pytest.mark.parametrize("nx,ny,region", [(1, 5, Rect(0j, 1 + 1j)), (5, 5, Rect(0j, 1 + 0j))])
    def test_rejects_degenerate(self, nx, ny, region):
        with pytest.raises(ValueError):
            smin_field(UPPER, region, nx, ny)

    def test_csv_header_and_rows(self):
        text = smin_field(UPPER, Rect(0j, 1 + 1j), 2, 3).to_csv()
        lines = text.splitlines()
        assert lines[0] == "z_re,z_im,smin"
        assert len(lines) == 1 + 6


class TestContours:
    def _circle_field(self, n=201, half=1.0):
        # 1x1 zero matrix: sigma_min(z) = |z|, level sets are circles
        return smin_field(np.zeros((1, 1)), Rect(complex(-half, -half), complex(half, half)), n, n)

    @pytest.mark.parametrize("eps", [0.2, 0.5, 0.8])
    def test_circle_area(self, eps):
        cs = contours(self._circle_field(), [eps])
        assert len(cs.polylines[0]) == 1 and cs.is_closed(0, 0)
        assert polygon_area(cs.polylines[0][0]) == pytest.approx(math.pi * eps**2, rel=2e-3)

    def test_open_contour_at_boundary(self):
        cs = contours(self._circle_field(half=0.5), [0.6])
        assert cs.polylines[0] and not any(cs.is_closed(0, k) for k in range(len(cs.polylines[0])))

    def test_two_components(self):
        f = smin_field(np.diag([-1.0, 1.0]), Rect(-2 - 1j, 2 + 1j), 161, 81)
        cs = contours(f, [0.3])
        assert len(cs.polylines[0]) == 2
        for p in cs.polylines[0]:
            assert polygon_area(p) == pytest.approx(math.pi * 0.09, rel=5e-3)

    def test_matches_skimage(self):
        measure = pytest.importorskip("skimage.measure")
        f = smin_field(UPPER, Rect(-1 - 2j, 4 + 2j), 121, 97)
        ours = contours(f, [0.4]).polylines[0]
        theirs = measure.find_contours(f.values, 0.4)
        assert len(ours) == len(theirs)
        hx, hy = f.xs[1] - f.xs[0], f.ys[1] - f.ys[0]
        ours_area = sorted(polygon_area(p) for p in ours)
        theirs_area = sorted(polygon_area(np.c_[f.xs[0] + c[:, 0] * hx, f.ys[0] + c[:, 1] * hy]) for c in theirs)
        np.testing.assert_allclose(ours_area, theirs_area, rtol=1e-9)

    def test_rejects_nonpositive_level(self):
        with pytest.raises(ValueError):
            contours(self._circle_field(11), [0.0])

    def test_json_and_svg(self):
        f = self._circle_field(41)
        cs = contours(f, [0.3, 0.6])
        assert isinstance(cs, ContourSet)
        assert len(__import__("json").loads(cs.to_json())["polylines"]) == 2
        svg = contours_svg(cs, f, eigenvalues=np.array([0j]))
        assert svg.startswith("<svg") and svg.count("<path") == 2 and "<circle" in svg
        assert svg == contours_svg(cs, f, eigenvalues=np.array([0j]))


class TestArea:
    @pytest.mark.parametrize("eps", [1e-3, 0.05, 0.3])
    def test_scalar_disk(self, eps):
        area = pseudospectrum_area(np.array([[0.25j]]), eps, Disk(0j, 1.0))
        assert area == pytest.approx(math.pi * eps**2, rel=5e-3)

    @pytest.mark.parametrize("eps", [1e-3, 1e-2, 0.1])
    def test_jordan2_exact(self, eps):
        # Lambda_eps(J2) is the disk of radius sqrt(eps + eps^2), much wider than eps,
        # so a coarser cell (eps / 16) is still tiny against the radius
        area = pseudospectrum_area(J2, eps, Disk(0j, 2 * math.sqrt(eps + eps * eps)), resolution=16)
        assert area == pytest.approx(math.pi * (eps + eps * eps), rel=5e-3)

    def test_region_clips(self):
        # half of the disk around 0 lies in the right half-plane
        area = pseudospectrum_area(np.zeros((1, 1)), 0.1, Rect(-1j, 1 + 1j))
        assert area == pytest.approx(math.pi * 0.01 / 2, rel=1e-2)

    def test_empty(self):
        assert pseudospectrum_area(np.zeros((1, 1)), 0.1, Disk(5 + 0j, 1.0)) == 0.0

    @pytest.mark.parametrize("m,eps,region", [
        (UPPER, 0.05, Disk(1 + 0j, 0.3)),
        (UPPER, 0.2, Rect(0.5 - 0.5j, 2.6 + 0.4j)),
        (J2, 0.01, Disk(0.02 + 0.01j, 0.15)),
    ])
    def test_matches_brute_force_count(self, m, eps, region):
        # evaluate sigma_min at every cell center of the same lattice
        resolution = 8
        h = eps / resolution
        lo_re, hi_re, lo_im, hi_im = region.bounding_box()
        i = np.arange(math.floor(lo_re / h), math.ceil(hi_re / h))
        j = np.arange(math.floor(lo_im / h), math.ceil(hi_im / h))
        c = ((i[:, None] + 0.5) * h + 1j * (j[None, :] + 0.5) * h).ravel()
        c = c[region.contains(c)]
        expected = np.count_nonzero(smin_at(m, c) < eps) * h * h
        assert expected > 0
        assert pseudospectrum_area(m, eps, region, resolution=resolution) == expected


class TestLimitingArea:
    def test_upper_2x2_gives_overlap_sum(self):
        est = limiting_overlap_estimate(UPPER, Disk(0j, 3.0))
        assert est.converged
        assert est.value == pytest.approx(4.0, rel=0.05)

    def test_one_eigenvalue_inside(self):
        est = limiting_overlap_estimate(UPPER, Disk(2 + 0j, 0.5))
        assert est.value == pytest.approx(2.0, rel=0.05)

    def test_schedule_is_geometric_and_capped(self):
        sched = default_eps_schedule(UPPER, Disk(0j, 3.0))
        assert sched[0] == pytest.approx(0.1)
        np.testing.assert_allclose(np.array(sched[1:]) / np.array(sched[:-1]), 0.5)
        assert default_eps_schedule(UPPER, Disk(2 + 0j, 0.5))[0] == pytest.approx(0.05)

    def test_rejects_bad_schedule(self):
        with pytest.raises(ValueError):
            limiting_overlap_estimate(UPPER, Disk(0j, 3.0), eps_schedule=[0.01, 0.02])

    def test_defective_rejected(self):
        with pytest.raises(NearDefectiveError):
            limiting_overlap_estimate(J2, Disk(0j, 1.0))
