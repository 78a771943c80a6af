"""Dense kernels checked against closed forms and a characteristic-polynomial oracle."""
import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from spectral_reg.matrix_core import (
    MatrixError, NearDefectiveError, as_cmatrix, eig, gap_tolerance, load_matrix, matrix_from_json,
    matrix_from_text, matrix_to_json, matrix_to_text, operator_norm, resolvent_smin, save_matrix, svd,
    singular_values,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def cmatrices(max_n=5):
    return st.integers(1, max_n).flatmap(
        lambda n: st.tuples(arrays(float, (n, n), elements=finite), arrays(float, (n, n), elements=finite))
    ).map(lambda p: p[0] + 1j * p[1])


def charpoly_singular_values(a):
    """Singular values of a 3x3 matrix from the cubic characteristic polynomial of A*A."""
    h = a.conj().T @ a
    c2 = np.trace(h).real
    c1 = sum(np.linalg.det(h[np.ix_(idx, idx)]).real for idx in ([0, 1], [0, 2], [1, 2]))
    c0 = np.linalg.det(h).real
    roots = np.roots([1.0, -c2, c1, -c0]).real
    return np.sqrt(np.sort(np.clip(roots, 0, None))[::-1])


class TestValidation:
    def test_scalar_promoted(self):
        assert as_cmatrix(3.0).shape == (1, 1)

    @pytest.mark.parametrize("bad", [np.zeros((2, 3)), np.zeros((0, 0)), np.zeros(4), [[1, np.nan], [0, 1]],
                                     [[np.inf]]])
    def test_rejects(self, bad):
        with pytest.raises(MatrixError):
            as_cmatrix(bad)

    def test_dtype(self):
        assert as_cmatrix([[1, 2], [3, 4]]).dtype == np.complex128


class TestSvd:
    def test_diag_closed_form(self):
        s = singular_values(np.diag([3.0, -5.0, 1j]))
        np.testing.assert_allclose(s, [5.0, 3.0, 1.0])

    def test_jordan2_closed_form(self):
        # J2^* J2 = diag(0, 1): singular values 1, 0
        np.testing.assert_allclose(singular_values([[0, 1], [0, 0]]), [1.0, 0.0], atol=1e-15)

    def test_2x2_upper_closed_form(self):
        # [[1, 1], [0, 2]]: s^2 solves s^4 - 6 s^2 + 4 = 0
        s2 = np.array([3 + np.sqrt(5), 3 - np.sqrt(5)])
        np.testing.assert_allclose(singular_values([[1, 1], [0, 2]]), np.sqrt(s2), rtol=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_charpoly_oracle(self, seed):
        r = np.random.default_rng(seed)
        a = r.standard_normal((3, 3)) + 1j * r.standard_normal((3, 3))
        np.testing.assert_allclose(singular_values(a), charpoly_singular_values(a), rtol=1e-8)

    @given(cmatrices())
    def test_reconstruction(self, a):
        res = svd(a)
        scale = max(1.0, operator_norm(a))
        np.testing.assert_allclose(res.reconstruct(), a, atol=1e-10 * scale)
        assert np.all(np.diff(res.singular_values) <= 0)
        assert np.all(res.singular_values >= 0)

    @given(cmatrices())
    def test_resolvent_matches_svd(self, a):
        z = 0.3 - 0.7j
        s = singular_values(z * np.eye(len(a)) - a)[-1]
        assert resolvent_smin(a, z) == pytest.approx(s, abs=1e-12 * max(1, s))


class TestEig:
    def test_upper_2x2_overlaps(self):
        # [[a, b], [0, c]]: kappa^2 = 1 + |b|^2 / |a - c|^2 for both eigenvalues
        sd = eig([[1, 1], [0, 2]])
        np.testing.assert_allclose(sd.eigenvalues, [1, 2])
        np.testing.assert_allclose(sd.overlaps**2, [2.0, 2.0], rtol=1e-12)

    @pytest.mark.parametrize("b,gap", [(0.5, 1.0), (3.0, 0.1), (1.0, 1e-3)])
    def test_upper_2x2_parametrized(self, b, gap):
        sd = eig([[0, b], [0, gap]])
        np.testing.assert_allclose(sd.overlaps**2, 1 + b * b / gap**2, rtol=1e-9)

    def test_normal_matrix_overlaps_one(self):
        q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((6, 6)))
        np.testing.assert_allclose(eig(q).overlaps, 1.0, atol=1e-10)

    def test_lexicographic_order(self):
        sd = eig(np.diag([2 + 1j, -1, 2 - 1j, 0.5j]))
        np.testing.assert_allclose(sd.eigenvalues, [-1, 0.5j, 2 - 1j, 2 + 1j])

    @pytest.mark.parametrize("n", [2, 4, 7])
    def test_jordan_rejected(self, n):
        with pytest.raises(NearDefectiveError) as info:
            eig(np.diag(np.ones(n - 1), 1))
        assert info.value.gap <= info.value.gap_tol

    def test_gap_tolerance_scale(self):
        assert gap_tolerance(np.eye(2)) == 1e-10
        assert gap_tolerance(100 * np.eye(2)) == pytest.approx(1e-8)

    @given(cmatrices(4))
    def test_biorthogonality(self, a):
        try:
            sd = eig(a)
        except NearDefectiveError:
            return
        v, w = sd.right_vectors, sd.left_vectors
        np.testing.assert_allclose(np.linalg.norm(v, axis=0), 1.0, rtol=1e-12)
        np.testing.assert_allclose(np.einsum("ij,ij->j", w.conj(), v), 1.0, atol=1e-9)
        assert np.all(sd.overlaps >= 1 - 1e-9)


class TestIO:
    @given(cmatrices())
    def test_json_roundtrip_exact(self, a):
        b = matrix_from_json(matrix_to_json(a))
        assert np.array_equal(b.view(float), a.view(float))

    @given(cmatrices())
    def test_text_roundtrip_exact(self, a):
        b = matrix_from_text(matrix_to_text(a))
        assert np.array_equal(b.view(float), a.view(float))

    def test_signed_zero_survives(self):
        a = np.array([[complex(-0.0, -0.0)]])
        for b in (matrix_from_json(matrix_to_json(a)), matrix_from_text(matrix_to_text(a))):
            assert np.signbit(b.real[0, 0]) and np.signbit(b.imag[0, 0])

    @pytest.mark.parametrize("suffix", [".json", ".txt"])
    def test_file_roundtrip(self, tmp_path, suffix):
        a = np.array([[1 + 2j, -3], [0.1, 1e-300j]])
        p = tmp_path / f"m{suffix}"
        save_matrix(a, p)
        assert np.array_equal(load_matrix(p), a)

    @pytest.mark.parametrize("text", ['{"n": 2, "entries": [[1, 0]]}', '{"entries": []}'])
    def test_bad_json(self, text):
        with pytest.raises(MatrixError):
            matrix_from_json(text)

    def test_bad_text(self):
        with pytest.raises(MatrixError):
            matrix_from_text("2\n1 0\n")
