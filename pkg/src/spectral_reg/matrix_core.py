"""Dense complex linear algebra used by every other module.

Matrices are plain ``numpy`` arrays of dtype ``complex128`` with shape
``(n, n)``; :func:`as_cmatrix` is the single validation gate.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MatrixError(ValueError):
    """Input is not a finite square complex matrix."""


class NearDefectiveError(ValueError):
    """Two eigenvalues are closer than the gap tolerance.

    Attributes
    ----------
    pair : tuple of complex
        The offending eigenvalues.
    gap : float
        Their distance.
    gap_tol : float
        The tolerance that was violated.
    """

    def __init__(self, pair, gap, gap_tol):
        self.pair = pair
        self.gap = gap
        self.gap_tol = gap_tol
        super().__init__(
            f"near-defective matrix: eigenvalues {pair[0]:.6g} and {pair[1]:.6g} "
            f"are {gap:.3g} apart (gap_tol={gap_tol:.3g})"
        )


def as_cmatrix(m) -> np.ndarray:
    """Return ``m`` as a validated ``complex128`` square matrix."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise MatrixError(f"expected a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise MatrixError("matrix has non-finite entries")
    return a


@dataclass(frozen=True)
class SvdResult:
    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.conj().T


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues with biorthogonal eigenvectors.

    ``right_vectors[:, i]`` has unit norm and ``left_vectors[:, i]`` is scaled
    so that ``left_vectors[:, i].conj() @ right_vectors[:, i] == 1``; hence
    ``overlaps[i] = ||v_i|| ||w_i|| = ||w_i||``.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    overlaps: np.ndarray


def svd(m) -> SvdResult:
    a = as_cmatrix(m)
    u, s, vh = np.linalg.svd(a)
    return SvdResult(singular_values=s, left_vectors=u, right_vectors=vh.conj().T)


def singular_values(m) -> np.ndarray:
    return np.linalg.svd(as_cmatrix(m), compute_uv=False)


def operator_norm(m) -> float:
    return float(singular_values(m)[0])


def gap_tolerance(m) -> float:
    return 1e-10 * max(1.0, operator_norm(m))


def eig(m, gap_tol: float | None = None) -> SpectralData:
    """Eigendecomposition with left eigenvectors normalized against the right ones.

    Eigenvalues are returned in lexicographic (real, imag) order. Raises
    :class:`NearDefectiveError` when two eigenvalues are closer than
    ``gap_tol`` (default ``1e-10 * max(1, ||M||)``).
    """
    a = as_cmatrix(m)
    n = a.shape[0]
    if gap_tol is None:
        gap_tol = gap_tolerance(a)

    lam, v = np.linalg.eig(a)
    order = np.lexsort((lam.imag, lam.real))
    lam = lam[order]
    v = v[:, order]

    if n > 1:
        d = np.abs(lam[:, None] - lam[None, :])
        d[np.diag_indices(n)] = np.inf
        i, j = np.unravel_index(np.argmin(d), d.shape)
        if d[i, j] <= gap_tol:
            raise NearDefectiveError((complex(lam[i]), complex(lam[j])), float(d[i, j]), gap_tol)

    v = v / np.linalg.norm(v, axis=0)
    # rows of V^{-1} are w_i^*, already satisfying w_i^* v_i = 1
    w = np.linalg.inv(v).conj().T
    # rescale so that w_i^* v_i = 1 holds to rounding, not just to inversion accuracy
    w = w / np.einsum("ij,ij->j", w.conj(), v).conj()
    overlaps = np.linalg.norm(w, axis=0) * np.linalg.norm(v, axis=0)
    return SpectralData(eigenvalues=lam, right_vectors=v, left_vectors=w, overlaps=overlaps)


def resolvent_smin(m, z: complex) -> float:
    """Smallest singular value of ``zI - M``."""
    a = as_cmatrix(m)
    shifted = z * np.eye(a.shape[0]) - a
    return float(np.linalg.svd(shifted, compute_uv=False)[-1])


# ---------------------------------------------------------------------------
# file formats


def matrix_to_json(m) -> str:
    a = as_cmatrix(m)
    entries = [[float(x.real), float(x.imag)] for x in a.ravel()]
    return json.dumps({"n": a.shape[0], "entries": entries})


def matrix_from_json(text: str) -> np.ndarray:
    obj = json.loads(text)
    try:
        n = int(obj["n"])
        entries = obj["entries"]
    except (KeyError, TypeError) as exc:
        raise MatrixError("matrix JSON needs 'n' and 'entries'") from exc
    if n < 1 or len(entries) != n * n:
        raise MatrixError(f"expected {n * n} entries for n={n}, got {len(entries)}")
    flat = np.empty(n * n, dtype=np.complex128)
    flat.real = [float(e[0]) for e in entries]
    flat.imag = [float(e[1]) for e in entries]
    return as_cmatrix(flat.reshape(n, n))


def matrix_to_text(m) -> str:
    a = as_cmatrix(m)
    # repr round-trips float64 exactly
    lines = [str(a.shape[0])]
    lines += [f"{float(x.real)!r} {float(x.imag)!r}" for x in a.ravel()]
    return "\n".join(lines) + "\n"


def matrix_from_text(text: str) -> np.ndarray:
    tokens = text.split()
    if not tokens:
        raise MatrixError("empty matrix file")
    try:
        n = int(tokens[0])
    except ValueError:
        raise MatrixError(f"first token must be the dimension, got {tokens[0]!r}") from None
    vals = tokens[1:]
    if n < 1 or len(vals) != 2 * n * n:
        raise MatrixError(f"expected {n * n} 're im' pairs for n={n}")
    flat = np.empty(n * n, dtype=np.complex128)
    try:
        flat.real = [float(x) for x in vals[0::2]]
        flat.imag = [float(x) for x in vals[1::2]]
    except ValueError as exc:
        raise MatrixError(str(exc)) from None
    return as_cmatrix(flat.reshape(n, n))


def load_matrix(path) -> np.ndarray:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return matrix_from_json(text)
    return matrix_from_text(text)


def save_matrix(m, path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(matrix_to_json(m))
    else:
        path.write_text(matrix_to_text(m))
