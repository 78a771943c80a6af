"""Eigenvector condition number and overlap sums."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matrix_core import SpectralData, eig
from .regions import Region


@dataclass(frozen=True)
class ConditioningReport:
    """Upper bounds on the eigenvector condition number.

    ``kappa_V_unit_columns`` is ``||V|| ||V^{-1}||`` for the eigenvector matrix
    with unit columns; ``lemma_bound = sqrt(n * overlap_sum)`` bounds it from
    above. Both bound the true infimum over diagonalizations.
    """

    kappa_V_unit_columns: float
    overlap_sum: float
    lemma_bound: float
    n: int

    def to_dict(self) -> dict:
        return {
            "kappa_V_unit_columns": self.kappa_V_unit_columns,
            "overlap_sum": self.overlap_sum,
            "lemma_bound": self.lemma_bound,
            "n": self.n,
        }


def report_from_spectral(sd: SpectralData) -> ConditioningReport:
    s = np.linalg.svd(sd.right_vectors, compute_uv=False)
    n = len(sd.eigenvalues)
    overlap_sum = float(np.sum(sd.overlaps**2))
    return ConditioningReport(
        kappa_V_unit_columns=float(s[0] / s[-1]),
        overlap_sum=overlap_sum,
        lemma_bound=math.sqrt(n * overlap_sum),
        n=n,
    )


def kappa_V(m) -> ConditioningReport:
    return report_from_spectral(eig(m))


def overlap_sum_in_region(m, region: Region, spectral: SpectralData | None = None) -> float:
    """Sum of squared eigenvalue condition numbers over eigenvalues strictly inside ``region``."""
    sd = spectral if spectral is not None else eig(m)
    inside = region.contains(sd.eigenvalues)
    return float(np.sum(sd.overlaps[inside] ** 2))
