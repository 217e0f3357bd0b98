"""Symmetric banded matrices in LAPACK lower-band storage.

Storage convention: ``ab[i, j] = A[j + i, j]`` for ``0 <= i <= half_bandwidth``,
i.e. row ``i`` of ``ab`` holds the ``i``-th subdiagonal left-aligned.  Only the
lower triangle is stored, so represented matrices are symmetric by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a banded Cholesky factorization hits a nonpositive pivot."""


@dataclass
class BandedSymmetricMatrix:
    """Symmetric matrix with entries only within ``|i - j| <= half_bandwidth``."""

    order: int
    half_bandwidth: int
    ab: np.ndarray  # (half_bandwidth + 1, order) lower band

    def __post_init__(self):
        expected = (self.half_bandwidth + 1, self.order)
        if self.ab.shape != expected:
            raise ValueError(f"band storage shape {self.ab.shape} != {expected}")

    @classmethod
    def zeros(cls, order: int, half_bandwidth: int) -> "BandedSymmetricMatrix":
        return cls(order, half_bandwidth, np.zeros((half_bandwidth + 1, order)))

    def diagonal(self) -> np.ndarray:
        return self.ab[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Product A @ v using both band triangles."""
        y = self.ab[0] * v
        for i in range(1, self.half_bandwidth + 1):
            band = self.ab[i, : self.order - i]
            y[i:] += band * v[: self.order - i]
            y[: self.order - i] += band * v[i:]
        return y

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.order, self.order))
        for i in range(self.half_bandwidth + 1):
            idx = np.arange(self.order - i)
            a[idx + i, idx] = self.ab[i, : self.order - i]
            a[idx, idx + i] = self.ab[i, : self.order - i]
        return a

    def shifted(self, sigma: float) -> "BandedSymmetricMatrix":
        ab = self.ab.copy()
        ab[0] += sigma
        return BandedSymmetricMatrix(self.order, self.half_bandwidth, ab)

    def cholesky(self) -> "BandedCholesky":
        """Lower banded Cholesky factor; raises NotPositiveDefiniteError."""
        try:
            cb = cholesky_banded(self.ab, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(str(exc)) from exc
        return BandedCholesky(cb)


@dataclass
class BandedCholesky:
    """Reusable factorization handle for repeated right-hand sides."""

    cb: np.ndarray

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve_banded((self.cb, True), rhs, check_finite=False)
