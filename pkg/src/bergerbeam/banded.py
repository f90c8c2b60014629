"""Banded matrices and the banded-plus-rank-one solve used by the Newton iterations.

Storage follows LAPACK general-band layout: ``ab[ku + i - j, j] = A[i, j]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.linalg.blas import dgbmv
from scipy.linalg.lapack import dgbtrf, dgbtrs


@dataclass(frozen=True, eq=False)
class BandedMatrix:
    """Square banded matrix with ``kl`` sub- and ``ku`` super-diagonals."""

    ab: np.ndarray
    kl: int
    ku: int

    @cached_property
    def _csr(self) -> sparse.csr_matrix:
        offsets = np.arange(self.ku, -self.kl - 1, -1)
        # dia_matrix wants data[k, j] = A[j - offset_k, j], which is exactly the band layout
        return sparse.dia_matrix((self.ab, offsets), shape=(self.n, self.n)).tocsr()

    @classmethod
    def from_diagonals(cls, diagonals: dict[int, np.ndarray], n: int) -> "BandedMatrix":
        """Build from ``{offset: values}``; offset > 0 is above the main diagonal.

        Each diagonal with offset ``d`` must have length ``n - |d|``.
        """
        kl = max([0] + [-d for d in diagonals if d < 0])
        ku = max([0] + [d for d in diagonals if d > 0])
        ab = np.zeros((kl + ku + 1, n))
        for d, vals in diagonals.items():
            vals = np.broadcast_to(np.asarray(vals, dtype=float), (n - abs(d),))
            if d >= 0:
                ab[ku - d, d:] = vals
            else:
                ab[ku - d, : n + d] = vals
        ab.setflags(write=False)
        return cls(ab, kl, ku)

    @property
    def n(self) -> int:
        return self.ab.shape[1]

    def diagonal(self, d: int) -> np.ndarray:
        n = self.n
        if d >= 0:
            return self.ab[self.ku - d, d:].copy()
        return self.ab[self.ku - d, : n + d].copy()

    @cached_property
    def _fortran(self) -> np.ndarray:
        return np.asfortranarray(self.ab)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            return self._csr @ x
        return dgbmv(self.n, self.n, self.kl, self.ku, 1.0, self._fortran, x)

    __matmul__ = matvec

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def tocsr(self) -> sparse.csr_matrix:
        return self._csr.copy()

    def transpose(self) -> "BandedMatrix":
        return BandedMatrix.from_diagonals(
            {-d: self.diagonal(d) for d in range(-self.kl, self.ku + 1)}, self.n
        )

    @property
    def T(self) -> "BandedMatrix":
        return self.transpose()


def combine(n: int, identity: float = 0.0, terms=()) -> BandedMatrix:
    """Return ``identity * I + sum(c * M for c, M in terms)`` as one banded matrix."""
    terms = [(float(c), m) for c, m in terms if c != 0.0]
    kl = max([0] + [m.kl for _, m in terms])
    ku = max([0] + [m.ku for _, m in terms])
    ab = np.zeros((kl + ku + 1, n))
    ab[ku] += identity
    for c, m in terms:
        ab[ku - m.ku : ku + m.kl + 1] += c * m.ab
    return BandedMatrix(ab, kl, ku)


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class BandedLU:
    """LU factorization of a banded matrix (LAPACK ``gbtrf``)."""

    def __init__(self, a: BandedMatrix):
        kl, ku = a.kl, a.ku
        work = np.zeros((2 * kl + ku + 1, a.n), order="F")
        work[kl:] = a.ab
        lu, piv, info = dgbtrf(work, kl, ku, overwrite_ab=1)
        if info > 0:
            raise SingularMatrixError(f"banded matrix is singular (zero pivot at {info})")
        if info < 0:
            raise ValueError(f"illegal argument {-info} to dgbtrf")
        self._lu, self._piv, self.kl, self.ku = lu, piv, kl, ku

    def solve(self, b: np.ndarray) -> np.ndarray:
        x, info = dgbtrs(self._lu, self.kl, self.ku, b, self._piv)
        if info != 0:
            raise ValueError(f"illegal argument {-info} to dgbtrs")
        return x


class RankOneUpdatedSolver:
    """Solve ``(B + c * z w^T) x = r`` given a factorization of banded ``B``.

    Sherman-Morrison: with ``B y = z``,
    ``x = B^{-1} r - c y (w . B^{-1} r) / (1 + c w . y)``.
    """

    def __init__(self, lu: BandedLU, c: float = 0.0, z: np.ndarray | None = None,
                 w: np.ndarray | None = None):
        self.lu = lu
        self.c = c
        if c != 0.0:
            if z is None:
                raise ValueError("rank-one update requires a vector z")
            self.z = z
            self.w = z if w is None else w
            self.y = lu.solve(z)
            self.denom = 1.0 + c * (self.w @ self.y)
            if self.denom == 0.0 or not np.isfinite(self.denom):
                raise SingularMatrixError("rank-one updated matrix is singular")

    def solve(self, r: np.ndarray) -> np.ndarray:
        x = self.lu.solve(r)
        if self.c == 0.0:
            return x
        return x - (self.c * (self.w @ x) / self.denom) * self.y
