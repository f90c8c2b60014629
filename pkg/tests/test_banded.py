import numpy as np
import pytest
from hypothesis import given, strategies as st

from bergerbeam.banded import BandedLU, BandedMatrix, RankOneUpdatedSolver, SingularMatrixError, combine


def random_banded(rng, n, kl, ku, shift=10.0):
    diags = {d: rng.normal(size=n - abs(d)) for d in range(-kl, ku + 1)}
    diags[0] = diags[0] + shift
    return BandedMatrix.from_diagonals(diags, n)


class TestBandedMatrix:
    def test_layout_matches_dense(self, rng):
        a = random_banded(rng, 9, 2, 1)
        dense = a.toarray()
        for i in range(9):
            for j in range(9):
                if j - i > 1 or i - j > 2:
                    assert dense[i, j] == 0.0
        assert np.allclose(np.diag(dense, -2), a.diagonal(-2))
        assert np.allclose(np.diag(dense, 1), a.diagonal(1))

    def test_matvec(self, rng):
        a = random_banded(rng, 15, 2, 2)
        x = rng.normal(size=15)
        assert np.allclose(a.matvec(x), a.toarray() @ x, rtol=1e-14, atol=1e-13)
        assert np.allclose(a @ x, a.toarray() @ x)

    def test_transpose(self, rng):
        a = random_banded(rng, 7, 1, 2)
        assert np.array_equal(a.T.toarray(), a.toarray().T)

    def test_combine(self, rng):
        a = random_banded(rng, 8, 1, 1)
        b = random_banded(rng, 8, 2, 2)
        c = combine(8, 3.0, [(2.0, a), (-0.5, b)])
        assert np.allclose(c.toarray(), 3 * np.eye(8) + 2 * a.toarray() - 0.5 * b.toarray())


class TestSolvers:
    @given(st.integers(5, 30), st.integers(0, 3), st.integers(0, 3), st.integers(0, 2**31 - 1))
    def test_lu_solve(self, n, kl, ku, seed):
        rng = np.random.default_rng(seed)
        a = random_banded(rng, n, kl, ku, shift=3.0 * (kl + ku + 1))
        b = rng.normal(size=n)
        x = BandedLU(a).solve(b)
        assert np.allclose(a.toarray() @ x, b, atol=1e-10)

    def test_multiple_right_hand_sides(self, rng):
        a = random_banded(rng, 12, 2, 2)
        b = rng.normal(size=(12, 3))
        assert np.allclose(BandedLU(a).solve(b), np.linalg.solve(a.toarray(), b))

    def test_singular_raises(self):
        a = BandedMatrix.from_diagonals({0: np.array([1.0, 0.0, 2.0])}, 3)
        with pytest.raises(SingularMatrixError):
            BandedLU(a)

    def test_sherman_morrison(self, rng):
        a = random_banded(rng, 20, 2, 2)
        z = rng.normal(size=20)
        solver = RankOneUpdatedSolver(BandedLU(a), 0.7, z)
        r = rng.normal(size=20)
        dense = a.toarray() + 0.7 * np.outer(z, z)
        assert np.allclose(solver.solve(r), np.linalg.solve(dense, r))

    def test_sherman_morrison_nonsymmetric(self, rng):
        a = random_banded(rng, 10, 1, 1)
        z, w = rng.normal(size=10), rng.normal(size=10)
        solver = RankOneUpdatedSolver(BandedLU(a), -1.3, z, w)
        r = rng.normal(size=10)
        assert np.allclose(solver.solve(r), np.linalg.solve(a.toarray() - 1.3 * np.outer(z, w), r))

    def test_singular_update_detected(self):
        a = BandedMatrix.from_diagonals({0: np.ones(4)}, 4)
        z = np.array([1.0, 0.0, 0.0, 0.0])
        with pytest.raises(SingularMatrixError):
            RankOneUpdatedSolver(BandedLU(a), -1.0, z)
