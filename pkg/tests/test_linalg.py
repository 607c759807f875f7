import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vblastlab import linalg


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


class TestHermitianTranspose:
    def test_scalar(self):
        z = 1.5 - 2j
        assert linalg.hermitian_transpose([[z]]) == np.conj(z)

    def test_identity(self):
        np.testing.assert_array_equal(linalg.hermitian_transpose(np.eye(3)), np.eye(3))

    def test_involution(self):
        A = crandn(np.random.default_rng(0), 3, 2)
        B = linalg.hermitian_transpose(A)
        assert B.shape == (2, 3)
        np.testing.assert_array_equal(linalg.hermitian_transpose(B), A)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            linalg.hermitian_transpose([[np.nan]])


class TestMatmul:
    def test_identity(self):
        A = crandn(np.random.default_rng(1), 3, 3)
        np.testing.assert_array_equal(linalg.matmul(A, np.eye(3)), A)

    def test_imaginary_unit(self):
        assert linalg.matmul([[1j]], [[1j]])[0, 0] == -1

    def test_two_by_two_hand_expansion(self):
        rng = np.random.default_rng(2)
        A, B = crandn(rng, 2, 2), crandn(rng, 2, 2)
        C = linalg.matmul(A, B)
        for i in range(2):
            for j in range(2):
                assert C[i, j] == pytest.approx(A[i, 0] * B[0, j] + A[i, 1] * B[1, j], abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            linalg.matmul(np.ones((2, 3)), np.ones((2, 3)))


class TestInvertHpd:
    def test_scalar(self):
        assert linalg.invert_hpd([[2.0]])[0, 0] == pytest.approx(0.5, rel=1e-15)

    def test_diagonal(self):
        np.testing.assert_allclose(linalg.invert_hpd(np.diag([1.0, 4.0])), np.diag([1.0, 0.25]))

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_residual(self, k):
        rng = np.random.default_rng(k)
        A = crandn(rng, 5, k)
        G = A.conj().T @ A + np.eye(k)
        R = G @ linalg.invert_hpd(G) - np.eye(k)
        assert np.max(np.abs(R)) < linalg.INVERSE_RTOL

    def test_singular(self):
        v = np.array([[1.0], [2j]])
        with pytest.raises(linalg.SingularMatrixError):
            linalg.invert_hpd(np.hstack([v, v]).conj().T @ np.hstack([v, v]))

    def test_indefinite(self):
        with pytest.raises(linalg.SingularMatrixError):
            linalg.invert_hpd(np.diag([1.0, -1.0]))


class TestProjection:
    def test_axis(self):
        P = linalg.projection_matrix(np.array([[1.0], [0.0]]))
        np.testing.assert_allclose(P, [[0, 0], [0, 1]], atol=1e-15)

    def test_empty_interferers(self):
        np.testing.assert_array_equal(linalg.projection_matrix(np.zeros((3, 0))), np.eye(3))

    def test_too_many_interferers(self):
        with pytest.raises(ValueError):
            linalg.projection_matrix(np.eye(2))

    def test_dependent_columns(self):
        v = np.array([1.0, 1j, 0.0])
        with pytest.raises(linalg.SingularMatrixError):
            linalg.projection_matrix(np.column_stack([v, 2 * v]))

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6), data=st.data())
    def test_projector_properties(self, seed, n, data):
        k = data.draw(st.integers(1, n - 1))
        rng = np.random.default_rng(seed)
        H = crandn(rng, n, k)
        P = linalg.projection_matrix(H)
        tol = linalg.PROJECTION_ATOL
        assert np.max(np.abs(P @ P - P)) < tol
        assert np.max(np.abs(P - P.conj().T)) < tol
        assert np.max(np.abs(P @ H)) < tol
        assert np.real(np.trace(P)) == pytest.approx(n - k, abs=1e-12)

    @pytest.mark.parametrize("seed", range(20))
    def test_nested_projections(self, seed):
        # Larger interferer set first: P_big P_small = P_big.
        rng = np.random.default_rng(seed)
        H = crandn(rng, 4, 2)
        P_big = linalg.projection_matrix(H)
        P_small = linalg.projection_matrix(H[:, 1:])
        assert np.max(np.abs(P_big @ P_small - P_big)) < 1e-10
        assert np.max(np.abs(P_small @ P_big - P_big)) < 1e-10


class TestOrthogonalResidual:
    def test_parallel_vector_vanishes(self):
        u = np.array([1.0 + 1j, 2.0, -1j])
        r = linalg.orthogonal_residual(3j * u, u[:, None])
        assert np.max(np.abs(r)) < 1e-14

    def test_orthogonal_vector_unchanged(self):
        r = linalg.orthogonal_residual([0, 0, 1j], np.array([[1.0], [1j], [0]]))
        np.testing.assert_allclose(r, [0, 0, 1j], atol=1e-15)

    @pytest.mark.parametrize("seed", range(10))
    def test_pythagoras(self, seed):
        rng = np.random.default_rng(seed)
        H = crandn(rng, 4, 2)
        h = crandn(rng, 4)
        r = linalg.orthogonal_residual(h, H)
        along = h - r
        assert np.max(np.abs(H.conj().T @ r)) < 1e-10
        assert np.linalg.norm(h) ** 2 == pytest.approx(
            np.linalg.norm(r) ** 2 + np.linalg.norm(along) ** 2, rel=1e-12)
