"""Small dense complex linear algebra used by the detector.

Matrices and vectors are plain numpy arrays of dtype complex128. The
functions here validate shapes and finiteness and otherwise stay close to
the textbook definitions, because the detector's correctness arguments
(idempotent, Hermitian projectors; nested projections) are checked against
them directly.
"""

import numpy as np

# Module-wide tolerances.
PIVOT_RTOL = 1e-14
"""A Cholesky pivot below ``PIVOT_RTOL * trace(G)`` marks G as singular."""
INVERSE_RTOL = 1e-12
"""Residual bound ``||G G^-1 - I||_inf`` expected for conditioned inputs."""
PROJECTION_ATOL = 1e-10
"""Bound on idempotence, Hermitian symmetry and annihilation residuals."""


class SingularMatrixError(ValueError):
    """Raised when a Gram matrix is singular or not Hermitian positive definite."""


def as_matrix(A):
    """Return `A` as a finite 2D complex array, raising ValueError otherwise."""
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] < 1:
        raise ValueError(f"expected a 2D matrix with at least one row, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    return A


def as_vector(v):
    """Return `v` as a finite 1D complex array, raising ValueError otherwise."""
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"expected a non-empty 1D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def hermitian_transpose(A):
    """Conjugate transpose ``A^+``."""
    return as_matrix(A).conj().T


def matmul(A, B):
    """Complex matrix product with an explicit dimension check."""
    A = as_matrix(A)
    B = as_matrix(B)
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} x {B.shape}")
    return A @ B


def invert_hpd(G):
    """Invert a small Hermitian positive definite matrix.

    Uses an unblocked Cholesky factorization ``G = L L^+`` followed by
    triangular inversion, ``G^-1 = L^-+ L^-1``.

    Parameters
    ----------
    G : array_like, shape (k, k)
        Hermitian positive definite matrix. Only the lower triangle is read.

    Returns
    -------
    ndarray, shape (k, k)
        The inverse, symmetrized so that it is exactly Hermitian.

    Raises
    ------
    SingularMatrixError
        If a pivot falls below ``PIVOT_RTOL * trace(G)``, i.e. G is
        (numerically) singular or indefinite.
    """
    G = as_matrix(G)
    k = G.shape[0]
    if G.shape != (k, k):
        raise ValueError(f"expected a square matrix, got shape {G.shape}")
    trace = float(np.real(np.trace(G)))
    if not trace > 0.0:
        raise SingularMatrixError("Gram matrix has non-positive trace")
    threshold = PIVOT_RTOL * trace

    L = np.zeros_like(G)
    for j in range(k):
        pivot = G[j, j].real - np.sum(np.abs(L[j, :j]) ** 2)
        if pivot < threshold:
            raise SingularMatrixError(f"pivot {pivot:.3e} below threshold {threshold:.3e}")
        L[j, j] = np.sqrt(pivot)
        for i in range(j + 1, k):
            L[i, j] = (G[i, j] - np.sum(L[i, :j] * L[j, :j].conj())) / L[j, j]

    # Forward substitution for L^-1 (lower triangular).
    Linv = np.zeros_like(G)
    for i in range(k):
        Linv[i, i] = 1.0 / L[i, i]
        for j in range(i):
            Linv[i, j] = -np.sum(L[i, j:i] * Linv[j:i, j]) / L[i, i]
    inv = Linv.conj().T @ Linv
    return 0.5 * (inv + inv.conj().T)


def projection_matrix(interferers, dim=None):
    """Orthogonal projector onto the complement of span(interferers).

    ``P = I - H (H^+ H)^-1 H^+`` for an ``n x k`` matrix H with full column
    rank and ``k < n``.

    Parameters
    ----------
    interferers : array_like, shape (n, k)
        Interferer columns. ``k = 0`` is allowed and yields the identity.
    dim : int, optional
        Required when `interferers` has no columns and is given as an empty
        array without a usable row count.

    Returns
    -------
    ndarray, shape (n, n)
    """
    H = np.asarray(interferers, dtype=np.complex128)
    if H.ndim == 1:
        H = H[:, None]
    if H.size == 0:
        n = dim if dim is not None else H.shape[0]
        if n < 1:
            raise ValueError("dimension of the empty interferer set is unknown")
        return np.eye(n, dtype=np.complex128)
    H = as_matrix(H)
    n, k = H.shape
    if k >= n:
        raise ValueError(f"need fewer interferers than dimensions, got {k} >= {n}")
    Hh = H.conj().T
    P = np.eye(n, dtype=np.complex128) - H @ invert_hpd(Hh @ H) @ Hh
    return 0.5 * (P + P.conj().T)


def orthogonal_residual(h, interferers):
    """Component of `h` orthogonal to every interferer column, ``P h``."""
    h = as_vector(h)
    return projection_matrix(interferers, dim=h.size) @ h
