"""Dense matrix kernels: spectral norm, extreme eigenvalues, square roots,
and the 2-norm matrix measure.

Matrices are plain 2-D ``numpy.ndarray`` of float64. All symmetric
eigenproblems go through the Jacobi kernel selected in ``_backend``.
"""
import numpy as np

from ._backend import jacobi_eigh
from .errors import DimensionError, NotPSDError

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-12


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D float64 array.

    Raises
    ------
    DimensionError
        If ``M`` is not 2-D or contains NaN/Inf.
    """
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DimensionError(f"{name} has non-finite entries")
    return A


def _require_square(A, name):
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")


def symmetrize(S):
    S = as_matrix(S)
    _require_square(S, "matrix")
    return 0.5 * (S + S.T)


def sym_eigh(S):
    """Full eigendecomposition of the symmetric part of ``S`` (ascending)."""
    S = symmetrize(S)
    if S.size == 0:
        raise DimensionError("empty matrix")
    return jacobi_eigh(S)


def sym_eig_extremes(S):
    """Smallest and largest eigenvalue of ``(S + S.T) / 2``."""
    w, _ = sym_eigh(S)
    return float(w[0]), float(w[-1])


def spectral_norm(M):
    """Largest singular value of ``M``.

    Computed from the eigenvalues of the smaller Gram matrix.
    """
    M = as_matrix(M)
    if M.size == 0:
        raise DimensionError("spectral norm of an empty matrix")
    G = M.T @ M if M.shape[1] <= M.shape[0] else M @ M.T
    w, _ = jacobi_eigh(0.5 * (G + G.T))
    return float(np.sqrt(max(w[-1], 0.0)))


def singular_values(M, tol=1e-15, max_sweeps=100):
    """All singular values of ``M`` (descending), by one-sided Jacobi.

    Used for rank decisions, where forming the Gram matrix would square the
    condition number and hide singular values below ~1e-8.
    """
    M = as_matrix(M)
    if M.size == 0:
        raise DimensionError("singular values of an empty matrix")
    # orthogonalize the columns of the wide-side transpose
    U = M.T.copy() if M.shape[0] < M.shape[1] else M.copy()
    k = U.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(k - 1):
            for q in range(p + 1, k):
                alpha = U[:, p] @ U[:, p]
                beta = U[:, q] @ U[:, q]
                gamma = U[:, p] @ U[:, q]
                if gamma == 0.0 or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                # tangent of the rotation angle, written without forming (beta - alpha) / gamma
                d, g = beta - alpha, 2.0 * gamma
                t = (g if d >= 0 else -g) / (abs(d) + np.hypot(g, d))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                up = U[:, p].copy()
                U[:, p] = c * up - s * U[:, q]
                U[:, q] = s * up + c * U[:, q]
        if not rotated:
            break
    return np.sort(np.linalg.norm(U, axis=0))[::-1]


def sym_sqrt(S):
    """Symmetric positive semidefinite square root.

    Eigenvalues in ``[-1e-12, 0)`` are clamped to zero.

    Raises
    ------
    NotPSDError
        If the smallest eigenvalue is below ``-1e-12``.
    """
    w, V = sym_eigh(S)
    if w[0] < -PSD_TOL:
        raise NotPSDError(f"matrix is not positive semidefinite (lambda_min={w[0]:.3e})")
    r = np.sqrt(np.clip(w, 0.0, None))
    R = (V * r) @ V.T
    return 0.5 * (R + R.T)


def sym_inv_sqrt(S):
    """Inverse of :func:`sym_sqrt` for positive definite ``S``."""
    w, V = sym_eigh(S)
    if w[0] <= 0.0:
        raise NotPSDError(f"matrix is not positive definite (lambda_min={w[0]:.3e})")
    R = (V / np.sqrt(w)) @ V.T
    return 0.5 * (R + R.T)


def matrix_measure_2(A):
    """Matrix measure induced by the Euclidean norm, ``lambda_max((A + A.T) / 2)``."""
    A = as_matrix(A)
    _require_square(A, "matrix")
    return sym_eig_extremes(A)[1]
