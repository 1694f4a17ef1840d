"""
Complex Hermitian Linear Algebra Kernel

Eigendecomposition, SVD, inverse square root, eigenmode dropping and PSD
repair shared by every solver. All functions are pure: they never modify their
inputs and every Hermitian result is re-symmetrized ((A + A^H) / 2) before it
is returned. Eigenvalues and singular values are always in descending order.
"""

from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from app.core.config import settings
from app.core.exceptions import EigenDecompositionError, NotNearPsdError, SingularMatrixError


def hermitize(A: np.ndarray) -> np.ndarray:
    """Return the Hermitian part (A + A^H) / 2 as a complex array."""
    A = np.asarray(A, dtype=complex)
    return (A + A.conj().T) / 2


def _spectral_norm(eigenvalues: np.ndarray) -> float:
    return float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0


def herm_eig(A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a Hermitian matrix.

    Args:
        A: Hermitian matrix (only its Hermitian part is used)

    Returns:
        (eigenvalues, eigenvectors): real eigenvalues in descending order and a
        unitary matrix whose columns are the matching eigenvectors

    Raises:
        EigenDecompositionError: If LAPACK fails to converge
    """
    A = hermitize(A)
    try:
        eigenvalues, eigenvectors = scipy.linalg.eigh(A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenDecompositionError(
            f"Hermitian eigensolver failed on a {A.shape[0]}x{A.shape[1]} matrix "
            f"(condition number ~{np.linalg.cond(A):.3e}): {exc}"
        ) from exc
    return eigenvalues[::-1].copy(), eigenvectors[:, ::-1].copy()


def svd(H: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Full singular value decomposition H = U diag(s) V^H.

    Returns:
        (U, s, V): U is m x m unitary, s holds min(m, n) nonnegative singular
        values in descending order, V is n x n unitary (not V^H)
    """
    H = np.asarray(H, dtype=complex)
    try:
        U, s, Vh = scipy.linalg.svd(H, full_matrices=True)
    except np.linalg.LinAlgError:
        try:
            U, s, Vh = scipy.linalg.svd(H, full_matrices=True, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise EigenDecompositionError(f"SVD failed on a {H.shape[0]}x{H.shape[1]} matrix: {exc}") from exc
    return U, s, Vh.conj().T


def inv_sqrt_psd(W: np.ndarray, rel_tol: Optional[float] = None) -> np.ndarray:
    """
    Hermitian inverse square root R = W^(-1/2) of a positive definite matrix.

    Args:
        W: Hermitian positive definite matrix
        rel_tol: Minimum admissible ratio min eigenvalue / max eigenvalue

    Returns:
        Hermitian PSD matrix R with R W R = I

    Raises:
        SingularMatrixError: If W is not numerically positive definite
    """
    rel_tol = settings.inv_sqrt_rel_tol if rel_tol is None else rel_tol
    eigenvalues, U = herm_eig(W)
    largest = eigenvalues[0]
    smallest = eigenvalues[-1]
    if largest <= 0 or smallest <= rel_tol * largest:
        raise SingularMatrixError(
            f"Matrix is not positive definite: eigenvalue range [{smallest:.3e}, {largest:.3e}]"
        )
    return hermitize((U / np.sqrt(eigenvalues)) @ U.conj().T)


def nonpos_eigenmodes(A: np.ndarray, rel_tol: Optional[float] = None) -> np.ndarray:
    """
    Collect the non-positive eigenmodes of a Hermitian matrix.

    An eigenvalue counts as non-positive when it is at most
    rel_tol * max(1, ||A||). The dropped modes are returned with flipped sign,
    S = sum over dropped k of max(-lambda_k, 0) u_k u_k^H, so that -S is the
    non-positive part of A and A + S is PSD. Exact zeros are dropped and
    contribute nothing.

    Args:
        A: Hermitian matrix
        rel_tol: Relative threshold; defaults to settings.eig_rel_tol

    Returns:
        PSD matrix S of the same order as A
    """
    rel_tol = settings.eig_rel_tol if rel_tol is None else rel_tol
    eigenvalues, U = herm_eig(A)
    threshold = rel_tol * max(1.0, _spectral_norm(eigenvalues))
    dropped = eigenvalues <= threshold
    weights = np.where(dropped, np.maximum(-eigenvalues, 0.0), 0.0)
    return hermitize((U * weights) @ U.conj().T)


def psd_repair(Q: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
    """
    Clip tiny negative eigenvalues of an almost-PSD Hermitian matrix to zero.

    Args:
        Q: Hermitian matrix expected to be PSD up to rounding
        tol: Relative tolerance; eigenvalues below -tol * max(1, ||Q||) are an error

    Returns:
        PSD matrix within tol * max(1, ||Q||) of Q (Q itself if already PSD)

    Raises:
        NotNearPsdError: If Q has a significantly negative eigenvalue
    """
    tol = settings.psd_repair_tol if tol is None else tol
    Q = hermitize(Q)
    if Q.size == 0:
        return Q
    eigenvalues, U = herm_eig(Q)
    threshold = tol * max(1.0, _spectral_norm(eigenvalues))
    if eigenvalues[-1] < -threshold:
        raise NotNearPsdError(float(eigenvalues[-1]), threshold)
    if eigenvalues[-1] >= 0:
        return Q
    return hermitize((U * np.maximum(eigenvalues, 0.0)) @ U.conj().T)


def logdet_hpd(A: np.ndarray) -> float:
    """
    Natural log-determinant of a Hermitian positive definite matrix.

    Raises:
        SingularMatrixError: If the Cholesky factorization fails
    """
    try:
        factor, _ = scipy.linalg.cho_factor(hermitize(A), lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"log-det of a matrix that is not positive definite: {exc}") from exc
    return float(2.0 * np.sum(np.log(np.real(np.diag(factor)))))


def min_eigenvalue(A: np.ndarray) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    return float(scipy.linalg.eigvalsh(hermitize(A))[0])


def max_eigenvalue(A: np.ndarray) -> float:
    """Largest eigenvalue of a Hermitian matrix."""
    return float(scipy.linalg.eigvalsh(hermitize(A))[-1])
