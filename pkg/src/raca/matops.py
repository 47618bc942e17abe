"""Complex linear algebra used throughout the package.

Matrices are ``numpy`` arrays of dtype ``complex128``.  Every function also
accepts stacks of matrices with arbitrary leading batch dimensions, which is
how Monte Carlo trials are processed together.

Explicit inverses are never formed; ``A^{-1} B`` for Hermitian positive
definite ``A`` goes through a Cholesky check followed by a solve, so that a
covariance matrix that lost definiteness fails loudly.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.linalg import lapack

__all__ = [
    "NumericError",
    "NotHermitianError",
    "NotPositiveDefiniteError",
    "SvdResult",
    "ct",
    "as_matrix",
    "hermitian_part",
    "cholesky",
    "hermitian_solve",
    "logdet_hermitian",
    "hermitian_eig",
    "svd",
    "fro2",
]

HERMITIAN_TOL = 1e-12
PSD_CLAMP = -1e-12


class NumericError(ArithmeticError):
    """A decomposition failed or produced non-finite output."""


class NotHermitianError(NumericError):
    pass


class NotPositiveDefiniteError(NumericError):
    """Cholesky factorization hit a non-positive pivot.

    ``pivot`` is the zero-based index of the failing leading minor and
    ``index`` the batch position of the offending matrix (``()`` if unbatched).
    """

    def __init__(self, pivot: int, index: tuple = ()):
        where = f" in batch element {index}" if index else ""
        super().__init__(f"matrix is not positive definite (leading minor {pivot} failed){where}")
        self.pivot = pivot
        self.index = index


class SvdResult(NamedTuple):
    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray


def ct(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def fro2(a: np.ndarray) -> np.ndarray:
    """Squared Frobenius norm over the last two axes."""
    return np.sum(a.real**2 + a.imag**2, axis=(-2, -1))


def as_matrix(a) -> np.ndarray:
    """Coerce ``a`` to a finite complex128 array of matrices."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim < 2:
        raise ValueError(f"expected a matrix, got shape {m.shape}")
    if m.shape[-2] < 1 or m.shape[-1] < 1:
        raise ValueError(f"matrix dimensions must be positive, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + ct(a))


def _check_hermitian(a: np.ndarray) -> np.ndarray:
    if a.shape[-1] != a.shape[-2]:
        raise NotHermitianError(f"matrix is not square: {a.shape}")
    scale = np.maximum(np.max(np.abs(a), axis=(-2, -1)), np.finfo(float).tiny)
    if np.any(np.max(np.abs(a - ct(a)), axis=(-2, -1)) > HERMITIAN_TOL * scale):
        raise NotHermitianError("matrix is not Hermitian within tolerance")
    return hermitian_part(a)


def _locate_failure(a: np.ndarray) -> NotPositiveDefiniteError:
    flat = a.reshape(-1, *a.shape[-2:])
    for k, m in enumerate(flat):
        _, info = lapack.zpotrf(m, lower=1)
        if info > 0:
            index = np.unravel_index(k, a.shape[:-2]) if a.ndim > 2 else ()
            return NotPositiveDefiniteError(info - 1, tuple(int(i) for i in index))
    return NotPositiveDefiniteError(-1)


def cholesky(a) -> np.ndarray:
    """Lower Cholesky factor(s) of Hermitian positive definite matrices."""
    a = _check_hermitian(as_matrix(a))
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise _locate_failure(a) from None


def hermitian_solve(a, b) -> np.ndarray:
    """Solve ``A X = B`` for Hermitian positive definite ``A``."""
    a = _check_hermitian(as_matrix(a))
    c = cholesky(a)
    b = np.asarray(b, dtype=np.complex128)
    # forward/back substitution through the Cholesky factor
    y = np.linalg.solve(c, b)
    return np.linalg.solve(ct(c), y)


def logdet_hermitian(a, base: float | None = None):
    """Log-determinant of Hermitian positive definite matrices.

    Natural log by default; ``base=2`` gives bits.
    """
    c = cholesky(a)
    value = 2.0 * np.sum(np.log(np.diagonal(c, axis1=-2, axis2=-1).real), axis=-1)
    if base is not None:
        value = value / np.log(base)
    return float(value) if np.ndim(value) == 0 else value


def hermitian_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of Hermitian PSD matrices, eigenvalues descending.

    Eigenvalues in ``[-1e-12, 0)`` (relative to the largest magnitude, floor
    one) are clamped to zero; anything more negative is rejected.
    """
    a = _check_hermitian(as_matrix(a))
    lam, u = np.linalg.eigh(a)
    lam = lam[..., ::-1]
    u = u[..., ::-1]
    scale = np.maximum(np.max(np.abs(lam), axis=-1), 1.0)
    if np.any(lam[..., -1] < PSD_CLAMP * scale):
        raise NumericError(f"matrix is not positive semidefinite (eigenvalue {np.min(lam):.3e})")
    return u, np.maximum(lam, 0.0)


def svd(a) -> SvdResult:
    """Full SVD ``A = U diag(s) V^H`` with singular values descending."""
    a = as_matrix(a)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc
    return SvdResult(u, s, ct(vh))
