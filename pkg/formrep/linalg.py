"""Numerical kernels shared by the form, linearization and canonical modules."""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.linalg as la

INVERTIBILITY_THRESHOLD = 1e-10


class RankAmbiguityError(ArithmeticError):
    """Raised when a singular value falls inside the ambiguity band of a rank decision."""

    def __init__(self, message: str, singular_values: Optional[np.ndarray] = None) -> None:
        super().__init__(message)
        self.singular_values = singular_values


def as_complex_matrix(data, rows: Optional[int] = None, cols: Optional[int] = None) -> np.ndarray:
    """Return a finite complex128 2-D array.

    Empty input becomes a (rows, cols) matrix only when that shape has no entries.
    """

    matrix = np.asarray(data, dtype=np.complex128)
    if matrix.size == 0 and rows is not None and cols is not None and rows * cols == 0:
        return np.zeros((rows, cols), dtype=np.complex128)
    if matrix.ndim != 2:
        raise ValueError(f"Expected a 2-D matrix, got shape {matrix.shape}.")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("Matrix contains NaN or infinite entries.")
    return matrix


def as_complex_vector(data, length: Optional[int] = None) -> np.ndarray:
    vector = np.asarray(data, dtype=np.complex128).reshape(-1)
    if length is not None and vector.shape[0] != length:
        raise ValueError(f"Expected a vector of length {length}, got {vector.shape[0]}.")
    return vector


def frozen(matrix: np.ndarray) -> np.ndarray:
    """Copy and mark read-only."""

    copy = np.array(matrix, dtype=np.complex128, copy=True)
    copy.setflags(write=False)
    return copy


def max_abs(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(matrix)))


def singular_values(matrix: np.ndarray) -> np.ndarray:
    if matrix.size == 0:
        return np.zeros(0)
    return la.svd(matrix, compute_uv=False)


def is_invertible(matrix: np.ndarray, threshold: float = INVERTIBILITY_THRESHOLD) -> bool:
    """Smallest singular value must exceed threshold * max(1, largest singular value)."""

    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    if matrix.shape[0] == 0:
        return True
    sv = singular_values(matrix)
    return bool(sv[-1] > threshold * max(1.0, sv[0]))


def condition_number(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 1.0
    sv = singular_values(matrix)
    if sv[-1] == 0.0:
        return float("inf")
    return float(sv[0] / sv[-1])


def column_independence(columns: np.ndarray) -> float:
    """Smallest singular value of the column matrix relative to its largest column norm."""

    if columns.shape[1] == 0:
        return float("inf")
    scale = float(np.max(np.linalg.norm(columns, axis=0)))
    if scale == 0.0:
        return 0.0
    sv = singular_values(columns)
    if sv.shape[0] < columns.shape[1]:
        return 0.0
    return float(sv[-1] / scale)


def numerical_rank(
    matrix: np.ndarray,
    threshold: float,
    band: float = 1.0,
    scale: Optional[float] = None,
) -> int:
    """Count singular values above threshold * scale.

    With band > 1 any singular value in (cut / band, cut * band] makes the
    decision ambiguous and raises RankAmbiguityError.
    """

    if matrix.size == 0:
        return 0
    sv = singular_values(matrix)
    if scale is None:
        scale = max(1.0, float(sv[0]))
    cut = threshold * scale
    if band > 1.0:
        ambiguous = (sv > cut / band) & (sv <= cut * band)
        if np.any(ambiguous):
            raise RankAmbiguityError(
                f"Singular value {sv[ambiguous][0]:.3e} too close to rank cut {cut:.3e}.",
                singular_values=sv,
            )
    return int(np.count_nonzero(sv > cut))


def null_basis(
    matrix: np.ndarray,
    threshold: float,
    band: float = 1.0,
    scale: Optional[float] = None,
) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical right null space."""

    cols = matrix.shape[1]
    if cols == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    if matrix.shape[0] == 0:
        return np.eye(cols, dtype=np.complex128)
    rank = numerical_rank(matrix, threshold, band, scale)
    _, _, vh = la.svd(matrix)
    return vh[rank:].conj().T


def orthonormal_complement(basis: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis of the Hermitian orthogonal complement of span(basis)."""

    if basis.size == 0 or basis.shape[1] == 0:
        return np.eye(dim, dtype=np.complex128)
    return la.null_space(basis.conj().T)


def random_complex(rng: np.random.Generator, shape: Sequence[int] | int) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    q, r = la.qr(random_complex(rng, (n, n)))
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def block_diag(blocks: Iterable[np.ndarray]) -> np.ndarray:
    parts = [np.asarray(block, dtype=np.complex128) for block in blocks]
    if not parts:
        return np.zeros((0, 0), dtype=np.complex128)
    return la.block_diag(*parts).astype(np.complex128)
