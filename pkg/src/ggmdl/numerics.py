"""Dense linear-algebra kernels shared by the rest of the package.

Matrices are plain ``numpy`` arrays. Anything declared symmetric is
symmetrized as ``(M + M.T) / 2`` on the way in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "NotPositiveDefinite",
    "DimensionMismatch",
    "SpdFactor",
    "as_matrix",
    "symmetrize",
    "cholesky",
    "log_det_spd",
    "solve_spd",
    "sample_covariance",
]

SYMMETRY_TOL = 1e-10


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot is not strictly positive."""


class DimensionMismatch(ValueError):
    """Raised when operand shapes are incompatible."""


@dataclass(frozen=True)
class SpdFactor:
    """Lower Cholesky factor ``L`` with ``L @ L.T`` equal to the source matrix."""

    lower: np.ndarray

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.lower @ self.lower.T


def as_matrix(m, *, square: bool = False) -> np.ndarray:
    a = np.array(m, dtype=float, copy=True)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d array, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def symmetrize(m) -> np.ndarray:
    a = as_matrix(m, square=True)
    return 0.5 * (a + a.T)


def cholesky(m) -> SpdFactor:
    """Cholesky factor of a symmetric positive-definite matrix.

    Raises
    ------
    ValueError
        If ``m`` is not symmetric within ``1e-10``.
    NotPositiveDefinite
        If a non-positive pivot is met.
    """
    a = as_matrix(m, square=True)
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_TOL:
        raise ValueError("cholesky input is not symmetric")
    a = 0.5 * (a + a.T)
    try:
        lower = scipy.linalg.cholesky(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    if np.any(np.diag(lower) <= 0.0):
        raise NotPositiveDefinite("non-positive pivot")
    return SpdFactor(lower)


def log_det_spd(f: SpdFactor) -> float:
    """Natural log-determinant of ``L @ L.T``."""
    return 2.0 * float(np.sum(np.log(np.diag(f.lower))))


def solve_spd(f: SpdFactor, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.dim:
        raise DimensionMismatch(f"rhs has length {b.shape[0]}, factor is {f.dim}x{f.dim}")
    return scipy.linalg.cho_solve((f.lower, True), b, check_finite=False)


def sample_covariance(x) -> np.ndarray:
    """Zero-mean sample covariance ``(1/N) * X.T @ X``.

    The mean is not subtracted: data are modeled as N(0, Sigma).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise DimensionMismatch(f"expected an N x p array with N >= 1, got shape {x.shape}")
    s = x.T @ x / x.shape[0]
    return 0.5 * (s + s.T)
