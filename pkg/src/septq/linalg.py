"""Dense float64 matrix kernels with a fixed summation order.

Every reduction here accumulates over the inner index in ascending order
using element-wise numpy operations only, so results are bit-reproducible
and never depend on a BLAS backend's blocking or threading.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LinalgError(ValueError):
    pass


class DimensionMismatchError(LinalgError):
    pass


class SingularHessianError(LinalgError):
    pass


class NotPositiveDefiniteError(LinalgError):
    def __init__(self, pivot: int, value: float):
        super().__init__(f"matrix is not positive definite: pivot {pivot} = {value!r}")
        self.pivot = pivot
        self.value = value


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array with at least one row and column."""
    m = np.array(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionMismatchError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise LinalgError(f"{name} has non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    """a @ b, summing the inner index left to right for every output entry."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionMismatchError("matmul expects 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatchError(f"cannot multiply {a.shape} by {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]))
    for k in range(a.shape[1]):
        out += a[:, k : k + 1] * b[k : k + 1, :]
    return out


def hessian(x, damping_frac: float = 0.01) -> np.ndarray:
    """Damped layer Hessian ``2 X X^T + lam I`` with ``lam = damping_frac * mean(diag(2 X X^T))``.

    Only the upper triangle is computed; the lower triangle is a mirror, so the
    result is exactly symmetric.
    """
    x = as_matrix(x, "calibration set")
    if damping_frac < 0:
        raise ValueError("damping_frac must be >= 0")
    if not np.any(x):
        raise SingularHessianError("calibration set is all zero; Hessian is singular")
    d = x.shape[0]
    h = np.zeros((d, d))
    for r in range(d):
        acc = np.zeros(d - r)
        for k in range(x.shape[1]):
            acc += x[r, k] * x[r:, k]
        h[r, r:] = 2.0 * acc
    iu = np.triu_indices(d, 1)
    h[(iu[1], iu[0])] = h[iu]
    lam = damping_frac * float(np.mean(np.diag(h)))
    h[np.diag_indices(d)] += lam
    return h


@dataclass(frozen=True)
class SpdFactor:
    """Upper Cholesky factor ``U`` with ``U^T U`` equal to the factored matrix."""

    upper: np.ndarray

    @property
    def dim(self) -> int:
        return self.upper.shape[0]

    def reconstruct(self) -> np.ndarray:
        return matmul(self.upper.T, self.upper)


def _check_square(h: np.ndarray) -> np.ndarray:
    h = as_matrix(h)
    if h.shape[0] != h.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got {h.shape}")
    return h


def cholesky(h) -> SpdFactor:
    """Right-looking upper Cholesky; reads the upper triangle of ``h`` only."""
    a = _check_square(h).copy()
    n = a.shape[0]
    u = np.zeros((n, n))
    for k in range(n):
        pivot = a[k, k]
        if not pivot > 0.0:
            raise NotPositiveDefiniteError(k, float(pivot))
        d = np.sqrt(pivot)
        u[k, k] = d
        row = a[k, k + 1 :] / d
        u[k, k + 1 :] = row
        # only the upper triangle of the trailing block is ever read back
        a[k + 1 :, k + 1 :] -= np.multiply.outer(row, row)
    return SpdFactor(u)


def solve_lower(l: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Forward substitution for lower-triangular ``l``."""
    y = np.array(b, dtype=np.float64, copy=True)
    n = l.shape[0]
    for i in range(n):
        y[i] /= l[i, i]
        if i + 1 < n:
            y[i + 1 :] -= np.multiply.outer(l[i + 1 :, i], y[i])
    return y


def solve_upper(u: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Back substitution for upper-triangular ``u``."""
    z = np.array(b, dtype=np.float64, copy=True)
    for i in range(u.shape[0] - 1, -1, -1):
        z[i] /= u[i, i]
        if i > 0:
            z[:i] -= np.multiply.outer(u[:i, i], z[i])
    return z


def spd_inverse(h) -> np.ndarray:
    """Inverse of an SPD matrix via its Cholesky factor and two triangular solves.

    The result is symmetrized by mirroring its upper triangle.
    """
    u = cholesky(h).upper
    n = u.shape[0]
    inv = solve_upper(u, solve_lower(u.T, np.eye(n)))
    iu = np.triu_indices(n, 1)
    inv[(iu[1], iu[0])] = inv[iu]
    return inv
