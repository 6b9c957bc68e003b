"""Dense SVD-based primitives: truncation, truncated pseudo-inverse,
minimum-norm least squares and best rank-r approximation error.

Matrices are plain 2-D float ``numpy`` arrays; nothing here mutates its
inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from factorate.errors import DimensionError, RangeError, ValidationError

# relative cutoff for pseudo-inverse when the caller gives none
DEFAULT_RELATIVE_TOL = 1e-10


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate and coerce to a finite 2-D float array."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name} is empty (shape {arr.shape})")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``m = u @ diag(s) @ v.T`` with ``s`` nonincreasing.

    Columns of ``u`` follow a sign convention: the first entry with
    magnitude above 1e-12 is nonnegative, and the matching column of ``v``
    is flipped along with it.
    """

    s: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape[0], self.v.shape[0]

    def __len__(self) -> int:
        return len(self.s)

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T


def svd(m) -> SvdFactors:
    arr = as_matrix(m)
    u, s, vt = np.linalg.svd(arr, full_matrices=False)
    v = vt.T
    for j in range(u.shape[1]):
        col = u[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
            v[:, j] = -v[:, j]
    return SvdFactors(s=s, u=u, v=v)


def _check_k(f: SvdFactors, k: int) -> None:
    if k < 0:
        raise RangeError(f"rank must be nonnegative, got {k}")
    if k > len(f.s):
        raise RangeError(f"rank {k} exceeds number of singular values {len(f.s)}")


def truncate(f: SvdFactors, k: int) -> np.ndarray:
    """Best rank-``k`` approximation; ``k = 0`` gives the zero matrix."""
    _check_k(f, k)
    return (f.u[:, :k] * f.s[:k]) @ f.v[:, :k].T


def truncated_pinv(f: SvdFactors, k: int, zero_tol: float | None = None) -> np.ndarray:
    """Pseudo-inverse of the rank-``k`` truncation.

    Singular values at or below ``zero_tol`` are skipped rather than
    inverted. The default cutoff is ``1e-10 * s_1``.
    """
    _check_k(f, k)
    if zero_tol is None:
        zero_tol = DEFAULT_RELATIVE_TOL * (f.s[0] if len(f.s) else 0.0)
    s = f.s[:k]
    keep = s > zero_tol
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (f.v[:, :k] * inv) @ f.u[:, :k].T


def min_norm_least_squares(x, y) -> np.ndarray:
    """Least-squares solution of minimum Euclidean norm, ``x^+ y``."""
    xm = as_matrix(x, "x")
    yv = np.asarray(y, dtype=float).reshape(-1)
    if yv.shape[0] != xm.shape[0]:
        raise DimensionError(f"x has {xm.shape[0]} rows but y has length {yv.shape[0]}")
    f = svd(xm)
    return truncated_pinv(f, len(f.s)) @ yv


def numerical_rank(s: np.ndarray, rel_tol: float = 1e-9) -> int:
    """Count singular values above ``rel_tol * s_1``."""
    s = np.asarray(s, dtype=float)
    if s.size == 0 or s[0] <= 0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def max_error_curve(m, max_rank: int | None = None) -> np.ndarray:
    """Raw max-entrywise truncation error for ranks ``1..max_rank``.

    Entry ``j`` is the error at rank ``j + 1``. Not monotone in general.
    """
    arr = as_matrix(m)
    f = svd(arr)
    max_rank = len(f.s) if max_rank is None else max_rank
    if max_rank < 1 or max_rank > len(f.s):
        raise RangeError(f"rank {max_rank} outside [1, {len(f.s)}]")
    out = np.empty(max_rank)
    approx = np.zeros_like(arr)
    for j in range(max_rank):
        approx += f.s[j] * np.outer(f.u[:, j], f.v[:, j])
        out[j] = np.max(np.abs(arr - approx))
    return out


def best_rank_at_most(m, r: int) -> tuple[int, float]:
    """Rank ``r' <= r`` whose truncation has the smallest max-entry error."""
    curve = max_error_curve(m, r)
    j = int(np.argmin(curve))
    return j + 1, float(curve[j])


def rank_r_max_error(m, r: int) -> float:
    """Upper bound on the best max-norm error of any rank-``r`` approximation.

    Uses SVD truncations at every rank ``r' <= r`` and keeps the smallest
    max-entry error, so the value is nonincreasing in ``r`` and zero at
    full rank.
    """
    arr = as_matrix(m)
    if r < 1 or r > min(arr.shape):
        raise RangeError(f"rank {r} outside [1, {min(arr.shape)}]")
    return best_rank_at_most(arr, r)[1]
