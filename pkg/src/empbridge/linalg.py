"""Minimal dense SPD linear algebra: factor, solve, quadratic forms.

Every inverse application in the test pipeline is realized as
factor-and-solve; no explicit matrix inverse is ever formed.  Degeneracy
surfaces in exactly one place, :class:`~empbridge.errors.NotPositiveDefinite`.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import NotPositiveDefinite

SYMMETRY_RTOL = 1e-10


def as_matrix(a) -> np.ndarray:
    """Coerce to a C-contiguous float64 2-D array with finite entries."""
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"expected a 2-D array, got ndim={out.ndim}")
    if not np.all(np.isfinite(out)):
        raise ValueError("matrix contains NaN or Inf entries")
    return out


def as_vector(v) -> np.ndarray:
    """Coerce to a C-contiguous float64 1-D array with finite entries."""
    out = np.ascontiguousarray(v, dtype=np.float64)
    if out.ndim != 1:
        raise ValueError(f"expected a 1-D array, got ndim={out.ndim}")
    if not np.all(np.isfinite(out)):
        raise ValueError("vector contains NaN or Inf entries")
    return out


def _symmetrized(a: np.ndarray) -> np.ndarray:
    # Asymmetry within tolerance is floating-point noise and gets averaged
    # away; beyond tolerance the caller passed the wrong matrix.
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > SYMMETRY_RTOL * max(scale, 1.0):
        raise ValueError(
            f"matrix is asymmetric beyond tolerance (max deviation {asym:.3e})"
        )
    return np.ascontiguousarray((a + a.T) / 2.0)


def cholesky(a) -> np.ndarray:
    """Lower-triangular L with L @ L.T == a for SPD ``a``.

    Raises NotPositiveDefinite when a pivot falls at or below
    ``rows * eps * max(diag)``, the scale-aware singularity threshold.
    """
    sym = _symmetrized(as_matrix(a))
    lower, status = _kernels.active.cholesky_factor(sym)
    if status:
        raise NotPositiveDefinite(
            f"matrix is not positive definite (pivot {status - 1} "
            "at or below the machine-scaled threshold)"
        )
    return lower


def solve_spd(a, b) -> np.ndarray:
    """Solve a @ x = b for SPD ``a`` via Cholesky factor-and-solve."""
    lower = cholesky(a)
    rhs = as_vector(b)
    if rhs.shape[0] != lower.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix is {lower.shape[0]}x{lower.shape[0]}, "
            f"vector has length {rhs.shape[0]}"
        )
    return _kernels.active.solve_cholesky(lower, rhs)


def quadratic_form_inv(a, v) -> float:
    """v.T @ inv(a) @ v for SPD ``a``, computed without forming inv(a).

    With a = L L.T the form equals ||L^-1 v||^2, so the result is
    nonnegative by construction.
    """
    lower = cholesky(a)
    vec = as_vector(v)
    if vec.shape[0] != lower.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix is {lower.shape[0]}x{lower.shape[0]}, "
            f"vector has length {vec.shape[0]}"
        )
    w = _kernels.active.forward_solve(lower, vec)
    return float(w @ w)
