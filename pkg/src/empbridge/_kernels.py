"""Hot numeric kernels with two interchangeable backends.

The per-replicate pipeline (partial sums, bridge nodes, Lorentz prefix
means, Gram matrices, small SPD factorizations) dominates Monte Carlo
runtime, so these functions exist in a numba-compiled variant and a
pure-numpy variant.  Selection happens once at import time via::

    EMPBRIDGE_BACKEND = auto | numba | numpy      (default: auto)

``auto`` compiles with numba when it is importable and silently falls back
to numpy otherwise; ``numba`` fails loudly if numba is missing.

The small dense factorizations (Cholesky, triangular solves) share one
source in both backends so the scale-aware positive-definiteness threshold
is identical; only the O(n) array kernels have separate vectorized
fallbacks.  ``benchmarks/backend_bench.py`` compares the two.
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

ENV_BACKEND = "EMPBRIDGE_BACKEND"

_EPS = float(np.finfo(np.float64).eps)


# ---------------------------------------------------------------------------
# Loop kernels: compiled under the numba backend, interpreted under numpy.
# ---------------------------------------------------------------------------

def _cholesky_factor(a):
    # Banachiewicz ordering.  A pivot is rejected when it drops to or below
    # rows * eps * max(diag), a scale-aware singularity threshold.
    m = a.shape[0]
    lower = np.zeros((m, m))
    max_diag = 0.0
    for i in range(m):
        if a[i, i] > max_diag:
            max_diag = a[i, i]
    thresh = m * 2.220446049250313e-16 * max_diag
    for j in range(m):
        s = a[j, j]
        for k in range(j):
            s -= lower[j, k] * lower[j, k]
        if not (s > thresh):
            return lower, j + 1
        d = math.sqrt(s)
        lower[j, j] = d
        for i in range(j + 1, m):
            t = a[i, j]
            for k in range(j):
                t -= lower[i, k] * lower[j, k]
            lower[i, j] = t / d
    return lower, 0


def _forward_solve(lower, b):
    # Solves L y = b for lower-triangular L.
    m = lower.shape[0]
    y = np.empty(m)
    for i in range(m):
        s = b[i]
        for k in range(i):
            s -= lower[i, k] * y[k]
        y[i] = s / lower[i, i]
    return y


def _solve_cholesky(lower, b):
    # Solves (L L^T) x = b by forward then back substitution.
    m = lower.shape[0]
    y = np.empty(m)
    for i in range(m):
        s = b[i]
        for k in range(i):
            s -= lower[i, k] * y[k]
        y[i] = s / lower[i, i]
    x = np.empty(m)
    for i in range(m - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, m):
            s -= lower[k, i] * x[k]
        x[i] = s / lower[i, i]
    return x


def _partial_sums_loop(residuals):
    n = residuals.shape[0]
    out = np.empty(n + 1)
    out[0] = 0.0
    acc = 0.0
    for i in range(n):
        acc += residuals[i]
        out[i + 1] = acc
    return out


def _bridge_nodes_loop(residuals, sigma_hat):
    n = residuals.shape[0]
    out = np.empty(n + 1)
    out[0] = 0.0
    acc = 0.0
    for i in range(n):
        acc += residuals[i]
        out[i + 1] = acc
    total = acc
    scale = sigma_hat * math.sqrt(n)
    for k in range(1, n):
        out[k] = (out[k] - (k / n) * total) / scale
    out[0] = 0.0
    out[n] = 0.0
    return out


def _prefix_means_loop(x):
    n, m = x.shape
    out = np.empty((n + 1, m))
    for j in range(m):
        out[0, j] = 0.0
    for i in range(n):
        for j in range(m):
            out[i + 1, j] = out[i, j] + x[i, j]
    for i in range(n + 1):
        for j in range(m):
            out[i, j] /= n
    return out


def _gram_loop(x):
    n, m = x.shape
    out = np.zeros((m, m))
    for i in range(n):
        for j in range(m):
            xij = x[i, j]
            for k in range(j, m):
                out[j, k] += xij * x[i, k]
    for j in range(m):
        for k in range(j + 1, m):
            out[k, j] = out[j, k]
    return out


# ---------------------------------------------------------------------------
# Vectorized numpy fallbacks for the O(n) kernels.
# ---------------------------------------------------------------------------

def _partial_sums_numpy(residuals):
    out = np.empty(residuals.shape[0] + 1)
    out[0] = 0.0
    np.cumsum(residuals, out=out[1:])
    return out


def _bridge_nodes_numpy(residuals, sigma_hat):
    n = residuals.shape[0]
    out = _partial_sums_numpy(residuals)
    out -= (np.arange(n + 1) / n) * out[n]
    out /= sigma_hat * math.sqrt(n)
    out[0] = 0.0
    out[n] = 0.0
    return out


def _prefix_means_numpy(x):
    n, m = x.shape
    out = np.empty((n + 1, m))
    out[0] = 0.0
    np.cumsum(x, axis=0, out=out[1:])
    out /= n
    return out


def _gram_numpy(x):
    a = x.T @ x
    return (a + a.T) / 2.0


# ---------------------------------------------------------------------------
# Backend assembly.
# ---------------------------------------------------------------------------

NUMPY_KERNELS = SimpleNamespace(
    name="numpy",
    cholesky_factor=_cholesky_factor,
    forward_solve=_forward_solve,
    solve_cholesky=_solve_cholesky,
    partial_sums=_partial_sums_numpy,
    bridge_nodes=_bridge_nodes_numpy,
    prefix_means=_prefix_means_numpy,
    gram=_gram_numpy,
)


def _build_numba_kernels():
    from numba import njit

    jit = lambda fn: njit(cache=True, nogil=True)(fn)  # noqa: E731
    return SimpleNamespace(
        name="numba",
        cholesky_factor=jit(_cholesky_factor),
        forward_solve=jit(_forward_solve),
        solve_cholesky=jit(_solve_cholesky),
        partial_sums=jit(_partial_sums_loop),
        bridge_nodes=jit(_bridge_nodes_loop),
        prefix_means=jit(_prefix_means_loop),
        gram=jit(_gram_loop),
    )


def _resolve_active():
    choice = os.environ.get(ENV_BACKEND, "auto").strip().lower() or "auto"
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"{ENV_BACKEND} must be 'auto', 'numba' or 'numpy', got {choice!r}"
        )
    if choice == "numpy":
        return NUMPY_KERNELS
    try:
        return _build_numba_kernels()
    except ImportError:
        if choice == "numba":
            raise RuntimeError(
                f"{ENV_BACKEND}=numba requested but numba is not importable"
            ) from None
        return NUMPY_KERNELS


active = _resolve_active()


def backend_name() -> str:
    """Name of the kernel backend selected at import time."""
    return active.name


def get_kernels(name: str):
    """Return a specific kernel namespace, independent of the active one."""
    if name == "numpy":
        return NUMPY_KERNELS
    if name == "numba":
        return _build_numba_kernels()
    raise ValueError(f"unknown backend {name!r}")
