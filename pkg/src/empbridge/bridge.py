"""Empirical bridge, empirical Lorentz curve, and the estimated kernel.

The bridge is the residual partial-sum process, linearly interpolated,
centered by its endpoint and normalized by sigma_hat * sqrt(n); the unknown
error scale cancels algebraically, so it is computable from data alone.
The estimated covariance kernel combines the centered empirical Lorentz
curve with the second-moment matrix of the covariates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateResiduals, OutOfDomain
from .linalg import as_matrix, as_vector, cholesky
from .model import RegressionFit

# Arguments within this distance of a node k/n (measured in units of 1/n)
# snap to the node, so grid points like 1/3 that are not exactly
# representable evaluate deterministically.
NODE_SNAP = 1e-9


@dataclass(frozen=True, eq=False)
class BridgeProcess:
    """Piecewise-linear function with nodes at k/n, pinned to 0 at both ends."""

    n: int
    node_values: np.ndarray

    def __post_init__(self):
        values = as_vector(self.node_values)
        if values.shape[0] != self.n + 1:
            raise ValueError(
                f"expected {self.n + 1} node values, got {values.shape[0]}"
            )
        if values[0] != 0.0 or values[self.n] != 0.0:
            raise ValueError("bridge must be exactly 0 at t=0 and t=1")
        object.__setattr__(self, "node_values", values)

    def evaluate(self, t: float) -> float:
        """Linear interpolation between adjacent nodes."""
        if not 0.0 <= t <= 1.0:
            raise OutOfDomain(f"bridge argument t={t} outside [0, 1]")
        u = t * self.n
        k = int(math.floor(u))
        if k >= self.n:
            return float(self.node_values[self.n])
        lam = u - k
        return float(
            (1.0 - lam) * self.node_values[k] + lam * self.node_values[k + 1]
        )


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Empirical Lorentz node values at k/n (rows) and the covariate
    second-moment matrix, evaluable together as the estimated kernel."""

    lorentz_nodes: np.ndarray
    g: np.ndarray
    n: int
    m: int


def partial_sums(residuals) -> np.ndarray:
    """Running sums with a leading zero: out[k] = residuals[0] + ... + residuals[k-1]."""
    return _kernels.active.partial_sums(as_vector(residuals))


def empirical_bridge(fit: RegressionFit) -> BridgeProcess:
    """Bridge nodes (sum_k - (k/n) sum_n) / (sigma_hat sqrt(n)) from a fit."""
    if fit.sigma_hat2 == 0.0:
        raise DegenerateResiduals(
            "all residuals are zero (perfect fit); the bridge is undefined"
        )
    nodes = _kernels.active.bridge_nodes(
        as_vector(fit.residuals), math.sqrt(fit.sigma_hat2)
    )
    return BridgeProcess(n=fit.n, node_values=nodes)


def lorentz_curve(x) -> np.ndarray:
    """Node matrix of the empirical induced Lorentz curve.

    Row k holds the column-wise sum of the first k rows of ``x`` divided
    by n, for k = 0..n.  ``x`` must come from an ordered dataset for the
    curve to mean anything.
    """
    return _kernels.active.prefix_means(as_matrix(x))


def g_hat(x) -> np.ndarray:
    """Second-moment matrix X.T X / n, exactly symmetric."""
    xm = as_matrix(x)
    return _kernels.active.gram(xm) / xm.shape[0]


def covariance_model(x) -> CovarianceModel:
    """Bundle the Lorentz nodes and second-moment matrix of a design."""
    xm = as_matrix(x)
    n, m = xm.shape
    return CovarianceModel(
        lorentz_nodes=lorentz_curve(xm), g=g_hat(xm), n=n, m=m
    )


def _node_index(t: float, n: int) -> int:
    # Floor convention [n t], with a snap to the nearest node to avoid
    # floating-point flicker at arguments that are nodes mathematically.
    u = t * n
    r = round(u)
    k = int(r) if abs(u - r) < NODE_SNAP else int(math.floor(u))
    return min(k, n)


def lorentz_at(cm: CovarianceModel, t: float) -> np.ndarray:
    """Empirical Lorentz curve at ``t`` under the floor convention (step
    function between nodes, unlike the interpolated bridge)."""
    if not 0.0 <= t <= 1.0:
        raise OutOfDomain(f"Lorentz argument t={t} outside [0, 1]")
    return cm.lorentz_nodes[_node_index(t, cm.n)]


def k0_hat(cm: CovarianceModel, s: float, t: float) -> float:
    """Estimated limiting covariance of the bridge at (s, t).

    min(s,t) - s*t - L0(s) @ inv(G) @ L0(t), with L0(u) = L(u) - u L(1),
    computed by factor-and-solve on the second-moment matrix.
    """
    l_one = cm.lorentz_nodes[cm.n]
    l0_s = lorentz_at(cm, s) - s * l_one
    l0_t = lorentz_at(cm, t) - t * l_one
    lower = cholesky(cm.g)
    w_s = _kernels.active.forward_solve(lower, l0_s)
    w_t = _kernels.active.forward_solve(lower, l0_t)
    return float(min(s, t) - s * t - w_s @ w_t)


def write_bridge_tsv(b: BridgeProcess, path) -> None:
    """Write the bridge path as two tab-separated columns t and z0, one row
    per node, 17 significant digits (lossless for replotting)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t\tz0\n")
        for k in range(b.n + 1):
            fh.write(f"{k / b.n:.17g}\t{b.node_values[k]:.17g}\n")
