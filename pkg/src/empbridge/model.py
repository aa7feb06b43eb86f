"""Datasets, concomitant ordering, and least-squares fitting."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import InvalidDataset, MissingOrderKey, NotPositiveDefinite, RankDeficient
from .linalg import as_matrix, as_vector, solve_spd


@dataclass(frozen=True, eq=False)
class Dataset:
    """Covariate matrix ``x`` (n rows, m columns), response ``y`` (length n),
    and an optional ordering variable ``order_key``.

    The same type represents the data before and after sorting by the key;
    ``ordered`` records which state it is in.  Arrays are treated as
    immutable once the dataset is built.
    """

    x: np.ndarray
    y: np.ndarray
    order_key: np.ndarray | None = None
    ordered: bool = False

    def __post_init__(self):
        try:
            x = as_matrix(self.x)
            y = as_vector(self.y)
            key = None if self.order_key is None else as_vector(self.order_key)
        except ValueError as exc:
            raise InvalidDataset(str(exc)) from exc
        n, m = x.shape
        if y.shape[0] != n:
            raise InvalidDataset(f"y has length {y.shape[0]}, expected {n}")
        if key is not None and key.shape[0] != n:
            raise InvalidDataset(
                f"order_key has length {key.shape[0]}, expected {n}"
            )
        if n < 2:
            raise InvalidDataset(f"need at least 2 rows, got {n}")
        if n < m + 1:
            raise InvalidDataset(f"need n >= m+1 rows, got n={n}, m={m}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "order_key", key)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True, eq=False)
class RegressionFit:
    """Least-squares estimate with residuals and the variance estimate
    sigma_hat2 = sum(residuals**2) / n (divisor n, not n-m)."""

    theta_hat: np.ndarray
    residuals: np.ndarray
    sigma_hat2: float
    n: int
    m: int


def order_by_key(d: Dataset) -> Dataset:
    """Sort rows so the order key is nondecreasing, carrying x and y along.

    Ties keep their original relative order (stable sort); the test's
    asymptotics assume a continuous ordering variable, where ties have
    probability zero.
    """
    if d.order_key is None:
        raise MissingOrderKey("dataset has no order_key to sort by")
    perm = np.argsort(d.order_key, kind="stable")
    return Dataset(
        x=d.x[perm], y=d.y[perm], order_key=d.order_key[perm], ordered=True
    )


def add_intercept(d: Dataset) -> Dataset:
    """Append an all-ones column as the last covariate."""
    ones = np.ones((d.n, 1))
    return replace(d, x=np.hstack([d.x, ones]))


def fit_lse(d: Dataset) -> RegressionFit:
    """Fit theta by solving the normal equations (X.T X) theta = X.T y.

    The estimate does not depend on row order, so this may be called on
    ordered or unordered data.  Raises RankDeficient when X.T X is
    numerically singular.
    """
    if d.m == 0:
        raise InvalidDataset(
            "cannot fit a design with zero covariates; add an intercept first"
        )
    xtx = _kernels.active.gram(d.x)
    xty = d.x.T @ d.y
    try:
        theta = solve_spd(xtx, xty)
    except NotPositiveDefinite as exc:
        raise RankDeficient(
            "design matrix is rank deficient (X.T X is numerically singular)"
        ) from exc
    residuals = d.y - d.x @ theta
    sigma_hat2 = float(residuals @ residuals) / d.n
    return RegressionFit(
        theta_hat=theta,
        residuals=residuals,
        sigma_hat2=sigma_hat2,
        n=d.n,
        m=d.m,
    )
