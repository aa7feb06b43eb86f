"""Synthetic data generation, closed-form limit kernels, Monte Carlo runs.

Data are drawn under the null model y = x theta + e (plus an optional
misspecification term for power studies), with rows ordered either by an
unobserved uniform key or by the first covariate.  The closed-form kernels
serve as oracles that the empirical bridge covariance and the chi-square
limit are checked against.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chisq import run_test
from .errors import (
    DegeneracyError,
    InvalidSpec,
    OutOfDomain,
    SingularCovariance,
    UnsupportedSpec,
)
from .linalg import cholesky, solve_spd
from .model import Dataset, add_intercept, fit_lse, order_by_key
from .bridge import empirical_bridge

ENV_THREADS = "EMPBRIDGE_THREADS"

KIND_EXTERNAL = "external-order"
KIND_COVARIATE = "order-by-covariate"

_SQRT3 = math.sqrt(3.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Seeding: replicate r of a run with root seed s uses derive_seed(s, r), a
# SplitMix64 mix, so results are independent of execution order.
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, index: int) -> int:
    """Deterministic 64-bit child seed for one replicate (SplitMix64 mix)."""
    z = (int(seed) + (int(index) + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


# ---------------------------------------------------------------------------
# Standard normal quantile (Wichura's AS 241, double precision) and the
# covariate distribution families.
# ---------------------------------------------------------------------------

def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF; absolute error far below 1e-8 on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise OutOfDomain(f"normal quantile argument p={p} outside (0, 1)")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    value = num / den
    return -value if q < 0.0 else value


def _dist_params(dist, expected: int, err):
    name = dist[0]
    params = tuple(float(p) for p in dist[1:])
    if len(params) != expected:
        raise err(
            f"distribution {name!r} takes {expected} parameter(s), got {len(params)}"
        )
    return params


def _sample_covariate(dist, rng: np.random.Generator, n: int) -> np.ndarray:
    name = dist[0]
    if name == "uniform":
        a, b = _dist_params(dist, 2, InvalidSpec)
        if not b > a:
            raise InvalidSpec(f"uniform({a}, {b}) needs b > a")
        return rng.uniform(a, b, n)
    if name == "normal":
        mu, s = _dist_params(dist, 2, InvalidSpec)
        if not s > 0:
            raise InvalidSpec(f"normal({mu}, {s}) needs s > 0")
        return rng.normal(mu, s, n)
    if name == "exponential":
        (lam,) = _dist_params(dist, 1, InvalidSpec)
        if not lam > 0:
            raise InvalidSpec(f"exponential({lam}) needs rate > 0")
        return rng.exponential(1.0 / lam, n)
    raise InvalidSpec(f"unknown covariate distribution family {name!r}")


def _dist_moments(dist):
    """(mean, second moment, median, L1) of a named covariate family, where
    L1(t) is the integral of the quantile function over [0, t]."""
    name = dist[0]
    if name == "uniform":
        a, b = _dist_params(dist, 2, UnsupportedSpec)

        def l1(t: float) -> float:
            return a * t + (b - a) * t * t / 2.0

        return (a + b) / 2.0, (a * a + a * b + b * b) / 3.0, (a + b) / 2.0, l1
    if name == "normal":
        mu, s = _dist_params(dist, 2, UnsupportedSpec)

        def l1(t: float) -> float:
            # integral of the quantile is -pdf(quantile(t)), scaled
            if t <= 0.0:
                return 0.0
            if t >= 1.0:
                return mu
            z = normal_quantile(t)
            return mu * t - s * _INV_SQRT_2PI * math.exp(-0.5 * z * z)

        return mu, mu * mu + s * s, mu, l1
    if name == "exponential":
        (lam,) = _dist_params(dist, 1, UnsupportedSpec)

        def l1(t: float) -> float:
            if t >= 1.0:
                return 1.0 / lam
            return ((1.0 - t) * math.log1p(-t) + t) / lam

        return 1.0 / lam, 2.0 / (lam * lam), math.log(2.0) / lam, l1
    raise UnsupportedSpec(
        f"no closed-form quantile integral for distribution family {name!r}"
    )


def _sample_errors(name: str, rng: np.random.Generator, n: int) -> np.ndarray:
    # All families are mean zero with unit variance; only those two moments
    # matter for the limit theory.
    if name == "normal":
        return rng.standard_normal(n)
    if name == "uniform":
        return rng.uniform(-_SQRT3, _SQRT3, n)
    if name == "student-t5":
        return rng.standard_t(5, n) * math.sqrt(3.0 / 5.0)
    raise InvalidSpec(f"unknown error distribution {name!r}")


def _poly_value(coeffs, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for c in reversed(coeffs):
        out = out * x + c
    return out


def _poly_integral(coeffs, t: float) -> float:
    total = 0.0
    power = t
    for k, c in enumerate(coeffs):
        total += c * power / (k + 1)
        power *= t
    return total


def _poly_product_integral(a, b) -> float:
    # integral over [0, 1] of the product of two polynomials
    total = 0.0
    for i, ca in enumerate(a):
        for j, cb in enumerate(b):
            total += ca * cb / (i + j + 1)
    return total


# ---------------------------------------------------------------------------
# Model specification.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """Everything needed to draw datasets under the model.

    ``theta`` lists the covariate coefficients, with the intercept
    coefficient last when ``intercept`` is set (matching the design layout
    where the ones column is appended last).  In ``order-by-covariate``
    mode each covariate column is drawn i.i.d. from ``covariate_dist`` and
    the first column is the ordering variable; in ``external-order`` mode
    an unobserved uniform key orders the rows and the covariates are the
    polynomials ``h`` (ascending coefficients) evaluated at the key.
    ``mean_shift`` ("quadratic", amp) or ("changepoint", amp) adds a
    misspecification term in the ordering variable for power studies.
    """

    kind: str
    theta: tuple
    intercept: bool = True
    noise_sd: float = 1.0
    covariate_dist: tuple | None = None
    h: tuple | None = None
    error_dist: str = "normal"
    mean_shift: tuple | None = None

    def __post_init__(self):
        if self.kind not in (KIND_EXTERNAL, KIND_COVARIATE):
            raise InvalidSpec(
                f"kind must be {KIND_EXTERNAL!r} or {KIND_COVARIATE!r}, got {self.kind!r}"
            )
        theta = tuple(float(v) for v in self.theta)
        if not theta:
            raise InvalidSpec("theta must have at least one coefficient")
        object.__setattr__(self, "theta", theta)
        if not self.noise_sd > 0:
            raise InvalidSpec(f"noise_sd must be positive, got {self.noise_sd}")
        if self.n_covariates < 0:
            raise InvalidSpec("theta shorter than the design implied by flags")
        if self.kind == KIND_COVARIATE:
            if self.n_covariates < 1:
                raise InvalidSpec(f"{KIND_COVARIATE} needs at least one covariate")
            if self.covariate_dist is None:
                raise InvalidSpec(f"{KIND_COVARIATE} needs a covariate_dist")
            object.__setattr__(self, "covariate_dist", tuple(self.covariate_dist))
        else:
            h = tuple(tuple(float(c) for c in row) for row in (self.h or ()))
            if len(h) != self.n_covariates:
                raise InvalidSpec(
                    f"{KIND_EXTERNAL} needs one h polynomial per covariate: "
                    f"got {len(h)} for {self.n_covariates} covariate(s)"
                )
            object.__setattr__(self, "h", h)
        if self.mean_shift is not None:
            shift = (str(self.mean_shift[0]),) + tuple(
                float(v) for v in self.mean_shift[1:]
            )
            if shift[0] not in ("quadratic", "changepoint") or len(shift) != 2:
                raise InvalidSpec(
                    f"mean_shift must be ('quadratic', amp) or ('changepoint', amp), "
                    f"got {self.mean_shift!r}"
                )
            object.__setattr__(self, "mean_shift", shift)

    @property
    def n_covariates(self) -> int:
        return len(self.theta) - (1 if self.intercept else 0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "theta": list(self.theta),
            "intercept": self.intercept,
            "noise_sd": self.noise_sd,
            "covariate_dist": None if self.covariate_dist is None else list(self.covariate_dist),
            "h": None if self.h is None else [list(row) for row in self.h],
            "error_dist": self.error_dist,
            "mean_shift": None if self.mean_shift is None else list(self.mean_shift),
        }


def _key_median(spec: ModelSpec) -> float:
    if spec.kind == KIND_EXTERNAL:
        return 0.5
    return _dist_moments(spec.covariate_dist)[2]


def generate_dataset(spec: ModelSpec, n: int, seed: int) -> Dataset:
    """One synthetic dataset; bit-identical for a fixed (spec, n, seed)."""
    if n < 2:
        raise InvalidSpec(f"need n >= 2 observations, got {n}")
    rng = np.random.default_rng(seed)
    p = spec.n_covariates
    if spec.kind == KIND_EXTERNAL:
        key = rng.random(n)
        cols = [_poly_value(coeffs, key) for coeffs in spec.h]
    else:
        cols = [_sample_covariate(spec.covariate_dist, rng, n) for _ in range(p)]
        key = cols[0].copy()
    x = np.column_stack(cols) if cols else np.empty((n, 0))
    mean = x @ np.asarray(spec.theta[:p]) if p else np.zeros(n)
    if spec.intercept:
        mean = mean + spec.theta[p]
    if spec.mean_shift is not None:
        name, amp = spec.mean_shift
        if name == "quadratic":
            mean = mean + amp * key * key
        else:
            mean = mean + amp * (key > _key_median(spec))
    errors = _sample_errors(spec.error_dist, rng, n) * spec.noise_sd
    return Dataset(x=x, y=mean + errors, order_key=key)


# ---------------------------------------------------------------------------
# Closed-form limit kernels.
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TheoreticalKernel:
    """Limit covariance function, evaluable anywhere on [0, 1]^2.

    ``centered`` selects the bridge form min(s,t) - s t - L0(s) G^-1 L0(t)
    (with L0(u) = L(u) - u L(1)); otherwise the uncentered form
    min(s,t) - L(s) G^-1 L(t) applies.
    """

    kind: str
    centered: bool
    l_funcs: tuple
    g: np.ndarray

    def _l(self, t: float) -> np.ndarray:
        return np.array([f(t) for f in self.l_funcs])

    def evaluate(self, s: float, t: float) -> float:
        if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
            raise OutOfDomain(f"kernel arguments ({s}, {t}) outside [0, 1]^2")
        base = min(s, t)
        if self.centered:
            base -= s * t
        if not self.l_funcs:
            return base
        ls, lt = self._l(s), self._l(t)
        if self.centered:
            l_one = self._l(1.0)
            ls = ls - s * l_one
            lt = lt - t * l_one
        return float(base - ls @ solve_spd(self.g, lt))

    def matrix(self, grid) -> np.ndarray:
        pts = [float(t) for t in grid]
        k = len(pts)
        out = np.empty((k, k))
        for i in range(k):
            for j in range(i, k):
                out[i, j] = self.evaluate(pts[i], pts[j])
                out[j, i] = out[i, j]
        return out

    def centered_version(self) -> "TheoreticalKernel":
        """The bridge-form kernel for the same design."""
        if self.centered:
            return self
        return TheoreticalKernel(
            kind=self.kind, centered=True, l_funcs=self.l_funcs, g=self.g
        )


def theoretical_kernel(spec: ModelSpec) -> TheoreticalKernel:
    """Closed-form limit kernel matching the model's design.

    With an intercept this is the bridge kernel (centered form); without
    one it is the uncentered kernel of the raw partial-sum process.  The
    kind labels the design family: "brownian-bridge" (intercept only),
    "single-covariate" (one covariate, ordered by itself), or "general"
    (anything with a vector-valued cumulative covariate curve).  Any
    mean_shift is ignored: the kernel describes the null limit.
    """
    p = spec.n_covariates
    l_funcs: list = []
    if spec.kind == KIND_COVARIATE:
        mean, second, _, l1 = _dist_moments(spec.covariate_dist)
        l_funcs.append(l1)
        for _ in range(1, p):
            l_funcs.append(lambda t, mu=mean: mu * t)
        # columns beyond the first are independent of the ordering variable,
        # so every cross moment is mean**2
        g = np.full((p, p), mean * mean)
        np.fill_diagonal(g, second)
        means = [mean] * p
    else:
        for coeffs in spec.h:
            l_funcs.append(lambda t, c=coeffs: _poly_integral(c, t))
        g = np.empty((p, p))
        for i in range(p):
            for j in range(i, p):
                g[i, j] = _poly_product_integral(spec.h[i], spec.h[j])
                g[j, i] = g[i, j]
        means = [_poly_integral(coeffs, 1.0) for coeffs in spec.h]
    if spec.intercept:
        l_funcs.append(lambda t: t)
        full = np.empty((p + 1, p + 1))
        full[:p, :p] = g
        full[:p, p] = means
        full[p, :p] = means
        full[p, p] = 1.0
        g = full
    if p == 0:
        kind = "brownian-bridge"
    elif spec.kind == KIND_COVARIATE and p == 1:
        kind = "single-covariate"
    else:
        kind = "general"
    return TheoreticalKernel(
        kind=kind, centered=spec.intercept, l_funcs=tuple(l_funcs), g=g
    )


def sample_limit_vector(kernel: TheoreticalKernel, grid, seed: int) -> np.ndarray:
    """One draw of the limiting centered Gaussian vector at the grid points."""
    lower = cholesky(kernel.matrix(grid))
    z = np.random.default_rng(seed).standard_normal(lower.shape[0])
    return lower @ z


def sample_limit_vectors(
    kernel: TheoreticalKernel, grid, draws: int, seed: int
) -> np.ndarray:
    """Batched draws (rows) from one generator stream; for distribution checks."""
    lower = cholesky(kernel.matrix(grid))
    z = np.random.default_rng(seed).standard_normal((draws, lower.shape[0]))
    return z @ lower.T


# ---------------------------------------------------------------------------
# Monte Carlo experiments.  Replicate r always uses derive_seed(seed, r) and
# results are aggregated in replicate order, so reports are byte-identical
# across runs and thread counts.
# ---------------------------------------------------------------------------

def _thread_count(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(ENV_THREADS, "").strip()
    return max(1, int(env)) if env else 1


def _map_replicates(fn, reps: int, threads: int) -> list:
    if threads <= 1:
        return [fn(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(reps)))


def _rejection_experiment(spec, n, reps, d, alpha, seed, threads) -> dict:
    if not 0.0 <= alpha <= 1.0:
        raise InvalidSpec(f"alpha must lie in [0, 1], got {alpha}")
    if reps < 1:
        raise InvalidSpec(f"need at least one replicate, got {reps}")

    def one(r: int) -> float:
        ds = generate_dataset(spec, n, derive_seed(seed, r))
        try:
            return run_test(ds, d=d, intercept=spec.intercept, order_by="key").p_value
        except SingularCovariance:
            return math.nan
        except DegeneracyError as exc:
            raise type(exc)(f"replicate {r}: {exc}") from exc

    pvals = np.array(_map_replicates(one, reps, _thread_count(threads)))
    ok = pvals[~np.isnan(pvals)]
    failures = int(reps - ok.shape[0])
    rate = float(np.count_nonzero(ok < alpha) / ok.shape[0]) if ok.size else 0.0
    se = math.sqrt(rate * (1.0 - rate) / ok.shape[0]) if ok.size else 0.0
    return {
        "spec": spec.to_dict(),
        "n": int(n),
        "reps": int(reps),
        "d": int(d),
        "alpha": float(alpha),
        "rejection_rate": rate,
        "standard_error": se,
        "failures": failures,
    }


def monte_carlo_level(
    spec: ModelSpec,
    n: int,
    reps: int,
    d: int,
    alpha: float,
    seed: int,
    threads: int | None = None,
) -> dict:
    """Rejection rate under the null; checks the chi-square limit's level.

    Replicates that fail with a singular grid covariance are counted in
    ``failures`` and excluded from the rate, never silently dropped.
    """
    if spec.mean_shift is not None:
        raise InvalidSpec("level experiments need mean_shift absent (null model)")
    return _rejection_experiment(spec, n, reps, d, alpha, seed, threads)


def monte_carlo_power(
    spec: ModelSpec,
    n: int,
    reps: int,
    d: int,
    alpha: float,
    seed: int,
    threads: int | None = None,
) -> dict:
    """Rejection rate under a misspecified mean; qualitative power check."""
    if spec.mean_shift is None:
        raise InvalidSpec("power experiments need a mean_shift alternative")
    return _rejection_experiment(spec, n, reps, d, alpha, seed, threads)


def empirical_bridge_covariance(
    spec: ModelSpec,
    n: int,
    reps: int,
    grid,
    seed: int,
    threads: int | None = None,
) -> dict:
    """Sample covariance of the bridge at the grid points across replicates,
    reported against the matching closed-form kernel."""
    pts = np.asarray([float(t) for t in grid])
    if pts.size == 0 or np.any(pts <= 0.0) or np.any(pts >= 1.0):
        raise OutOfDomain("covariance grid points must lie strictly inside (0, 1)")
    if reps < 1:
        raise InvalidSpec(f"need at least one replicate, got {reps}")

    def one(r: int):
        ds = order_by_key(generate_dataset(spec, n, derive_seed(seed, r)))
        if spec.intercept:
            ds = add_intercept(ds)
        try:
            b = empirical_bridge(fit_lse(ds))
        except SingularCovariance:
            return None
        except DegeneracyError as exc:
            raise type(exc)(f"replicate {r}: {exc}") from exc
        return [b.evaluate(t) for t in pts]

    rows = _map_replicates(one, reps, _thread_count(threads))
    values = np.array([row for row in rows if row is not None])
    failures = int(reps - values.shape[0])
    k = pts.shape[0]
    if values.shape[0] >= 2:
        centered = values - values.mean(axis=0)
        empirical = centered.T @ centered / (values.shape[0] - 1)
    else:
        empirical = np.zeros((k, k))
    kernel = theoretical_kernel(spec).centered_version()
    theoretical = kernel.matrix(pts)
    return {
        "spec": spec.to_dict(),
        "n": int(n),
        "reps": int(reps),
        "grid": [float(t) for t in pts],
        "empirical": [[float(v) for v in row] for row in empirical],
        "theoretical": [[float(v) for v in row] for row in theoretical],
        "max_abs_deviation": float(np.max(np.abs(empirical - theoretical))),
        "failures": failures,
    }
