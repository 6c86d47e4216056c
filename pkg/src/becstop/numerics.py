"""Exact and log-domain combinatorial primitives shared by all modules.

Counts are arbitrary-precision Python ints (exact path) or natural-log
floats (log path).  The log path exists because enumerator tables at
block lengths around 10^3 overflow any fixed-precision float in linear
domain while staying perfectly well-conditioned in log domain.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

# Type aliases used across the package: exact counts and log-domain values.
BigCount = int
LogValue = float

NEG_INF = float("-inf")

# Tolerance for clamping entropy arguments that drift past [0, 1] by
# floating-point noise.  Anything further out is a caller bug.
ENTROPY_DOMAIN_TOL = 1e-12


def binom(n: int, k: int) -> BigCount:
    """Exact binomial coefficient, 0 outside the triangle 0 <= k <= n."""
    if k < 0 or k > n or n < 0:
        return 0
    return math.comb(n, k)


def log_binom(n: int, k: int) -> LogValue:
    """Natural log of binom(n, k); -inf outside the triangle."""
    if k < 0 or k > n or n < 0:
        return NEG_INF
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def log_binom_table(n_max: int, k_max: int | None = None) -> np.ndarray:
    """Matrix LB[n, k] = log binom(n, k) for 0 <= n <= n_max, 0 <= k <= k_max.

    Entries outside the triangle are -inf.  Built in one vectorized pass;
    the (n_max+1) x (k_max+1) float64 array is the workhorse behind all
    log-domain enumerator construction.
    """
    if k_max is None:
        k_max = n_max
    n = np.arange(n_max + 1)[:, None].astype(np.float64)
    k = np.arange(k_max + 1)[None, :].astype(np.float64)
    with np.errstate(invalid="ignore"):
        tab = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    tab[k > n] = NEG_INF
    return tab


def to_log(count: BigCount) -> LogValue:
    """Exact count -> log domain.  math.log handles arbitrary-size ints."""
    if count < 0:
        raise ValueError("counts are non-negative")
    if count == 0:
        return NEG_INF
    return math.log(count)


def from_log(value: LogValue) -> float:
    """Log domain -> linear float (overflows to inf past ~1e308)."""
    if value == NEG_INF:
        return 0.0
    return math.exp(value)


def binary_entropy(x: float) -> float:
    """Binary entropy in nats, H(x) = -x ln x - (1-x) ln(1-x).

    Defined by continuity as 0 at the endpoints.  Arguments may stick out
    of [0, 1] by at most ENTROPY_DOMAIN_TOL (clamped); anything further
    raises ValueError.
    """
    if x < 0.0:
        if x < -ENTROPY_DOMAIN_TOL:
            raise ValueError(f"entropy argument {x} outside [0, 1]")
        x = 0.0
    elif x > 1.0:
        if x > 1.0 + ENTROPY_DOMAIN_TOL:
            raise ValueError(f"entropy argument {x} outside [0, 1]")
        x = 1.0
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log(x) - (1.0 - x) * math.log(1.0 - x)


def binary_entropy_vec(x: np.ndarray) -> np.ndarray:
    """Vectorized binary entropy in nats with silent clipping to [0, 1].

    Internal fast path for the optimizers, which feed arguments that are
    feasible up to floating-point noise by construction.
    """
    x = np.clip(x, 0.0, 1.0)
    out = np.zeros_like(x)
    inner = (x > 0.0) & (x < 1.0)
    xi = x[inner]
    out[inner] = -xi * np.log(xi) - (1.0 - xi) * np.log1p(-xi)
    return out
