"""Small statistical primitives: normal CDF/quantile and empirical quantiles."""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidArgumentError

_SQRT2 = math.sqrt(2.0)


def norm_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-x / _SQRT2)


def norm_ppf(p: float, tol: float = 1e-12) -> float:
    """Standard normal quantile by bisection on :func:`norm_cdf`.

    Bisection runs on the lower tail, bracket [-40, 0], until the bracket is
    narrower than `tol`; upper-tail quantiles follow by symmetry.
    """
    if not 0.0 < p < 1.0:
        raise InvalidArgumentError(f"p must lie in (0, 1), got {p!r}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        # the upper tail of the CDF is coarse near 1; 1 - p is exact here
        return -norm_ppf(1.0 - p, tol)
    lo, hi = -40.0, 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if norm_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def interpolated_quantile(values, q: float) -> float:
    """Quantile by linear interpolation of order statistics.

    Uses the 1-based position ``1 + (n - 1) * q``.
    """
    x = np.sort(np.asarray(values, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise InvalidArgumentError("quantile of an empty sample")
    if not 0.0 <= q <= 1.0:
        raise InvalidArgumentError(f"q must lie in [0, 1], got {q!r}")
    h = (n - 1) * q
    lo = int(math.floor(h))
    if lo >= n - 1:
        return float(x[-1])
    frac = h - lo
    return float(x[lo] + frac * (x[lo + 1] - x[lo]))
