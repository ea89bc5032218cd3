"""Special-function kernel used by every closed-form link distribution.

All functions are pure scalar maps (ndarray-broadcasting where it is free)
with explicit domain checks.  Backed by scipy.special, which provides the
accuracy the closed-form outage expressions need without a hand-rolled
Lanczos/continued-fraction stack.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as _sp

__all__ = [
    "gamma",
    "lower_inc_gamma",
    "upper_inc_gamma",
    "reg_lower_inc_gamma",
    "reg_upper_inc_gamma",
    "bessel_k",
    "q_function",
    "binomial",
]


def gamma(x):
    """Gamma function for x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("gamma requires x > 0")
    out = _sp.gamma(x)
    return float(out) if out.ndim == 0 else out


def _check_inc_domain(s, x):
    if np.any(np.asarray(s, dtype=float) <= 0.0):
        raise ValueError("incomplete gamma requires s > 0")
    if np.any(np.asarray(x, dtype=float) < 0.0):
        raise ValueError("incomplete gamma requires x >= 0")


def lower_inc_gamma(s, x):
    """Unregularized lower incomplete gamma: integral of t^(s-1) e^-t over [0, x]."""
    _check_inc_domain(s, x)
    out = _sp.gammainc(s, x) * _sp.gamma(s)
    return float(out) if np.ndim(out) == 0 else out


def upper_inc_gamma(s, x):
    """Unregularized upper incomplete gamma, Gamma(s) - lower_inc_gamma(s, x)."""
    _check_inc_domain(s, x)
    out = _sp.gammaincc(s, x) * _sp.gamma(s)
    return float(out) if np.ndim(out) == 0 else out


def reg_lower_inc_gamma(s, x):
    """Regularized lower incomplete gamma P(s, x); stable for very large s."""
    _check_inc_domain(s, x)
    out = _sp.gammainc(s, x)
    return float(out) if np.ndim(out) == 0 else out


def reg_upper_inc_gamma(s, x):
    """Regularized upper incomplete gamma Q(s, x)."""
    _check_inc_domain(s, x)
    out = _sp.gammaincc(s, x)
    return float(out) if np.ndim(out) == 0 else out


def bessel_k(v, x):
    """Modified Bessel function of the second kind K_v(x), x > 0, real order v."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("bessel_k requires x > 0")
    out = _sp.kv(v, x)
    return float(out) if np.ndim(out) == 0 else out


def q_function(x):
    """Standard normal tail probability Q(x) = P(Z > x)."""
    out = 0.5 * _sp.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def binomial(n: int, k: int) -> int:
    """Exact binomial coefficient C(n, k) for 0 <= k <= n."""
    if n < 0 or k < 0:
        raise ValueError("binomial requires nonnegative n and k")
    if k > n:
        raise ValueError(f"binomial requires k <= n, got k={k} > n={n}")
    return math.comb(n, k)
