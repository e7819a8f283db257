"""Log of the regularized upper incomplete gamma function Q(a, x).

Series for x < a + 1, modified-Lentz continued fraction otherwise
(the classic split; both branches are kept in log space so that Q values
far below the double-precision floor still carry a usable logarithm).
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

_TOL = 1e-15
_MAXIT = 100_000
_TINY = 1e-300


@nb.njit(cache=True, nogil=True)
def _log_prefactor(a, x):
    return -x + a * math.log(x) - math.lgamma(a)


@nb.njit(cache=True, nogil=True)
def _series_p(a, x):
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAXIT):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _TOL:
            break
    return total * math.exp(_log_prefactor(a, x))


@nb.njit(cache=True, nogil=True)
def _log_cf_q(a, x):
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAXIT):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _TOL:
            break
    return _log_prefactor(a, x) + math.log(h)


@nb.njit(cache=True, nogil=True)
def log_q(a, x):
    """log Q(a, x) for a > 0, x >= 0."""
    if x <= 0.0:
        return 0.0
    if x == np.inf:
        return -np.inf
    if x < a + 1.0:
        p = _series_p(a, x)
        return math.log1p(-p)
    return _log_cf_q(a, x)


@nb.njit(cache=True, nogil=True)
def log_q_array(a, x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = log_q(a, x[i])
    return out
