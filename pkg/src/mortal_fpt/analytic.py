"""Closed forms: the gamma inactivation law, the half-line Robin problem,
and the large-rate predictors for conditional first-passage moments."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from ._gammainc import log_q_array
from .errors import (
    NegativeTime,
    NonpositiveDiffusivity,
    NonpositiveLength,
    NonpositiveTime,
    OrderingViolation,
    UnsupportedOrder,
    UnsupportedShape,
)
from .model import InactivationLaw

_SQRT_PI = math.sqrt(math.pi)


def _out(values: np.ndarray, like):
    return float(values) if np.ndim(like) == 0 else values


# --------------------------------------------------------------------------
# gamma law
# --------------------------------------------------------------------------


def log_gamma_survival(law: InactivationLaw, t):
    """log P(sigma > t); finite far below the underflow threshold of the survival itself."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise NegativeTime(f"survival needs t >= 0, got min {tt.min()}")
    flat = np.ascontiguousarray(tt.ravel())
    if law.shape == 1.0:
        res = -law.rate * flat
    else:
        res = log_q_array(float(law.shape), law.rate * flat)
    return _out(res.reshape(tt.shape), t)


def gamma_survival(law: InactivationLaw, t):
    """P(sigma > t) = Gamma(shape, rate t) / Gamma(shape)."""
    return _out(np.exp(np.asarray(log_gamma_survival(law, t))), t)


def log_gamma_density(law: InactivationLaw, t):
    tt = np.asarray(t, dtype=float)
    if np.any(tt <= 0):
        raise NonpositiveTime(f"density needs t > 0, got min {tt.min()}")
    b, lam = law.shape, law.rate
    res = b * math.log(lam) + (b - 1.0) * np.log(tt) - lam * tt - math.lgamma(b)
    return _out(res, t)


def gamma_density(law: InactivationLaw, t):
    """rate^shape t^(shape-1) exp(-rate t) / Gamma(shape)."""
    return _out(np.exp(np.asarray(log_gamma_density(law, t))), t)


# --------------------------------------------------------------------------
# half-line problem with a Robin (partially absorbing) end at the origin
# --------------------------------------------------------------------------


def erfcx(x):
    """Scaled complementary error function exp(x^2) erfc(x)."""
    return _out(special.erfcx(np.asarray(x, dtype=float)), x)


def _erfcx_diff(a: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """erfcx(a) - erfcx(a + delta) without cancellation for small delta."""
    y0 = special.erfcx(a)
    direct = y0 - special.erfcx(a + delta)
    small = delta < 1e-3 * np.maximum(1.0, a)
    if np.any(small):
        x = a[small]
        d = delta[small]
        y = y0[small]
        y1 = 2 * x * y - 2 / _SQRT_PI
        y2 = 2 * y + 2 * x * y1
        y3 = 4 * y1 + 2 * x * y2
        y4 = 6 * y2 + 2 * x * y3
        direct[small] = -(d * y1 + d**2 / 2 * y2 + d**3 / 6 * y3 + d**4 / 24 * y4)
    return direct


def _check_robin(L, D):
    if not L > 0:
        raise NonpositiveLength(f"L must be positive, got {L}")
    if not D > 0:
        raise NonpositiveDiffusivity(f"D must be positive, got {D}")


def log_hit_cdf_1d_robin(L: float, t, D: float, kappa: float):
    """log P(tau <= t) for the half-line Robin problem, stable as t -> 0."""
    _check_robin(L, D)
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise NegativeTime("t must be nonnegative")
    flat = tt.ravel()
    out = np.full(flat.shape, -np.inf)
    pos = flat > 0
    tp = flat[pos]
    a = L / np.sqrt(4 * D * tp)
    if math.isinf(kappa):
        out[pos] = -(a**2) + np.log(special.erfcx(a))
    elif kappa > 0:
        delta = kappa * np.sqrt(tp / D)
        with np.errstate(divide="ignore"):
            out[pos] = -(a**2) + np.log(_erfcx_diff(a, delta))
    return _out(out.reshape(tt.shape), t)


def survival_1d_robin(L: float, t, D: float, kappa: float):
    """Survival S(L, t) of a searcher started at distance L from a Robin end.

    kappa = inf gives the perfectly absorbing result erf(L / sqrt(4 D t)).
    """
    _check_robin(L, D)
    tt = np.asarray(t, dtype=float)
    if math.isinf(kappa):
        with np.errstate(divide="ignore"):
            res = special.erf(L / np.sqrt(4 * D * tt))
        res = np.where(tt == 0, 1.0, res)
        return _out(res, t)
    res = -np.expm1(np.asarray(log_hit_cdf_1d_robin(L, tt, D, kappa)))
    return _out(np.clip(res, 0.0, 1.0), t)


@dataclass(frozen=True)
class Dimensionless1DParams:
    """lambda_bar = lambda L^2 / D and kappa_bar = kappa L / D (inf = perfect)."""

    lambda_bar: float
    kappa_bar: float = math.inf

    def __post_init__(self):
        if not self.lambda_bar > 0:
            raise ValueError("lambda_bar must be positive")
        if not self.kappa_bar > 0:
            raise ValueError("kappa_bar must be positive")

    @classmethod
    def from_physical(cls, rate: float, L: float, D: float, kappa: float = math.inf):
        return cls(rate * L * L / D, kappa * L / D)


def conditional_moment_1d_exact(params: Dimensionless1DParams, m: int, shape: float = 1.0) -> float:
    """E[tau^m | tau < sigma] / (L^2/D)^m for the half-line Robin problem, m in {1, 2}.

    Exponential inactivation only.
    """
    if m not in (1, 2):
        raise UnsupportedOrder(f"closed form exists only for m in {{1, 2}}, got m={m}")
    if shape != 1.0:
        raise UnsupportedShape(f"closed form needs exponential inactivation (shape 1), got {shape}")
    lb, kb = params.lambda_bar, params.kappa_bar
    r = math.sqrt(lb)
    if math.isinf(kb):
        if m == 1:
            return 1.0 / (2.0 * r)
        return (r + 1.0) / (4.0 * lb * r)
    if m == 1:
        return (kb + r + 1.0) / (2.0 * (kb * r + lb))
    num = (2 * kb + 3) * lb + (kb + 1) * (kb + 3) * r + kb * (kb + 1) + lb * r
    den = 4 * lb * r * (kb + r) ** 2
    return num / den


def cv_1d_exact(params: Dimensionless1DParams) -> float:
    """Coefficient of variation of the conditional first-passage time."""
    lb, kb = params.lambda_bar, params.kappa_bar
    r = math.sqrt(lb)
    if math.isinf(kb):
        return lb**-0.25
    return math.sqrt(2 * (kb + 1) * r + kb * (kb + 1) + lb) / (lb**0.25 * (kb + r + 1))


# --------------------------------------------------------------------------
# large-rate predictors
# --------------------------------------------------------------------------


def asymptotic_moment(C: float, rate: float, m: float) -> float:
    """(C / rate)^(m/2): leading behaviour of the m-th conditional moment."""
    return (C / rate) ** (m / 2.0)


def asymptotic_moment_geodesic(L: float, D: float, rate: float, m: float) -> float:
    """(L / (2 sqrt(D rate)))^m, i.e. asymptotic_moment with C = L^2 / (4D)."""
    return (L / (2.0 * math.sqrt(D * rate))) ** m


def algebraic_conditional_moment(p: float, m: float, rate: float) -> float:
    """Gamma(m + p) / Gamma(p) / rate^m, for P(tau <= t) ~ A t^p near zero."""
    return math.exp(math.lgamma(m + p) - math.lgamma(p) - m * math.log(rate))


def qsd_conditional_cdf(lambda0: float, rate: float, t):
    """P(tau <= t | tau < sigma) when tau ~ Exp(lambda0) and sigma ~ Exp(rate)."""
    tt = np.asarray(t, dtype=float)
    return _out(-np.expm1(-(rate + lambda0) * tt), t)


def conjecture_ratio(L_phys: float, L_empty: float) -> float:
    """Predicted large-rate limit of E[tau_phys | .] / E[tau_empty | .]."""
    if not L_empty > 0:
        raise NonpositiveLength("L_empty must be positive")
    if L_phys < L_empty:
        raise OrderingViolation(
            f"L_phys={L_phys} < L_empty={L_empty}: obstacles cannot shorten the geodesic"
        )
    return L_phys / L_empty
