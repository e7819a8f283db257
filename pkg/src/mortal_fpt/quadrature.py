"""Conditional moments from an arbitrary first-passage CDF.

For tau independent of a gamma-distributed sigma,

    E[tau^m | tau < sigma] = (I1 - I2) / I0,
    I0 = int f_sigma F,   I1 = int t^m f_sigma F,   I2 = int m t^(m-1) S_sigma F,

which needs only the CDF F of tau. Every integral is done over u = ln(t / t_c)
with the integrand kept in log space, so the e^(-lambda t - C/t) spike of the
fast-inactivation regime neither underflows nor slips between nodes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from . import analytic
from .errors import DegenerateCdf, EmptySampleSet, NonconvergedQuadrature, UnderflowRegion
from .model import ConditionalMomentEstimate, InactivationLaw

CLOSED_FORM = "closed-form"
SEMI_ANALYTIC = "semi-analytic"
EMPIRICAL = "empirical"

_LOG_CUTOFF = math.log(1e16)
_SCAN_HALF_WIDTH = 60.0
_SCAN_STEP = 0.25


@dataclass(frozen=True, eq=False)
class CdfModel:
    """CDF of a positive random variable.

    Continuous kinds carry ``log_cdf``; the empirical kind carries sorted sample
    times with their probability masses (which may sum to less than one when
    some mass is never absorbed).
    """

    kind: str
    log_cdf: Optional[Callable[[np.ndarray], np.ndarray]] = None
    c_hint: Optional[float] = None
    support: tuple[float, float] = (0.0, math.inf)
    times: Optional[np.ndarray] = None
    masses: Optional[np.ndarray] = None
    label: str = ""
    _cum: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in (CLOSED_FORM, SEMI_ANALYTIC, EMPIRICAL):
            raise ValueError(f"unknown CDF kind {self.kind!r}")
        if self.kind == EMPIRICAL:
            if self.times is None or self.masses is None:
                raise ValueError("empirical CDF needs times and masses")
            object.__setattr__(self, "_cum", np.cumsum(self.masses))
        elif self.log_cdf is None:
            raise ValueError("continuous CDF needs log_cdf")

    @property
    def empirical(self) -> bool:
        return self.kind == EMPIRICAL

    def log(self, t):
        tt = np.asarray(t, dtype=float)
        if self.empirical:
            with np.errstate(divide="ignore"):
                res = np.log(self(tt))
        else:
            res = np.asarray(self.log_cdf(tt), dtype=float)
        return float(res) if np.ndim(t) == 0 else res

    def __call__(self, t):
        tt = np.asarray(t, dtype=float)
        if self.empirical:
            idx = np.searchsorted(self.times, tt, side="right")
            cum = np.concatenate(([0.0], self._cum))
            res = np.minimum(cum[idx], 1.0)
        else:
            res = np.exp(self.log(tt))
        return float(res) if np.ndim(t) == 0 else res

    # -- factories --------------------------------------------------------

    @classmethod
    def exponential(cls, mu: float) -> "CdfModel":
        """tau ~ Exp(mu)."""
        if not mu > 0:
            raise ValueError("mu must be positive")

        def log_cdf(t):
            with np.errstate(divide="ignore"):
                return np.log(-np.expm1(-mu * t))

        return cls(CLOSED_FORM, log_cdf, label=f"exponential(mu={mu!r})")

    @classmethod
    def quasi_stationary(cls, lambda0: float) -> "CdfModel":
        return cls.exponential(lambda0)

    @classmethod
    def robin_1d(cls, L: float, D: float, kappa: float) -> "CdfModel":
        """1 - S(L, t) for the half-line problem with reactivity kappa."""
        analytic.log_hit_cdf_1d_robin(L, 1.0, D, kappa)  # argument validation

        def log_cdf(t):
            return analytic.log_hit_cdf_1d_robin(L, t, D, kappa)

        return cls(CLOSED_FORM, log_cdf, c_hint=L * L / (4 * D), label=f"robin(L={L!r},D={D!r},kappa={kappa!r})")

    @classmethod
    def from_log_function(cls, log_cdf, c_hint=None, kind=SEMI_ANALYTIC, label="") -> "CdfModel":
        return cls(kind, log_cdf, c_hint=c_hint, label=label)

    @classmethod
    def from_function(cls, cdf, c_hint=None, kind=SEMI_ANALYTIC, label="") -> "CdfModel":
        def log_cdf(t):
            with np.errstate(divide="ignore"):
                return np.log(np.clip(np.asarray(cdf(t), dtype=float), 0.0, 1.0))

        return cls(kind, log_cdf, c_hint=c_hint, label=label)

    @classmethod
    def step(cls, c: float) -> "CdfModel":
        """Deterministic tau = c."""
        return empirical_cdf([(c, 1.0)])

    def scaled(self, c: float) -> "CdfModel":
        """CDF of tau / c, i.e. t -> F(c t)."""
        if self.empirical:
            return CdfModel(EMPIRICAL, times=self.times / c, masses=self.masses, label=self.label)
        base = self.log_cdf
        hint = None if self.c_hint is None else self.c_hint / c
        return CdfModel(self.kind, lambda t: base(c * np.asarray(t, dtype=float)), c_hint=hint, label=self.label)


def empirical_cdf(samples, total_weight: Optional[float] = None) -> CdfModel:
    """Right-continuous weighted ECDF from ``(time, weight)`` pairs.

    ``total_weight`` normalizes the masses; pass the full weight of a run
    (including never-absorbed trajectories) so that F(inf) is the absorbed
    fraction rather than one.
    """
    arr = np.asarray(samples, dtype=float).reshape(-1, 2) if len(samples) else np.empty((0, 2))
    t, w = arr[:, 0], arr[:, 1]
    if np.any(w < 0) or np.any(t < 0):
        raise ValueError("sample times and weights must be nonnegative")
    total = float(w.sum())
    if not total > 0:
        raise EmptySampleSet("need at least one sample with positive weight")
    norm = total if total_weight is None else float(total_weight)
    if norm < total * (1 - 1e-12):
        raise ValueError("total_weight is smaller than the summed sample weights")
    order = np.argsort(t, kind="stable")
    keep = w[order] > 0
    return CdfModel(EMPIRICAL, times=t[order][keep], masses=w[order][keep] / norm, label="empirical")


# --------------------------------------------------------------------------
# log-space integration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _LogIntegral:
    log_scale: float
    value: float  # integral of exp(g - log_scale)
    error: float

    @property
    def log_value(self) -> float:
        return self.log_scale + math.log(self.value) if self.value > 0 else -math.inf


def _integrate_log(g: Callable[[np.ndarray], np.ndarray], rtol: float) -> _LogIntegral:
    """Integral over the real line of exp(g(u)) for unimodal-ish g."""
    lo, hi = -_SCAN_HALF_WIDTH, _SCAN_HALF_WIDTH
    for _ in range(8):
        u = np.arange(lo, hi + 0.5 * _SCAN_STEP, _SCAN_STEP)
        with np.errstate(all="ignore"):
            gv = np.asarray(g(u), dtype=float)
        gv = np.where(np.isnan(gv), -np.inf, gv)
        if not np.any(np.isfinite(gv)):
            raise DegenerateCdf("integrand vanishes on the whole scan window")
        imax = int(np.argmax(gv))
        grew = False
        if imax == 0 or gv[0] > gv[imax] - _LOG_CUTOFF:
            lo -= _SCAN_HALF_WIDTH
            grew = True
        if imax == len(u) - 1 or gv[-1] > gv[imax] - _LOG_CUTOFF:
            hi += _SCAN_HALF_WIDTH
            grew = True
        if not grew:
            break
    gmax = gv[imax]
    inside = np.nonzero(gv >= gmax - _LOG_CUTOFF)[0]
    i0, i1 = max(inside[0] - 1, 0), min(inside[-1] + 1, len(u) - 1)
    a, b = u[i0], u[i1]

    def f(x):
        with np.errstate(all="ignore"):
            v = math.exp(float(g(np.array([x]))[0]) - gmax)
        return 0.0 if math.isnan(v) else v

    # refine the peak location so that quad sees it as a breakpoint
    peak = u[imax]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, points=[peak] if a < peak < b else None,
                                  epsabs=0.0, epsrel=min(rtol * 1e-2, 1e-12), limit=1000)
    outside = np.concatenate((gv[:i0], gv[i1 + 1:]))
    tail = float(np.sum(np.exp(outside - gmax)) * _SCAN_STEP) if outside.size else 0.0
    if not val > 0:
        raise DegenerateCdf("integrand has no mass on the truncation window")
    err_total = err + tail
    if err_total > rtol * val:
        raise NonconvergedQuadrature(f"relative error {err_total / val:.3g} exceeds {rtol:.3g}")
    return _LogIntegral(gmax, val, err_total)


def _window_center(F: CdfModel, law: InactivationLaw) -> float:
    if F.c_hint is not None and F.c_hint > 0:
        return math.sqrt(F.c_hint / law.rate)
    return law.shape / law.rate


def _log_f(law, t):
    return np.asarray(analytic.log_gamma_density(law, t))


def _log_s(law, t):
    return np.asarray(analytic.log_gamma_survival(law, t))


def _log_terms(F: CdfModel, law: InactivationLaw, tc: float):
    def t_of(u):
        return tc * np.exp(u)

    def g0(u):
        t = t_of(u)
        return _log_f(law, t) + F.log(t) + np.log(t)

    return t_of, g0


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------


def conditional_moment_from_cdf(F: CdfModel, law: InactivationLaw, m: float,
                                rtol: float = 1e-10) -> ConditionalMomentEstimate:
    """E[tau^m | tau < sigma] from the CDF of tau alone."""
    if not m > 0:
        raise ValueError(f"order must be positive, got {m}")
    if F.empirical:
        return _empirical_moment(F, law, m)
    tc = _window_center(F, law)
    t_of, g0 = _log_terms(F, law, tc)
    logm = math.log(m)

    def g1(u):
        t = t_of(u)
        return _log_f(law, t) + F.log(t) + (m + 1) * np.log(t)

    def g2(u):
        t = t_of(u)
        return logm + _log_s(law, t) + F.log(t) + m * np.log(t)

    i0 = _integrate_log(g0, rtol)
    i1 = _integrate_log(g1, rtol)
    i2 = _integrate_log(g2, rtol)
    shift = max(i1.log_scale, i2.log_scale)
    w1 = math.exp(i1.log_scale - shift)
    w2 = math.exp(i2.log_scale - shift)
    num = w1 * i1.value - w2 * i2.value
    num_err = w1 * i1.error + w2 * i2.error
    if not num > 0:
        raise NonconvergedQuadrature("numerator cancelled to a nonpositive value")
    value = num / i0.value * math.exp(shift - i0.log_scale)
    rel = num_err / num + i0.error / i0.value
    return ConditionalMomentEstimate(
        order=m,
        value=value,
        std_err=value * rel,
        n_effective=math.inf,
        method="quadrature",
        diagnostics={"cdf": F.label, "t_center": tc, "log_hit_probability": i0.log_value},
    )


def _empirical_moment(F: CdfModel, law, m) -> ConditionalMomentEstimate:
    logw = np.log(F.masses) + _log_s(law, F.times)
    if not np.any(np.isfinite(logw)):
        raise DegenerateCdf("every sample has vanishing survival weight")
    w = np.exp(logw - logw.max())
    value = float(np.sum(w * F.times**m) / np.sum(w))
    return ConditionalMomentEstimate(
        order=m,
        value=value,
        std_err=0.0,
        n_effective=float(w.sum() ** 2 / np.sum(w * w)),
        method="quadrature",
        diagnostics={"cdf": F.label, "exact_sum": True},
    )


def log_hitting_probability(F: CdfModel, law: InactivationLaw, rtol: float = 1e-10) -> float:
    """log P(tau < sigma); finite even when the probability underflows."""
    if F.empirical:
        with np.errstate(divide="ignore"):
            logw = np.log(F.masses) + _log_s(law, F.times)
        top = logw.max()
        return float(top + math.log(np.sum(np.exp(logw - top)))) if np.isfinite(top) else -math.inf
    _, g0 = _log_terms(F, law, _window_center(F, law))
    return min(_integrate_log(g0, rtol).log_value, 0.0)


def hitting_probability(F: CdfModel, law: InactivationLaw, rtol: float = 1e-10) -> float:
    """P(tau < sigma) = int F f_sigma dt."""
    try:
        return math.exp(log_hitting_probability(F, law, rtol))
    except DegenerateCdf:
        return 0.0


@dataclass(frozen=True)
class LogLimitEstimate:
    estimate: float
    times: np.ndarray
    sequence: np.ndarray
    underflow: bool


def log_limit_estimate(F: CdfModel, t_grid) -> LogLimitEstimate:
    """Extrapolate -t ln F(t) to t -> 0 along a decreasing time grid.

    Uses the three smallest usable times and quadratic (second-order
    Richardson) extrapolation to zero. Grid points where F underflows are
    dropped and reported through ``underflow``.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(t <= 0):
        raise ValueError("t_grid must be a nonempty sequence of positive times")
    if t.size > 1 and np.any(np.diff(t) >= 0):
        raise ValueError("t_grid must be strictly decreasing")
    logF = np.asarray(F.log(t), dtype=float)
    usable = np.isfinite(logF)
    n_ok = int(np.argmin(usable)) if not usable.all() else t.size
    if n_ok == 0:
        raise UnderflowRegion("F underflows at every grid time")
    underflow = n_ok < t.size
    if underflow:
        warnings.warn(f"F underflows below t={t[n_ok - 1]!r}; extrapolating from the usable prefix", RuntimeWarning)
    tt, seq = t[:n_ok], -t[:n_ok] * logF[:n_ok]
    k = min(3, n_ok)
    est = _neville_at_zero(tt[-k:], seq[-k:])
    return LogLimitEstimate(float(est), tt, seq, underflow)


def _neville_at_zero(x: np.ndarray, y: np.ndarray) -> float:
    p = list(y)
    n = len(x)
    for level in range(1, n):
        for i in range(n - level):
            j = i + level
            p[i] = (x[j] * p[i] - x[i] * p[i + 1]) / (x[j] - x[i])
    return p[0]
