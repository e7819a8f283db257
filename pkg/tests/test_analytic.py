import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mortal_fpt import analytic as an
from mortal_fpt.errors import (
    NegativeTime,
    NonpositiveDiffusivity,
    NonpositiveLength,
    NonpositiveTime,
    OrderingViolation,
    UnsupportedOrder,
    UnsupportedShape,
)
from mortal_fpt.model import InactivationLaw

mp.mp.dps = 40

INF = math.inf
P = an.Dimensionless1DParams


def mp_survival_robin(L, t, D, kappa):
    L, t, D = mp.mpf(L), mp.mpf(t), mp.mpf(D)
    z = L / mp.sqrt(4 * D * t)
    if kappa == INF:
        return 1 - mp.erfc(z)
    k = mp.mpf(kappa)
    return 1 - mp.erfc(z) + mp.exp(k * (k * t + L) / D) * mp.erfc(z + k * mp.sqrt(t / D))


# -- gamma law ---------------------------------------------------------------


def test_gamma_survival_examples():
    assert an.gamma_survival(InactivationLaw(2.0, 1.0), 1.0) == pytest.approx(math.exp(-2), rel=1e-14)
    assert an.gamma_survival(InactivationLaw(3.7, 2.2), 0.0) == 1.0
    assert an.gamma_survival(InactivationLaw(1.0, 2.0), 1.0) == pytest.approx(2 * math.exp(-1), rel=1e-13)


def test_gamma_survival_two_identity_by_integration():
    # Gamma(2, x) = int_x^inf s e^-s ds
    val = float(mp.quad(lambda s: s * mp.exp(-s), [1, mp.inf]))
    assert an.gamma_survival(InactivationLaw(1.0, 2.0), 1.0) == pytest.approx(val, rel=1e-13)


def test_gamma_survival_negative_time():
    with pytest.raises(NegativeTime):
        an.gamma_survival(InactivationLaw(1.0), -0.1)


@pytest.mark.parametrize("shape", [0.3, 1.0, 2.5, 4.0, 17.0])
@pytest.mark.parametrize("x", [1e-6, 0.01, 0.7, 3.0, 25.0, 300.0])
def test_gamma_survival_against_mpmath(shape, x):
    ref = mp.gammainc(shape, x, mp.inf, regularized=True)
    got = an.gamma_survival(InactivationLaw(1.0, shape), x)
    if ref < mp.mpf("1e-300"):
        assert got == 0.0 or got < 1e-290
    else:
        assert got == pytest.approx(float(ref), rel=1e-11)
    lref = float(mp.log(ref))
    assert an.log_gamma_survival(InactivationLaw(1.0, shape), x) == pytest.approx(lref, rel=1e-11, abs=1e-13)


def test_log_survival_deep_tail_is_finite():
    law = InactivationLaw(1e6, 4.0)
    ls = an.log_gamma_survival(law, 1.0)
    ref = float(mp.log(mp.gammainc(4, 1e6, mp.inf, regularized=True)))
    assert ls == pytest.approx(ref, rel=1e-12)


def test_gamma_density_examples():
    assert an.gamma_density(InactivationLaw(3.0), 0.5) == pytest.approx(3 * math.exp(-1.5), rel=1e-14)
    assert an.gamma_density(InactivationLaw(1.0, 2.0), 1.0) == pytest.approx(math.exp(-1), rel=1e-13)
    with pytest.raises(NonpositiveTime):
        an.gamma_density(InactivationLaw(1.0), 0.0)


def test_gamma_density_integrates_to_one():
    from scipy import integrate

    law = InactivationLaw(4.0, 2.5)
    val, err = integrate.quad(lambda t: an.gamma_density(law, t), 0, np.inf, epsabs=1e-13, epsrel=1e-13)
    assert abs(val - 1) < 1e-10


@given(
    rate=st.floats(0.05, 50), shape=st.floats(0.5, 8), t=st.floats(0.01, 5),
)
@settings(max_examples=60, deadline=None)
def test_density_is_minus_derivative_of_survival(rate, shape, t):
    law = InactivationLaw(rate, shape)
    h = 1e-6
    fd = (an.gamma_survival(law, t - h) - an.gamma_survival(law, t + h)) / (2 * h)
    assert fd == pytest.approx(an.gamma_density(law, t), abs=1e-6, rel=1e-5)


@given(rate=st.floats(0.01, 100), shape=st.floats(0.2, 10), t1=st.floats(0, 10), t2=st.floats(0, 10))
@settings(max_examples=80, deadline=None)
def test_survival_nonincreasing(rate, shape, t1, t2):
    law = InactivationLaw(rate, shape)
    lo, hi = sorted((t1, t2))
    s_lo, s_hi = an.gamma_survival(law, lo), an.gamma_survival(law, hi)
    assert 0 <= s_hi <= s_lo <= 1


def test_exponential_case_is_exact():
    law = InactivationLaw(1.7, 1.0)
    t = np.linspace(0, 20, 41)
    assert np.allclose(an.gamma_survival(law, t), np.exp(-1.7 * t), rtol=1e-14, atol=0)


# -- erfcx -------------------------------------------------------------------


def test_erfcx_examples():
    assert an.erfcx(0.0) == 1.0
    assert an.erfcx(1.0) == pytest.approx(float(mp.exp(1) * mp.erfc(1)), rel=1e-14)
    assert abs(an.erfcx(100.0) - 1 / (100 * math.sqrt(math.pi))) < 1e-4


@pytest.mark.parametrize("x", [1e-8, 0.3, 2.0, 7.5, 15.0, 29.9])
def test_erfcx_relative_accuracy(x):
    ref = mp.exp(mp.mpf(x) ** 2) * mp.erfc(x)
    assert an.erfcx(x) == pytest.approx(float(ref), rel=1e-12)


# -- Robin survival ----------------------------------------------------------


def test_survival_robin_examples():
    assert an.survival_1d_robin(1.0, 0.25, 1.0, INF) == pytest.approx(math.erf(1.0), rel=1e-14)
    for kappa in (0.5, 3.0, INF):
        assert an.survival_1d_robin(2.0, 0.0, 1.5, kappa) == 1.0
    assert an.survival_1d_robin(1.0, 10.0, 1.0, 1e-300) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("L,t,D,kappa", [
    (1.0, 0.25, 1.0, 1.0), (1.0, 3.0, 1.0, 0.1), (0.5, 0.01, 2.0, 10.0),
    (1.0, 1e-3, 1.0, 1.0), (2.0, 50.0, 0.5, 3.0), (1.0, 1e4, 1.0, 100.0),
])
def test_survival_robin_against_mpmath(L, t, D, kappa):
    with mp.workdps(300):
        ref = mp_survival_robin(L, t, D, kappa)
        log_f = float(mp.log(1 - ref))
    assert an.survival_1d_robin(L, t, D, kappa) == pytest.approx(float(ref), rel=1e-11, abs=1e-15)
    assert an.log_hit_cdf_1d_robin(L, t, D, kappa) == pytest.approx(log_f, rel=1e-10)


def test_survival_robin_errors():
    with pytest.raises(NonpositiveLength):
        an.survival_1d_robin(0.0, 1.0, 1.0, INF)
    with pytest.raises(NonpositiveDiffusivity):
        an.survival_1d_robin(1.0, 1.0, 0.0, INF)


def test_survival_robin_monotone_on_grid():
    t = np.geomspace(1e-3, 100, 60)
    for kappa in (0.1, 1.0, 10.0, INF):
        s = an.survival_1d_robin(1.0, t, 1.0, kappa)
        assert np.all(np.diff(s) <= 1e-15)
    Ls = np.linspace(0.1, 3, 15)
    for tt in (0.1, 1.0, 10.0):
        s = np.array([an.survival_1d_robin(L, tt, 1.0, 1.0) for L in Ls])
        assert np.all(np.diff(s) >= -1e-15)
    ks = [0.01, 0.1, 1.0, 10.0, 100.0, INF]
    for tt in (0.1, 1.0, 10.0):
        s = np.array([an.survival_1d_robin(1.0, tt, 1.0, k) for k in ks])
        assert np.all(np.diff(s) <= 1e-15)


@pytest.mark.parametrize("kappa", [1.0, INF])
def test_short_time_log_limit(kappa):
    t = 1e-3
    q = t * an.log_hit_cdf_1d_robin(1.0, t, 1.0, kappa)
    assert q == pytest.approx(-0.25, rel=0.10)


# -- exact conditional moments ---------------------------------------------


def test_exact_moment_examples():
    assert an.conditional_moment_1d_exact(P(1.0, 1.0), 1) == pytest.approx(0.75, rel=1e-15)
    assert an.conditional_moment_1d_exact(P(1.0, 1.0), 2) == pytest.approx(1.0, rel=1e-15)
    for lb in (1e2, 1e4, 1e8):
        assert an.conditional_moment_1d_exact(P(lb), 1) == pytest.approx(1 / (2 * math.sqrt(lb)), rel=1e-15)


def test_exact_moment_errors():
    with pytest.raises(UnsupportedOrder):
        an.conditional_moment_1d_exact(P(1.0), 3)
    with pytest.raises(UnsupportedShape):
        an.conditional_moment_1d_exact(P(1.0), 1, shape=2.0)
    with pytest.raises(ValueError):
        P(-1.0)
    with pytest.raises(ValueError):
        P(1.0, 0.0)


def _mp_conditional_moment(lb, kb, m):
    # E[tau^m 1{tau<sigma}] / P(tau<sigma) with L = D = 1, rate lb, by direct integration of the density
    lb = mp.mpf(lb)

    def F(t):
        return 1 - mp_survival_robin(1, t, 1, kb)

    def f(t):
        return mp.diff(F, t)

    peak = 1 / (2 * mp.sqrt(lb))
    pts = [0, peak / 4, peak, 4 * peak, 40 * peak, mp.inf]
    num = mp.quad(lambda t: t**m * f(t) * mp.exp(-lb * t), pts)
    den = mp.quad(lambda t: f(t) * mp.exp(-lb * t), pts)
    return num / den


@pytest.mark.parametrize("lb,kb", [(1.0, 1.0), (10.0, 0.1), (0.1, 10.0), (100.0, INF)])
def test_exact_moments_against_independent_integration(lb, kb):
    mp.mp.dps = 20
    try:
        for m in (1, 2):
            ref = _mp_conditional_moment(lb, kb, m)
            assert an.conditional_moment_1d_exact(P(lb, kb), m) == pytest.approx(float(ref), rel=1e-8)
    finally:
        mp.mp.dps = 40


def test_cv_examples():
    assert an.cv_1d_exact(P(1.0, 1.0)) == pytest.approx(math.sqrt(7) / 3, rel=1e-15)
    assert an.cv_1d_exact(P(1e8, 1.0)) == pytest.approx(0.01, rel=0.05)


@pytest.mark.parametrize("lb", [0.1, 1.0, 10.0, 100.0, 1e4])
@pytest.mark.parametrize("kb", [0.1, 1.0, 10.0, 100.0, INF])
def test_cv_consistent_with_moments(lb, kb):
    m1 = an.conditional_moment_1d_exact(P(lb, kb), 1)
    m2 = an.conditional_moment_1d_exact(P(lb, kb), 2)
    assert m2 >= m1 * m1
    cv = math.sqrt(m2 - m1 * m1) / m1
    assert an.cv_1d_exact(P(lb, kb)) == pytest.approx(cv, rel=1e-12)


@given(lb=st.floats(1e-3, 1e8), kb=st.one_of(st.floats(1e-3, 1e4), st.just(INF)))
@settings(max_examples=100, deadline=None)
def test_jensen_on_closed_form(lb, kb):
    m1 = an.conditional_moment_1d_exact(P(lb, kb), 1)
    m2 = an.conditional_moment_1d_exact(P(lb, kb), 2)
    assert m2 >= m1 * m1 * (1 - 1e-12)


@pytest.mark.parametrize("m", [1, 2])
def test_large_rate_limit_closed_form(m):
    lb = 1e6
    val = an.conditional_moment_1d_exact(P(lb), m)
    assert val * lb ** (m / 2) == pytest.approx(0.25 ** (m / 2), rel=0.01)


def test_kappa_independence_in_limit():
    a = an.conditional_moment_1d_exact(P(1e4, 1.0), 1)
    b = an.conditional_moment_1d_exact(P(1e4, INF), 1)
    assert abs(a / b - 1) < 0.05


# -- predictors ----------------------------------------------------------------


def test_asymptotic_examples():
    assert an.asymptotic_moment(1.0, 4.0, 2) == 0.25
    assert an.asymptotic_moment(1.0, 4.0, 1) == 0.5
    assert an.asymptotic_moment_geodesic(1.0, 1.0, 100.0, 1) == pytest.approx(0.05, rel=1e-15)
    assert an.asymptotic_moment_geodesic(2.0, 1.0, 100.0, 2) == pytest.approx(0.01, rel=1e-15)


@given(L=st.floats(1e-3, 1e3), D=st.floats(1e-3, 1e3), rate=st.floats(1e-3, 1e6), m=st.floats(1, 4))
@settings(max_examples=100, deadline=None)
def test_geodesic_predictor_identity(L, D, rate, m):
    a = an.asymptotic_moment_geodesic(L, D, rate, m)
    b = an.asymptotic_moment(L * L / (4 * D), rate, m)
    assert a == pytest.approx(b, rel=1e-12)


def test_algebraic_examples():
    assert an.algebraic_conditional_moment(0.5, 1, 10.0) == pytest.approx(0.05, rel=1e-14)
    assert an.algebraic_conditional_moment(1.0, 1, 1.0) == pytest.approx(1.0, rel=1e-14)
    assert an.algebraic_conditional_moment(0.5, 2, 1.0) == pytest.approx(0.75, rel=1e-14)


def test_qsd_cdf_examples():
    assert an.qsd_conditional_cdf(1.0, 1.0, 0.0) == 0.0
    assert an.qsd_conditional_cdf(1.0, 1.0, math.log(2) / 2) == pytest.approx(0.5, rel=1e-14)
    from scipy import integrate

    mean, _ = integrate.quad(lambda t: 1 - an.qsd_conditional_cdf(1.0, 1.0, t), 0, np.inf)
    assert mean == pytest.approx(0.5, rel=1e-10)


def test_conjecture_ratio():
    assert an.conjecture_ratio(4.0, 4.0) == 1.0
    assert an.conjecture_ratio(2 * math.sqrt(2), 2.0) == pytest.approx(math.sqrt(2), rel=1e-15)
    with pytest.raises(OrderingViolation):
        an.conjecture_ratio(3.0, 4.0)
