import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mortal_fpt import analytic as an, quadrature as q
from mortal_fpt.errors import EmptySampleSet, UnderflowRegion
from mortal_fpt.model import InactivationLaw

INF = math.inf


def robin(kb):
    return q.CdfModel.robin_1d(1.0, 1.0, kb)


def moment(F, rate, m, beta=1.0):
    return q.conditional_moment_from_cdf(F, InactivationLaw(rate, beta), m).value


def test_exponential_tau_example():
    est = q.conditional_moment_from_cdf(q.CdfModel.exponential(1.0), InactivationLaw(1.0), 1)
    assert est.value == pytest.approx(0.5, rel=1e-10)
    assert est.method == "quadrature"
    assert est.std_err >= 0


def test_robin_example_matches_closed_form():
    assert moment(robin(1.0), 1.0, 1) == pytest.approx(0.75, rel=1e-8)


@pytest.mark.parametrize("c", [0.01, 1.0, 7.5])
@pytest.mark.parametrize("m", [0.5, 1, 2, 3.3])
def test_step_cdf_returns_constant(c, m):
    for law in (InactivationLaw(1.0), InactivationLaw(50.0, 3.0)):
        est = q.conditional_moment_from_cdf(q.CdfModel.step(c), law, m)
        assert est.value == pytest.approx(c**m, rel=1e-14)


def test_hitting_probability_examples():
    assert q.hitting_probability(q.CdfModel.exponential(1.0), InactivationLaw(1.0)) == pytest.approx(0.5, rel=1e-10)
    assert q.hitting_probability(q.CdfModel.step(1e-12), InactivationLaw(1.0)) == pytest.approx(1.0, rel=1e-9)
    p = [q.hitting_probability(robin(INF), InactivationLaw(lb)) for lb in (1.0, 1e2, 1e4)]
    assert p[0] > p[1] > p[2] > 0
    assert p[2] < 1e-40
    # P(tau < sigma) = exp(-L sqrt(rate / D)) for the perfect half-line
    assert q.log_hitting_probability(robin(INF), InactivationLaw(1e4)) == pytest.approx(-100.0, rel=1e-9)


def test_hitting_probability_exponential_formula():
    for mu, lam in ((0.3, 2.0), (5.0, 0.1)):
        val = q.hitting_probability(q.CdfModel.exponential(mu), InactivationLaw(lam))
        assert val == pytest.approx(mu / (mu + lam), rel=1e-10)


def test_log_limit_examples():
    F = q.CdfModel.from_log_function(lambda t: -2.0 / np.asarray(t), kind=q.CLOSED_FORM)
    est = q.log_limit_estimate(F, np.geomspace(1, 1e-3, 12))
    assert est.estimate == pytest.approx(2.0, rel=1e-12)
    assert np.allclose(est.sequence, 2.0)
    grid = np.geomspace(1.0, 1e-3, 10)
    for kb in (INF, 1.0):
        assert q.log_limit_estimate(robin(kb), grid).estimate == pytest.approx(0.25, rel=0.10)


def test_log_limit_underflow_is_flagged():
    F = q.CdfModel.from_function(lambda t: np.exp(-2.0 / np.asarray(t)))
    with pytest.warns(RuntimeWarning):
        est = q.log_limit_estimate(F, np.geomspace(1, 1e-4, 20))
    assert est.underflow
    assert est.estimate == pytest.approx(2.0, rel=1e-6)
    with pytest.raises(UnderflowRegion):
        q.log_limit_estimate(q.CdfModel.from_function(lambda t: 0 * np.asarray(t)), [1e-3, 1e-4])


def test_empirical_examples():
    F = q.empirical_cdf([(1.0, 1.0)])
    assert F(0.999) == 0.0 and F(1.0) == 1.0
    F2 = q.empirical_cdf([(1.0, 1.0), (2.0, 1.0)])
    assert F2(1.5) == 0.5
    with pytest.raises(EmptySampleSet):
        q.empirical_cdf([])
    with pytest.raises(EmptySampleSet):
        q.empirical_cdf([(1.0, 0.0)])


def test_empirical_exponential_sup_norm():
    rng = np.random.default_rng(11)
    x = np.sort(rng.exponential(1.0, 100_000))
    F = q.empirical_cdf(np.column_stack([x, np.ones_like(x)]))
    ref = 1 - np.exp(-x)
    dist = max(np.max(np.abs(F(x) - ref)), np.max(np.abs(F(x - 1e-12) - ref)))
    assert dist < 0.01


def test_empirical_moment_is_exact_weighted_sum():
    t = np.array([0.5, 1.0, 3.0])
    F = q.empirical_cdf(np.column_stack([t, [1.0, 2.0, 1.0]]))
    law = InactivationLaw(0.7)
    w = np.array([1.0, 2.0, 1.0]) * np.exp(-0.7 * t)
    est = q.conditional_moment_from_cdf(F, law, 2)
    assert est.value == pytest.approx(np.sum(w * t**2) / w.sum(), rel=1e-14)


@pytest.mark.parametrize("lb", [0.1, 1.0, 10.0, 100.0])
@pytest.mark.parametrize("kb", [0.1, 1.0, 10.0, INF])
@pytest.mark.parametrize("m", [1, 2])
def test_quadrature_matches_closed_form(lb, kb, m):
    exact = an.conditional_moment_1d_exact(an.Dimensionless1DParams(lb, kb), m)
    assert moment(robin(kb), lb, m) == pytest.approx(exact, rel=1e-8)


@given(lb=st.floats(0.05, 1e5), kb=st.one_of(st.floats(0.05, 100), st.just(INF)), beta=st.floats(0.5, 5))
@settings(max_examples=25, deadline=None)
def test_jensen_quadrature(lb, kb, beta):
    F = robin(kb)
    m1 = moment(F, lb, 1, beta)
    m2 = moment(F, lb, 2, beta)
    assert m2 >= m1 * m1 * (1 - 1e-9)


@given(c=st.floats(0.05, 20), lb=st.floats(0.1, 1e3), m=st.sampled_from([1, 2, 1.5]))
@settings(max_examples=20, deadline=None)
def test_scale_equivariance(c, lb, m):
    # tau -> c tau has CDF F(t / c); pairing it with rate lam / c rescales sigma the same way
    F = robin(1.0)
    a = moment(F.scaled(1 / c), lb / c, m)
    b = moment(F, lb, m)
    assert a == pytest.approx(c**m * b, rel=1e-10)


def test_shape_independence_tightens():
    F = robin(INF)
    gaps = []
    for lb in (1e2, 1e3, 1e4):
        gaps.append(abs(moment(F, lb, 1, 4.0) / moment(F, lb, 1, 1.0) - 1))
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.parametrize("kb", [1.0, INF])
@pytest.mark.parametrize("m", [1, 2])
def test_large_rate_moment_matches_log_limit(kb, m):
    F = robin(kb)
    C = q.log_limit_estimate(F, np.geomspace(1.0, 1e-3, 10)).estimate
    lb = 1e4
    assert lb ** (m / 2) * moment(F, lb, m) == pytest.approx(C ** (m / 2), rel=0.03)


@pytest.mark.parametrize("kb", [1.0, INF])
def test_variance_vanishes_faster_than_rate(kb):
    F = robin(kb)

    def scaled_var(lb):
        m1, m2 = moment(F, lb, 1), moment(F, lb, 2)
        return lb * (m2 - m1 * m1)

    assert scaled_var(1e4) * 2 <= scaled_var(1e2)


def test_large_rate_does_not_lose_the_spike():
    for lb in (1e6, 1e8, 1e10):
        assert moment(robin(INF), lb, 1) == pytest.approx(1 / (2 * math.sqrt(lb)), rel=1e-8)


def test_non_integer_orders():
    # Exp(mu) with exponential sigma: conditional law is Exp(mu + lam)
    mu, lam = 2.0, 3.0
    for m in (0.5, 1.5, 2.5):
        ref = math.gamma(m + 1) / (mu + lam) ** m
        assert moment(q.CdfModel.exponential(mu), lam, m) == pytest.approx(ref, rel=1e-9)
