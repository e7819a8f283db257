import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp

from mortal_fpt import analytic as an, experiments as ex

from mortal_fpt.model import (
    InactivationLaw,
    InitialDistribution,
    half_line_problem,
    uniform_interval_problem,
)
from mortal_fpt.quadrature import CdfModel, conditional_moment_from_cdf
from mortal_fpt.simulate import SimulationConfig, run_trajectories

INF = math.inf


def qsd_problem(rate):
    return replace(half_line_problem(), initial=InitialDistribution("quasi-stationary", rate=rate))


def plan(**kw):
    base = dict(problem=half_line_problem(L=1.0), lambda_bars=(25.0,), length=1.0)
    base.update(kw)
    return ex.SweepPlan(**base)


def test_plan_invariants():
    with pytest.raises(ValueError):
        plan(lambda_bars=())
    with pytest.raises(ValueError):
        plan(betas=(0.0,))
    with pytest.raises(ValueError):
        plan(methods=("guess",))
    with pytest.raises(ValueError):
        plan(n_trajectories=0)


def test_log_grid():
    g = ex.log_grid(1.0, 1e4, 5)
    assert g[0] == 1.0 and g[-1] == pytest.approx(1e4, rel=1e-14)
    assert np.allclose(np.diff(np.log10(g)), 1.0)


def test_csv_header_and_exact_round_trip(tmp_path):
    recs = [
        ex.SweepRecord("e", "analytic", 0.1, 1.0, INF, 1, estimate=1 / 3, std_err=0.0, n_eff=INF,
                       L=2 ** 0.5, D=1.0, prediction=math.pi, ratio=1 / 3 / math.pi),
        ex.SweepRecord("e", "monte-carlo", 1e-300, 4.0, 1.0, 2, estimate=0.1 + 0.2),
    ]
    path = ex.write_results(recs, tmp_path, {"seed": 1})
    text = path.read_text()
    assert text.splitlines()[0] == "experiment_id,method,lambda,beta,kappa,m,estimate,std_err,n_eff,L,D,prediction,ratio"
    back = ex.read_results(path)
    assert back[0]["estimate"] == 1 / 3
    assert back[0]["L"] == 2 ** 0.5
    assert back[0]["kappa"] == INF
    assert back[1]["estimate"] == 0.1 + 0.2
    assert back[1]["lambda"] == 1e-300
    assert math.isnan(back[1]["ratio"])
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["seed"] == 1 and man["columns"] == list(ex.CSV_COLUMNS)


def test_write_refuses_overwrite(tmp_path):
    ex.write_results([], tmp_path, {})
    with pytest.raises(FileExistsError):
        ex.write_results([], tmp_path, {})
    ex.write_results([], tmp_path, {}, force=True)


def test_failed_points_are_recorded_not_fatal(tmp_path):
    # the uniform start has no closed form on the half-line path
    recs = ex.run_initial_condition_study(ex.SweepPlan(
        problem=uniform_interval_problem(), lambda_bars=(1e3,), methods=("analytic", "quadrature", "asymptotic"),
    ))
    failed = [r for r in recs if r.failed]
    assert [r.method for r in failed] == ["analytic"]
    assert "NotImplementedError" in failed[0].error
    ex.write_results(recs, tmp_path, {})
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["failures"][0]["method"] == "analytic"


@pytest.mark.parametrize("kb", [0.1, 1.0, INF])
def test_analytic_and_quadrature_rows_agree(kb):
    recs = ex.run_convergence_study(plan(
        lambda_bars=(0.1, 10.0, 1e3), kappa_bars=(kb,), orders=(1, 2), methods=("analytic", "quadrature"),
    ))
    by = {}
    for r in recs:
        by.setdefault((r.lambda_bar, r.m), {})[r.method] = r.estimate
    assert len(by) == 6
    for v in by.values():
        assert v["quadrature"] == pytest.approx(v["analytic"], rel=1e-6)


def test_physical_units_scale():
    # L = 2, D = 0.5: the time scale is L^2 / D = 8
    recs = ex.run_convergence_study(ex.SweepPlan(
        problem=half_line_problem(L=2.0, D=0.5), lambda_bars=(10.0,), methods=("analytic",), length=2.0,
    ))
    r = recs[0]
    assert r.lambda_ == pytest.approx(10.0 * 0.5 / 4)
    assert r.estimate == pytest.approx(8 * an.conditional_moment_1d_exact(an.Dimensionless1DParams(10.0, INF), 1))


def test_convergence_ratio_approaches_one():
    recs = ex.run_convergence_study(plan(lambda_bars=(25.0, 100.0, 400.0), methods=("quadrature",)))
    # perfect half-line: the ratio is one at every rate, not only in the limit
    assert max(abs(r.ratio - 1) for r in recs) < 1e-6


def test_convergence_ratio_partial_target_and_second_moment():
    recs = ex.run_convergence_study(plan(
        lambda_bars=(25.0, 100.0, 400.0), kappa_bars=(1.0,), orders=(1, 2), methods=("analytic",),
    ))
    for m in (1, 2):
        gaps = [abs(r.ratio - 1) for r in recs if r.m == m]
        assert gaps[0] > gaps[1] > gaps[2]
        # both orders close the gap like lambda_bar^(-1/2)
        assert 1.6 < gaps[1] / gaps[2] < 2.5
    assert [abs(r.ratio - 1) for r in recs if r.m == 1][-1] < 0.05


def test_cross_beta_ratio():
    recs = ex.run_convergence_study(plan(lambda_bars=(1e4,), betas=(1.0, 4.0), methods=("quadrature",)))
    r1, r4 = recs
    assert r1.beta == 1.0 and r4.beta == 4.0
    assert abs(r4.estimate / r1.estimate - 1) < 0.05


def test_empty_vs_empty_obstacle_comparison_is_one():
    spec = half_line_problem(L=1.0)
    p = plan(lambda_bars=(25.0,), n_trajectories=20_000, seed=3)
    rows = ex.run_obstacle_comparison(spec, spec, p, L_phys=1.0, L_empty=1.0)
    assert rows[0].ratio == pytest.approx(1.0, abs=1e-15)
    assert rows[0].predicted_ratio == 1.0
    flat = ex.obstacle_records(rows, "x")
    assert [r.experiment_id for r in flat] == ["sweep/phys", "sweep/empty", "x/ratio"]


def test_rerun_is_byte_identical_regardless_of_workers():
    p = plan(lambda_bars=(25.0, 50.0), n_trajectories=20_000, seed=9, methods=("monte-carlo", "quadrature"))
    a = ex.records_to_csv(ex.run_convergence_study(p))
    b = ex.records_to_csv(ex.run_convergence_study(p))
    c = ex.records_to_csv(ex.run_convergence_study(replace(p, workers=2)))
    assert a == b == c


def test_mc_rows_within_three_sigma_of_quadrature():
    recs = ex.run_convergence_study(plan(
        lambda_bars=(10.0, 25.0), kappa_bars=(1.0, INF), orders=(1, 2),
        methods=("quadrature", "monte-carlo"), n_trajectories=50_000, seed=21,
    ))
    q = {(r.lambda_bar, r.kappa_bar, r.m): r.estimate for r in recs if r.method == "quadrature"}
    mc = [r for r in recs if r.method == "monte-carlo"]
    z = [abs(r.estimate - q[(r.lambda_bar, r.kappa_bar, r.m)]) / r.std_err for r in mc]
    # with 8 rows, at most one 3-sigma excursion is tolerable
    assert sum(v > 3 for v in z) <= 1


# -- uniform-start CDF ---------------------------------------------------------


def _uniform_oracle(t, ell, kappa):
    """Average of the Robin half-line CDF over x0 in (0, ell), by mpmath."""
    with mp.workdps(30):
        def F(x):
            a = x / mp.sqrt(4 * t)
            if kappa == INF:
                return mp.erfc(a)
            return mp.erfc(a) - mp.exp(kappa * x + kappa**2 * t) * mp.erfc(a + kappa * mp.sqrt(t))
        return float(mp.quad(F, [0, ell]) / ell)


@pytest.mark.parametrize("kappa", [INF, 0.5, 3.0])
@pytest.mark.parametrize("t", [1e-4, 1e-2, 0.3])
def test_uniform_start_cdf_against_mpmath(kappa, t):
    F = ex.uniform_start_cdf(1.0, 1.0, kappa)
    assert F(t) == pytest.approx(_uniform_oracle(t, 1.0, kappa), rel=1e-8, abs=1e-14)


def test_uniform_start_cdf_short_time_exponents():
    F = ex.uniform_start_cdf(1.0, 1.0, INF)
    G = ex.uniform_start_cdf(1.0, 1.0, 1.0)
    t = np.array([1e-8, 1e-6])
    slope_perfect = np.diff(np.log(F(t))) / np.diff(np.log(t))
    slope_partial = np.diff(np.log(G(t))) / np.diff(np.log(t))
    assert slope_perfect[0] == pytest.approx(0.5, rel=1e-3)
    assert slope_partial[0] == pytest.approx(1.0, rel=1e-3)


@given(kappa=st.one_of(st.floats(0.05, 50), st.just(INF)))
@settings(max_examples=15, deadline=None)
def test_uniform_start_cdf_is_a_cdf(kappa):
    F = ex.uniform_start_cdf(1.0, 1.0, kappa)
    t = np.geomspace(1e-6, 10, 60)
    v = F(t)
    assert np.all(np.diff(v) >= -1e-12)
    assert np.all((v >= 0) & (v <= 1 + 1e-12))


def test_uniform_study_large_rate_prefactor():
    recs = ex.run_initial_condition_study(ex.SweepPlan(
        problem=uniform_interval_problem(), lambda_bars=(1e4,), methods=("quadrature",),
    ))
    r = recs[0]
    assert r.lambda_ * r.estimate == pytest.approx(0.5, rel=0.02)
    assert r.prediction * r.lambda_ == pytest.approx(0.5, rel=1e-12)


def test_problem_cdf_dispatch():
    assert isinstance(ex.problem_cdf(half_line_problem()), CdfModel)
    est = conditional_moment_from_cdf(ex.problem_cdf(qsd_problem(1.0)), InactivationLaw(1.0), 1)
    assert est.value == pytest.approx(0.5, rel=1e-9)


def test_conditional_cdf_distance_qsd():
    spec = qsd_problem(1.0)
    law = InactivationLaw(1.0)
    batch = run_trajectories(spec, SimulationConfig.for_rate(1.0, 20_000, seed=5))
    d = ex.conditional_cdf_distance(batch, law, lambda t: 1 - np.exp(-2 * np.asarray(t)))
    assert d < 0.02
