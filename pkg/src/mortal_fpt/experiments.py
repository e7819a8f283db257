"""Parameter sweeps over the inactivation rate and the studies built on them.

Every sweep point is addressed by (lambda_bar, beta, kappa_bar, m) with
lambda = lambda_bar D / L_ref^2 and kappa = kappa_bar D / L_ref. Results are
lists of :class:`SweepRecord` in plan order; :func:`write_results` persists
them as ``results.csv`` next to a ``manifest.json``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import special

from . import __version__, analytic, geodesic
from . import quadrature as quad
from .errors import FptError
from .geometry import HalfSpace
from .model import InactivationLaw, ProblemSpec, problem_to_dict
from .simulate import SimulationConfig, estimate_from_outcomes, run_trajectories

METHODS = ("analytic", "quadrature", "monte-carlo", "asymptotic")
CSV_COLUMNS = (
    "experiment_id", "method", "lambda", "beta", "kappa", "m",
    "estimate", "std_err", "n_eff", "L", "D", "prediction", "ratio",
)


@dataclass(frozen=True)
class SweepPlan:
    """What to compute and with which budget.

    ``length`` fixes the reference length used to turn lambda_bar into a
    rate and, unless ``geodesic_length`` is also given, the L in the
    predictor. When omitted both come from the geodesic module.
    """

    problem: ProblemSpec
    lambda_bars: tuple[float, ...]
    betas: tuple[float, ...] = (1.0,)
    kappa_bars: tuple[float, ...] = (math.inf,)
    orders: tuple[float, ...] = (1,)
    methods: tuple[str, ...] = METHODS
    n_trajectories: int = 100_000
    seed: int = 0
    experiment_id: str = "sweep"
    length: Optional[float] = None
    geodesic_length: Optional[float] = None
    dt_fraction: float = 1.0
    workers: int = 1
    grid: Optional[int] = None
    n_eff_floor: float = 100.0

    def __post_init__(self):
        for name in ("lambda_bars", "betas", "kappa_bars", "orders", "methods"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must be nonempty")
            object.__setattr__(self, name, vals)
        if any(not lb > 0 for lb in self.lambda_bars):
            raise ValueError("lambda_bar values must be positive")
        if any(not b > 0 for b in self.betas):
            raise ValueError("beta values must be positive")
        if any(not k > 0 for k in self.kappa_bars):
            raise ValueError("kappa_bar values must be positive")
        if any(not m > 0 for m in self.orders):
            raise ValueError("orders must be positive")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        if int(self.n_trajectories) < 1:
            raise ValueError("n_trajectories must be positive")
        if self.length is not None and not self.length > 0:
            raise ValueError("length must be positive")
        if not self.dt_fraction > 0 or int(self.workers) < 1:
            raise ValueError("dt_fraction and workers must be positive")

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "problem"}
        d["problem"] = problem_to_dict(self.problem)
        return d


def log_grid(lo: float, hi: float, n: int) -> tuple[float, ...]:
    """n log-spaced lambda_bar values from lo to hi inclusive."""
    return tuple(float(v) for v in np.geomspace(lo, hi, n))


@dataclass
class SweepRecord:
    experiment_id: str
    method: str
    lambda_: float
    beta: float
    kappa: float
    m: float
    estimate: float = math.nan
    std_err: float = math.nan
    n_eff: float = math.nan
    L: float = math.nan
    D: float = math.nan
    prediction: float = math.nan
    ratio: float = math.nan
    lambda_bar: float = math.nan
    kappa_bar: float = math.nan
    error: Optional[str] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.error is not None

    def row(self) -> list:
        return [
            self.experiment_id, self.method, self.lambda_, self.beta, self.kappa, self.m,
            self.estimate, self.std_err, self.n_eff, self.L, self.D, self.prediction, self.ratio,
        ]


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def records_to_csv(records: Sequence[SweepRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_fmt(v) for v in r.row()])
    return buf.getvalue()


def read_results(path) -> list[dict]:
    """Parse a results file back; numeric columns come back as floats."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({k: (v if k in ("experiment_id", "method") else float(v)) for k, v in r.items()})
    return out


def atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_results(records: Sequence[SweepRecord], out_dir, manifest: dict, force: bool = False) -> Path:
    """results.csv plus manifest.json in ``out_dir``; refuses to overwrite unless ``force``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / "results.csv"
    if not force and (target.exists() or (out / "manifest.json").exists()):
        raise FileExistsError(f"{out} already holds results; pass --force to overwrite")
    atomic_write(target, records_to_csv(records))
    failures = [
        {"row": i, "experiment_id": r.experiment_id, "method": r.method, "error": r.error}
        for i, r in enumerate(records)
        if r.failed
    ]
    full = {
        "format_version": 1,
        "artifact_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "columns": list(CSV_COLUMNS),
        "failures": failures,
        **manifest,
    }
    atomic_write(out / "manifest.json", json.dumps(full, indent=2, sort_keys=True, default=_json_default) + "\n")
    return target


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return repr(o)
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


# --------------------------------------------------------------------------
# problem introspection
# --------------------------------------------------------------------------


def half_line_start(spec: ProblemSpec) -> Optional[float]:
    """Distance L when the problem is (effectively) the half-line with a point start."""
    if spec.dimension != 1 or spec.initial.kind != "point" or len(spec.target.region) != 1:
        return None
    t = spec.target.region[0]
    if not isinstance(t, HalfSpace) or t.normal != (1.0,):
        return None
    x0 = spec.initial.point[0]
    L = x0 - t.offset
    hi = spec.geometry.bounds()[1][0]
    if L <= 0 or hi - x0 < 20 * L or spec.geometry.obstacles:
        return None
    dyn = spec.dynamics
    if dyn.drift.kind != "none" or dyn.anisotropy.regions or dyn.anisotropy.sigma:
        return None
    return L


def _uniform_interval(spec: ProblemSpec) -> Optional[float]:
    """Length of the start interval when searchers start uniformly next to a half-line target."""
    if spec.dimension != 1 or spec.initial.kind != "uniform" or spec.initial.region:
        return None
    if len(spec.target.region) != 1 or spec.geometry.obstacles:
        return None
    t = spec.target.region[0]
    if not isinstance(t, HalfSpace) or t.normal != (1.0,):
        return None
    return spec.geometry.bounds()[1][0] - t.offset


_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)


def uniform_start_cdf(length: float, D: float, kappa: float) -> quad.CdfModel:
    """P(tau <= t) for a start uniform on (0, length) and a Robin end at 0.

    The wall behind the searchers is ignored, which is exact up to terms of
    order exp(-length^2 / (D t)); those never matter when the inactivation
    rate is large compared with D / length^2.
    """
    if math.isinf(kappa):
        def cdf(t):
            tt = np.asarray(t, dtype=float)
            s = np.sqrt(4 * D * np.maximum(tt, 1e-300))
            z = length / s
            ierfc = np.exp(-z * z) / math.sqrt(math.pi) - z * special.erfc(z)
            return np.where(tt > 0, s * (1 / math.sqrt(math.pi) - ierfc) / length, 0.0)
    else:
        def cdf(t):
            tt = np.atleast_1d(np.asarray(t, dtype=float))
            out = np.zeros(tt.shape)
            pos = tt > 0
            tp = tt[pos][:, None]
            s = np.sqrt(4 * D * tp)
            top = np.minimum(length, 14 * s)
            x = 0.5 * top * (_GL_X[None, :] + 1)
            a = x / s
            delta = np.broadcast_to(kappa * np.sqrt(tp / D), a.shape)
            f = np.exp(-a * a) * analytic._erfcx_diff(a.ravel(), delta.ravel()).reshape(a.shape)
            out[pos] = 0.5 * top[:, 0] * (f @ _GL_W) / length
            return out.reshape(np.shape(t)) if np.ndim(t) else float(out[0])
    return quad.CdfModel.from_function(cdf, label=f"uniform(length={length!r},D={D!r},kappa={kappa!r})")


def problem_cdf(spec: ProblemSpec) -> quad.CdfModel:
    """Closed-form CDF of the hitting time where one is known."""
    D = spec.dynamics.diffusivity
    kappa = spec.target.reactivity
    if spec.initial.kind == "quasi-stationary":
        return quad.CdfModel.quasi_stationary(spec.initial.rate)
    L = half_line_start(spec)
    if L is not None:
        return quad.CdfModel.robin_1d(L, D, kappa)
    ell = _uniform_interval(spec)
    if ell is not None and spec.dynamics.drift.kind == "none":
        return uniform_start_cdf(ell, D, kappa)
    raise NotImplementedError("no closed-form hitting-time CDF for this problem")


def with_reactivity(spec: ProblemSpec, kappa: float) -> ProblemSpec:
    return replace(spec, target=replace(spec.target, reactivity=kappa))


def geodesic_length(spec: ProblemSpec, grid: Optional[int] = None) -> float:
    return geodesic.problem_length(spec, grid).length


# --------------------------------------------------------------------------
# sweep engine
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Point:
    lambda_bar: float
    kappa_bar: float


def _mc_config(plan: SweepPlan, rate: float, C: Optional[float]) -> SimulationConfig:
    return SimulationConfig.for_rate(
        rate, plan.n_trajectories, seed=plan.seed, C=C, dt_fraction=plan.dt_fraction,
        n_eff_floor=plan.n_eff_floor,
    )


def _rate_for(plan: SweepPlan, lambda_bar: float, beta: float, L_ref: float, D: float) -> float:
    # lambda_bar refers to the rate parameter itself; for beta != 1 the mean
    # inactivation time is beta / rate
    return lambda_bar * D / (L_ref * L_ref)


def _record(plan, method, rate, beta, kappa, m, L, D, lb, kb, **kw) -> SweepRecord:
    return SweepRecord(plan.experiment_id, method, rate, beta, kappa, m, L=L, D=D, lambda_bar=lb, kappa_bar=kb, **kw)


def _finish(rec: SweepRecord) -> SweepRecord:
    if math.isfinite(rec.estimate) and math.isfinite(rec.prediction) and rec.prediction > 0:
        rec.ratio = rec.estimate / rec.prediction
    return rec


def _mc_batch(plan: SweepPlan, spec: ProblemSpec, rate: float, C: Optional[float]):
    cfg = _mc_config(plan, rate, C)
    cfg.check_rate(InactivationLaw(rate))
    return run_trajectories(spec, cfg)


def _point_records(plan: SweepPlan, spec: ProblemSpec, pt: _Point, L_ref: float, L_geo: float,
                   predictor) -> list[SweepRecord]:
    D = spec.dynamics.diffusivity
    kappa = pt.kappa_bar * D / L_ref
    spec_k = with_reactivity(spec, kappa)
    rate0 = _rate_for(plan, pt.lambda_bar, 1.0, L_ref, D)
    out: list[SweepRecord] = []
    batch = None
    batch_err = None
    if "monte-carlo" in plan.methods:
        try:
            batch = _mc_batch(plan, spec_k, rate0, L_geo * L_geo / (4 * D) if math.isfinite(L_geo) else None)
        except FptError as e:
            batch_err = f"{type(e).__name__}: {e}"
    cdf = cdf_err = None
    if "quadrature" in plan.methods:
        try:
            cdf = problem_cdf(spec_k)
        except (NotImplementedError, FptError) as e:
            cdf_err = f"{type(e).__name__}: {e}"
    L_half = half_line_start(spec_k)
    for beta in plan.betas:
        rate = _rate_for(plan, pt.lambda_bar, beta, L_ref, D)
        law = InactivationLaw(rate, beta)
        for m in plan.orders:
            pred = predictor(law, m)
            common = dict(L=L_geo, D=D, lb=pt.lambda_bar, kb=pt.kappa_bar)
            for method in plan.methods:
                rec = _record(plan, method, rate, beta, kappa, m, prediction=pred, **common)
                try:
                    if method == "analytic":
                        if L_half is None:
                            raise NotImplementedError("closed form needs the half-line problem")
                        p = analytic.Dimensionless1DParams.from_physical(rate, L_half, D, kappa)
                        val = analytic.conditional_moment_1d_exact(p, int(m) if float(m).is_integer() else m, beta)
                        rec.estimate = val * (L_half * L_half / D) ** m
                        rec.std_err = 0.0
                        rec.n_eff = math.inf
                    elif method == "quadrature":
                        if cdf is None:
                            raise NotImplementedError(cdf_err)
                        e = quad.conditional_moment_from_cdf(cdf, law, m)
                        rec.estimate, rec.std_err, rec.n_eff = e.value, e.std_err, e.n_effective
                    elif method == "monte-carlo":
                        if batch is None:
                            raise RuntimeError(batch_err)
                        e = estimate_from_outcomes(batch, law, [m], plan.n_eff_floor)[0]
                        rec.estimate, rec.std_err, rec.n_eff = e.value, e.std_err, e.n_effective
                        rec.diagnostics = dict(e.diagnostics)
                    else:
                        rec.estimate = pred
                        rec.std_err = 0.0
                        rec.n_eff = math.inf
                except (FptError, NotImplementedError, RuntimeError, ValueError) as e:
                    rec.error = f"{type(e).__name__}: {e}"
                out.append(_finish(rec))
    return out


def _run_points(plan: SweepPlan, fn) -> list[SweepRecord]:
    points = [_Point(lb, kb) for lb in plan.lambda_bars for kb in plan.kappa_bars]
    if plan.workers > 1:
        with ThreadPoolExecutor(plan.workers) as ex:
            chunks = list(ex.map(fn, points))
    else:
        chunks = [fn(p) for p in points]
    return [r for c in chunks for r in c]


def _lengths(plan: SweepPlan, spec: ProblemSpec) -> tuple[float, float]:
    """(reference length for lambda_bar, geodesic length for the predictor)."""
    L_geo = plan.geodesic_length
    if L_geo is None:
        L_geo = plan.length if plan.length is not None else geodesic_length(spec, plan.grid)
    L_ref = plan.length if plan.length is not None else L_geo
    return L_ref, L_geo


def run_convergence_study(plan: SweepPlan) -> list[SweepRecord]:
    """Estimates against the large-rate predictor (L / (2 sqrt(D rate)))^m."""
    spec = plan.problem
    L_ref, L_geo = _lengths(plan, spec)
    D = spec.dynamics.diffusivity

    def predictor(law, m):
        return analytic.asymptotic_moment_geodesic(L_geo, D, law.rate, m)

    return _run_points(plan, lambda p: _point_records(plan, spec, p, L_ref, L_geo, predictor))


@dataclass
class ObstacleRow:
    lambda_bar: float
    beta: float
    m: float
    L_phys: float
    L_empty: float
    phys: SweepRecord
    empty: SweepRecord
    ratio: float = math.nan
    ratio_std_err: float = math.nan

    @property
    def predicted_ratio(self) -> float:
        return analytic.conjecture_ratio(self.L_phys, self.L_empty) ** self.m

    @property
    def gap(self) -> float:
        return abs(self.ratio / self.predicted_ratio - 1)


def run_obstacle_comparison(phys: ProblemSpec, empty: ProblemSpec, plan: SweepPlan,
                            L_phys: Optional[float] = None, L_empty: Optional[float] = None) -> list[ObstacleRow]:
    """Monte Carlo means with and without obstacles against L_phys / L_empty.

    lambda_bar is referred to ``plan.length`` when set and to L_phys otherwise;
    both problems run at the same rate and with the same seed.
    """
    L_phys = L_phys if L_phys is not None else geodesic_length(phys, plan.grid)
    L_empty = L_empty if L_empty is not None else geodesic_length(empty, plan.grid)
    analytic.conjecture_ratio(L_phys, L_empty)
    L_ref = plan.length if plan.length is not None else L_phys
    D = phys.dynamics.diffusivity
    mc = replace(plan, methods=("monte-carlo",))

    def predictor_for(L):
        return lambda law, m: analytic.asymptotic_moment_geodesic(L, D, law.rate, m)

    rows_p = _run_points(mc, lambda p: _point_records(replace(mc, experiment_id=f"{plan.experiment_id}/phys"),
                                                      phys, p, L_ref, L_phys, predictor_for(L_phys)))
    rows_e = _run_points(mc, lambda p: _point_records(replace(mc, experiment_id=f"{plan.experiment_id}/empty"),
                                                      empty, p, L_ref, L_empty, predictor_for(L_empty)))
    out = []
    for rp, re_ in zip(rows_p, rows_e):
        row = ObstacleRow(rp.lambda_bar, rp.beta, rp.m, L_phys, L_empty, rp, re_)
        if not rp.failed and not re_.failed and re_.estimate > 0:
            row.ratio = rp.estimate / re_.estimate
            row.ratio_std_err = row.ratio * math.hypot(rp.std_err / rp.estimate, re_.std_err / re_.estimate)
        out.append(row)
    return out


def obstacle_records(rows: Sequence[ObstacleRow], experiment_id: str) -> list[SweepRecord]:
    """Flatten a comparison into CSV records: phys, empty, then the ratio row per point."""
    out = []
    for r in rows:
        ratio = SweepRecord(
            f"{experiment_id}/ratio", "monte-carlo", r.phys.lambda_, r.beta, r.phys.kappa, r.m,
            estimate=r.ratio, std_err=r.ratio_std_err,
            n_eff=min(r.phys.n_eff, r.empty.n_eff), L=r.L_phys / r.L_empty, D=r.phys.D,
            prediction=r.predicted_ratio, lambda_bar=r.lambda_bar, kappa_bar=r.phys.kappa_bar,
        )
        out += [r.phys, r.empty, _finish(ratio)]
    return out


def run_initial_condition_study(plan: SweepPlan) -> list[SweepRecord]:
    """Non-compact starts: algebraic prediction for uniform starts, exact law for quasi-stationary ones.

    Uniform starts touching a perfect target have P(tau <= t) ~ t^(1/2); a
    partially absorbing target gives t^1. The predictions are
    Gamma(m + p) / Gamma(p) / rate^m and, for the quasi-stationary start,
    the moments of Exp(rate + lambda0).
    """
    spec = plan.problem
    kind = spec.initial.kind
    if kind not in ("uniform", "quasi-stationary"):
        raise ValueError("initial-condition study needs a uniform or quasi-stationary start")
    L_ref = plan.length if plan.length is not None else 1.0
    D = spec.dynamics.diffusivity

    if kind == "uniform":
        def predictor(law, m, kappa_bar):
            p = 0.5 if math.isinf(kappa_bar) else 1.0
            return analytic.algebraic_conditional_moment(p, m, law.rate)
    else:
        lam0 = spec.initial.rate

        def predictor(law, m, kappa_bar):
            mu = law.rate + lam0
            return math.exp(math.lgamma(m + 1) - m * math.log(mu))

    def fn(p: _Point):
        return _point_records(plan, spec, p, L_ref, 0.0, lambda law, m: predictor(law, m, p.kappa_bar))

    return _run_points(plan, fn)


def conditional_cdf_distance(batch, law: InactivationLaw, cdf) -> float:
    """Sup-norm between the survival-weighted empirical conditional CDF and ``cdf``."""
    ab = batch.absorbed
    t = batch.fpt[ab]
    w = np.exp(np.asarray(analytic.log_gamma_survival(law, t)))
    order = np.argsort(t, kind="stable")
    t = t[order]
    c = np.cumsum(w[order]) / w.sum()
    ref = cdf(t)
    before = np.concatenate(([0.0], c[:-1]))
    return float(max(np.max(np.abs(c - ref)), np.max(np.abs(before - ref))))


def run_manifest(plan: SweepPlan, command: str, started: float, **extra) -> dict:
    return {
        "command": command,
        "plan": plan.to_dict(),
        "seed": plan.seed,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "wall_clock_s": round(time.time() - started, 3),
        **extra,
    }


__all__ = [
    "SweepPlan",
    "SweepRecord",
    "ObstacleRow",
    "CSV_COLUMNS",
    "METHODS",
    "log_grid",
    "run_convergence_study",
    "run_obstacle_comparison",
    "run_initial_condition_study",
    "obstacle_records",
    "records_to_csv",
    "read_results",
    "write_results",
    "problem_cdf",
    "uniform_start_cdf",
    "half_line_start",
    "conditional_cdf_distance",
    "with_reactivity",
    "run_manifest",
]
