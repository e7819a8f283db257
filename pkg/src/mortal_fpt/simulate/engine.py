"""Trajectory engine and the survival-weighted conditional-moment estimator."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import analytic
from ..errors import AllCensored, ConfigError, EffectiveSampleTooSmall, StepSizeUnstable
from ..geometry import encode_shapes
from ..model import ConditionalMomentEstimate, InactivationLaw, ProblemSpec, min_feature_size
from . import kernel
from .rng import as_seed

SPECULAR = "specular-reflection"


@dataclass(frozen=True)
class SimulationConfig:
    """Time stepping, censoring and sampling budget of one Monte Carlo run.

    ``dt_base`` is the largest step; near a perfectly absorbing target the
    step shrinks with the distance to it, never below ``dt_base * dt_min_ratio``.
    """

    dt_base: float
    t_max: float
    n_trajectories: int
    seed: int = 0
    dt_lambda_cap: float = 0.01
    boundary_scheme: str = SPECULAR
    workers: int = 1
    chunk_size: int = 4096
    adaptive: bool = True
    adapt_gamma: float = 0.25
    dt_min_ratio: float = 1e-4
    feature_fraction: float = 0.25
    n_eff_floor: float = 100.0

    def __post_init__(self):
        if not self.dt_base > 0:
            raise ConfigError("dt_base must be positive")
        if not self.t_max > 0:
            raise ConfigError("t_max must be positive")
        if int(self.n_trajectories) < 1:
            raise ConfigError("n_trajectories must be at least 1")
        if self.boundary_scheme != SPECULAR:
            raise ConfigError(f"unsupported boundary scheme {self.boundary_scheme!r}")
        if int(self.workers) < 1 or int(self.chunk_size) < 1:
            raise ConfigError("workers and chunk_size must be positive")
        if not 0 < self.dt_min_ratio <= 1:
            raise ConfigError("dt_min_ratio must lie in (0, 1]")

    def check_rate(self, law: InactivationLaw) -> None:
        """Run-time guards tying the step and horizon to the inactivation rate."""
        if law.rate * self.dt_base > self.dt_lambda_cap * (1 + 1e-12):
            raise StepSizeUnstable(
                f"rate*dt_base = {law.rate * self.dt_base:.4g} exceeds the cap {self.dt_lambda_cap:g}"
            )
        if self.t_max * law.rate < 10 * (1 - 1e-12):
            raise ConfigError(f"t_max = {self.t_max:g} is shorter than 10 / rate = {10 / law.rate:g}")

    @classmethod
    def for_rate(cls, rate: float, n_trajectories: int, seed: int = 0, C: float | None = None,
                 dt_fraction: float = 1.0, **kw) -> "SimulationConfig":
        """Largest allowed step and a horizon covering the weighted mass.

        The weighted integrand peaks near sqrt(C / rate); the horizon is
        max(20, 12 + 2 sqrt(rate C)) / rate, i.e. far past the peak.
        """
        cap = kw.get("dt_lambda_cap", 0.01)
        zeta = 0.0 if C is None else math.sqrt(rate * C)
        t_max = max(20.0, 12.0 + 2.0 * zeta) / rate
        return cls(dt_base=dt_fraction * cap / rate, t_max=t_max, n_trajectories=n_trajectories, seed=seed, **kw)


@dataclass(frozen=True)
class TrajectoryOutcome:
    trajectory_id: int
    fpt: float
    absorbed: bool
    steps: int

    @property
    def censored(self) -> bool:
        return not self.absorbed


@dataclass(frozen=True, eq=False)
class OutcomeBatch:
    """Structure-of-arrays view of a run, in trajectory-id order."""

    ids: np.ndarray
    fpt: np.ndarray
    absorbed: np.ndarray
    steps: np.ndarray
    t_max: float

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, i: int) -> TrajectoryOutcome:
        return TrajectoryOutcome(int(self.ids[i]), float(self.fpt[i]), bool(self.absorbed[i]), int(self.steps[i]))

    @classmethod
    def synthetic(cls, fpt, absorbed=None, t_max: float = math.inf) -> "OutcomeBatch":
        """Wrap externally generated first-passage times."""
        fpt = np.asarray(fpt, dtype=float)
        ab = np.ones(len(fpt), dtype=bool) if absorbed is None else np.asarray(absorbed, dtype=bool)
        return cls(np.arange(len(fpt)), fpt, ab, np.zeros(len(fpt), dtype=np.int64), t_max)


def absorb_partial(kappa: float, dt: float, D: float) -> float:
    """Absorption probability per target contact, min(1, kappa sqrt(pi dt / D))."""
    if not dt > 0 or not D > 0:
        raise ValueError("dt and D must be positive")
    if math.isinf(kappa):
        return 1.0
    return min(1.0, kappa * math.sqrt(math.pi * dt / D))


# --------------------------------------------------------------------------
# problem compilation
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Compiled:
    args: tuple = field(repr=False)
    n_steps_hint: float = 0.0


def _max_drift(spec: ProblemSpec) -> float:
    d = spec.dynamics.drift
    dim = spec.dimension
    if d.kind == "none":
        return 0.0
    if d.kind == "constant":
        return float(np.linalg.norm(d.vector[:dim]))
    if d.kind == "radial":
        return abs(d.magnitude)
    lo, hi = spec.geometry.bounds()
    corners = np.array(np.meshgrid(*[(a, b) for a, b in zip(lo, hi)], indexing="ij")).reshape(dim, -1).T
    return float(np.max(np.linalg.norm(d.evaluate(corners), axis=1)))


def _sigma_bounds(spec: ProblemSpec) -> tuple[float, float]:
    """(largest eigenvalue of sigma sigma^T, largest region factor)."""
    an = spec.dynamics.anisotropy
    s = an.sigma_matrix(spec.dimension)
    top = float(np.linalg.eigvalsh(s @ s.T).max())
    fmax = max([1.0] + [abs(f) for _, f in an.regions])
    return top, fmax


def compile_problem(spec: ProblemSpec, config: SimulationConfig) -> _Compiled:
    """Flatten a problem into kernel arrays and check the step against the geometry."""
    dim = spec.dimension
    D = spec.dynamics.diffusivity
    amax_sig, fmax = _sigma_bounds(spec)
    bmax = _max_drift(spec)
    jump = math.sqrt(2 * D * amax_sig * fmax**2 * config.dt_base) + bmax * config.dt_base
    feature = min_feature_size(spec)
    if jump > config.feature_fraction * feature:
        raise StepSizeUnstable(
            f"per-step displacement {jump:.4g} exceeds {config.feature_fraction:g} x feature size {feature:.4g}"
        )
    init = spec.initial
    kind = {"point": kernel.INIT_POINT, "uniform": kernel.INIT_UNIFORM, "quasi-stationary": kernel.INIT_QSD}[init.kind]
    x0 = np.zeros(3)
    if init.kind == "point":
        x0[:dim] = init.point
    init_rows = encode_shapes(init.region) if init.kind == "uniform" else np.zeros((0, 8))
    lo, hi = spec.geometry.bounds()
    if init.kind == "uniform" and init.region:
        boxes = [s.bounds() for s in init.region if s.bounds() is not None]
        if boxes:
            lo = np.maximum(lo, np.min([b[0] for b in boxes], axis=0))
            hi = np.minimum(hi, np.max([b[1] for b in boxes], axis=0))
    ilo, ihi = np.zeros(3), np.zeros(3)
    ilo[:dim], ihi[:dim] = lo, hi
    sig, diff_rows, diff_factors = spec.dynamics.anisotropy.encode(dim)
    perfect = math.isinf(spec.target.reactivity)
    p_abs = absorb_partial(spec.target.reactivity, config.dt_base, D)
    glo, ghi = spec.geometry.bounds()
    eps = 1e-12 * max(1.0, float(np.max(ghi - glo)))
    dt_min = config.dt_base * config.dt_min_ratio if config.adaptive else config.dt_base
    args = (
        dim, kind, x0, init_rows, ilo, ihi, float(init.rate or 1.0),
        spec.geometry.outer.encode(), encode_shapes(spec.geometry.obstacles), encode_shapes(spec.target.region),
        spec.dynamics.drift.encode(dim), np.ascontiguousarray(sig), diff_rows, diff_factors,
        float(D), perfect, float(p_abs),
        float(config.dt_base), float(dt_min), float(config.adapt_gamma), amax_sig, bmax,
        float(config.t_max), eps,
    )
    return _Compiled(args)


def _run_chunk(compiled: _Compiled, seed, first: int, count: int, fpt, status, steps):
    dim, *rest = compiled.args
    kernel.run_range(first, count, seed, dim, *rest, fpt, status, steps)


def run_trajectories(spec: ProblemSpec, config: SimulationConfig, first_id: int = 0,
                     count: int | None = None) -> OutcomeBatch:
    """Simulate ids ``first_id .. first_id + count - 1`` (default: the whole budget).

    Chunks of ids are spread over ``config.workers`` threads; every chunk
    writes its own slice, so the result does not depend on the worker count.
    """
    n = int(config.n_trajectories) if count is None else int(count)
    compiled = compile_problem(spec, config)
    seed = as_seed(config.seed)
    fpt = np.empty(n)
    status = np.empty(n, dtype=np.int8)
    steps = np.empty(n, dtype=np.int64)
    starts = list(range(0, n, int(config.chunk_size)))

    def job(s):
        e = min(s + int(config.chunk_size), n)
        _run_chunk(compiled, seed, first_id + s, e - s, fpt[s:e], status[s:e], steps[s:e])

    if config.workers == 1 or len(starts) == 1:
        for s in starts:
            job(s)
    else:
        with ThreadPoolExecutor(max_workers=int(config.workers)) as pool:
            list(pool.map(job, starts))
    if np.any(status == kernel.START_FAILED):
        raise StepSizeUnstable("could not place a start point in the initial region by rejection")
    return OutcomeBatch(np.arange(first_id, first_id + n), fpt, status == kernel.ABSORBED, steps, float(config.t_max))


def sample_path_fpt(spec: ProblemSpec, config: SimulationConfig, trajectory_id: int) -> TrajectoryOutcome:
    """First-passage outcome of one trajectory; a pure function of its arguments."""
    if not 0 <= trajectory_id < config.n_trajectories:
        raise ValueError(f"trajectory_id {trajectory_id} outside [0, {config.n_trajectories})")
    return run_trajectories(spec, config, trajectory_id, 1)[0]


# --------------------------------------------------------------------------
# estimators
# --------------------------------------------------------------------------


def _log_weights(batch: OutcomeBatch, law: InactivationLaw) -> np.ndarray:
    lw = np.full(len(batch), -np.inf)
    ab = batch.absorbed
    if ab.any():
        lw[ab] = analytic.log_gamma_survival(law, batch.fpt[ab])
    return lw


def estimate_from_outcomes(batch: OutcomeBatch, law: InactivationLaw, orders: Sequence[float],
                           n_eff_floor: float = 100.0) -> list[ConditionalMomentEstimate]:
    """Survival-weighted estimates of E[tau^m | tau < sigma] for each order m.

    Absorbed trajectory i gets weight S_sigma(tau_i); censored ones get zero.
    """
    if not len(orders):
        raise ValueError("orders must be nonempty")
    if not batch.absorbed.any():
        raise AllCensored(f"all {len(batch)} trajectories were censored at t_max={batch.t_max:g}")
    lw = _log_weights(batch, law)
    top = lw.max()
    if not np.isfinite(top):
        raise EffectiveSampleTooSmall("every absorbed trajectory has vanishing weight")
    w = np.exp(lw - top)
    sw = w.sum()
    n_eff = float(sw**2 / np.sum(w * w))
    if n_eff < n_eff_floor:
        raise EffectiveSampleTooSmall(f"effective sample size {n_eff:.1f} below the floor {n_eff_floor:g}")
    n_cens = int(np.count_nonzero(~batch.absorbed))
    log_bias = -math.inf
    if n_cens and math.isfinite(batch.t_max):
        log_bias = math.log(n_cens) + float(analytic.log_gamma_survival(law, batch.t_max)) - top - math.log(sw)
    tau = np.where(batch.absorbed, batch.fpt, 0.0)
    out = []
    for m in orders:
        if not m > 0:
            raise ValueError(f"order must be positive, got {m}")
        y = tau**m
        r = float(np.sum(w * y) / sw)
        se = float(math.sqrt(np.sum(w * w * (y - r) ** 2)) / sw)
        out.append(
            ConditionalMomentEstimate(
                order=m,
                value=r,
                std_err=se,
                n_effective=n_eff,
                method="monte-carlo",
                diagnostics={
                    "n": len(batch),
                    "n_absorbed": int(batch.absorbed.sum()),
                    "n_censored": n_cens,
                    "censoring_bias_bound": math.exp(log_bias) if log_bias < 700 else math.inf,
                    "mean_steps": float(batch.steps.mean()),
                },
            )
        )
    return out


@dataclass(frozen=True)
class HittingProbability:
    value: float
    std_err: float
    censoring_bias_bound: float
    n: int

    @property
    def log_value(self) -> float:
        return math.log(self.value) if self.value > 0 else -math.inf


def hitting_probability_from_outcomes(batch: OutcomeBatch, law: InactivationLaw) -> HittingProbability:
    if not batch.absorbed.any():
        raise AllCensored(f"all {len(batch)} trajectories were censored at t_max={batch.t_max:g}")
    w = np.exp(_log_weights(batch, law))
    n = len(batch)
    n_cens = int(np.count_nonzero(~batch.absorbed))
    bias = n_cens / n * (float(law.survival(batch.t_max)) if math.isfinite(batch.t_max) else 0.0)
    return HittingProbability(float(w.mean()), float(w.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0, bias, n)


def estimate_conditional_moments(spec: ProblemSpec, law: InactivationLaw, orders: Sequence[float],
                                 config: SimulationConfig) -> list[ConditionalMomentEstimate]:
    config.check_rate(law)
    batch = run_trajectories(spec, config)
    return estimate_from_outcomes(batch, law, orders, config.n_eff_floor)


def estimate_hitting_probability(spec: ProblemSpec, law: InactivationLaw,
                                 config: SimulationConfig) -> HittingProbability:
    config.check_rate(law)
    return hitting_probability_from_outcomes(run_trajectories(spec, config), law)


def dump_outcomes(batch: OutcomeBatch, law: InactivationLaw | None, path) -> Path:
    """One row per trajectory: id, first-passage time (empty when censored), censored flag, weight."""
    path = Path(path)
    w = np.exp(_log_weights(batch, law)) if law is not None else np.where(batch.absorbed, 1.0, 0.0)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["trajectory_id", "fpt", "censored", "weight"])
        for i in range(len(batch)):
            ab = bool(batch.absorbed[i])
            wr.writerow([int(batch.ids[i]), repr(float(batch.fpt[i])) if ab else "", int(not ab), repr(float(w[i]))])
    tmp.replace(path)
    return path
