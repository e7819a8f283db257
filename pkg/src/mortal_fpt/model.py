"""Problem description types shared by every engine, and their validation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import ndimage

from . import geometry as geo
from .errors import (
    ConfigError,
    DegenerateDiffusivity,
    DisconnectedDomain,
    EmptyTarget,
    ProblemValidationError,
    StartInsideTarget,
)
from .geometry import Ball, Box, HalfSpace, Point, Shape, Shell, shape_from_dict

PERFECT = math.inf
"""Reactivity of a perfectly absorbing target."""

DRIFT_NONE, DRIFT_CONSTANT, DRIFT_RADIAL, DRIFT_LINEAR = 0, 1, 2, 3
_DRIFT_KINDS = {"none": DRIFT_NONE, "constant": DRIFT_CONSTANT, "radial": DRIFT_RADIAL, "linear": DRIFT_LINEAR}


def _tuple(v) -> tuple[float, ...]:
    return tuple(float(x) for x in np.atleast_1d(np.asarray(v, dtype=float)))


def _matrix(v) -> tuple[tuple[float, ...], ...]:
    a = np.atleast_2d(np.asarray(v, dtype=float))
    return tuple(tuple(float(x) for x in r) for r in a)


@dataclass(frozen=True)
class InactivationLaw:
    """Gamma-distributed inactivation time with ``rate`` and ``shape``."""

    rate: float
    shape: float = 1.0

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be positive and finite, got {self.rate}")
        if not (self.shape > 0 and math.isfinite(self.shape)):
            raise ValueError(f"shape must be positive and finite, got {self.shape}")

    def survival(self, t):
        from .analytic import gamma_survival

        return gamma_survival(self, t)

    def density(self, t):
        from .analytic import gamma_density

        return gamma_density(self, t)


@dataclass(frozen=True)
class DomainGeometry:
    dimension: int
    outer: Shape
    obstacles: tuple[Shape, ...] = ()

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if not isinstance(self.outer, (Box, Ball)):
            raise ValueError("outer boundary must be a box or a ball")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        for s in (self.outer, *self.obstacles):
            if s.dim != self.dimension:
                raise ValueError(f"shape {s} does not match dimension {self.dimension}")

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.outer.bounds()

    def without_obstacles(self) -> "DomainGeometry":
        return replace(self, obstacles=())


@dataclass(frozen=True)
class TargetSpec:
    region: tuple[Shape, ...]
    reactivity: float = PERFECT

    def __post_init__(self):
        region = self.region if isinstance(self.region, (tuple, list)) else (self.region,)
        object.__setattr__(self, "region", tuple(region))
        if not self.reactivity >= 0:
            raise ValueError("reactivity must be nonnegative (inf for perfect absorption)")

    @property
    def perfect(self) -> bool:
        return math.isinf(self.reactivity)


@dataclass(frozen=True)
class InitialDistribution:
    """Where searchers start.

    kind ``point`` needs ``point``; kind ``uniform`` samples uniformly over
    ``region``, or over the free domain outside the target when ``region`` is
    empty (this variant may start arbitrarily close to the target);
    kind ``quasi-stationary`` draws the hitting time directly as Exp(``rate``).
    """

    kind: str
    point: Optional[tuple[float, ...]] = None
    region: tuple[Shape, ...] = ()
    rate: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("point", "uniform", "quasi-stationary"):
            raise ValueError(f"unknown initial kind {self.kind!r}")
        if self.kind == "point":
            if self.point is None:
                raise ValueError("point initial distribution needs 'point'")
            object.__setattr__(self, "point", _tuple(self.point))
        object.__setattr__(self, "region", tuple(self.region))
        if self.kind == "quasi-stationary" and not (self.rate and self.rate > 0):
            raise ValueError("quasi-stationary initial distribution needs rate > 0")

    @property
    def compact_support(self) -> bool:
        return self.kind == "point" or (self.kind == "uniform" and bool(self.region))

    def support(self) -> tuple[Shape, ...]:
        if self.kind == "point":
            return (Point(self.point),)
        return self.region


@dataclass(frozen=True)
class DriftField:
    """Drift b(x): none, constant ``vector``, ``radial`` about ``center``, or ``linear`` (matrix @ x + vector)."""

    kind: str = "none"
    vector: tuple[float, ...] = ()
    center: tuple[float, ...] = ()
    magnitude: float = 0.0
    matrix: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self):
        if self.kind not in _DRIFT_KINDS:
            raise ValueError(f"unknown drift kind {self.kind!r}")
        object.__setattr__(self, "vector", _tuple(self.vector) if len(self.vector) else ())
        object.__setattr__(self, "center", _tuple(self.center) if len(self.center) else ())
        object.__setattr__(self, "matrix", _matrix(self.matrix) if len(self.matrix) else ())
        object.__setattr__(self, "magnitude", float(self.magnitude))

    def encode(self, dim: int) -> np.ndarray:
        """Flat parameter block: [kind, magnitude, vector(3), center(3), matrix(9)]."""
        out = np.zeros(17)
        out[0] = _DRIFT_KINDS[self.kind]
        out[1] = self.magnitude
        if self.vector:
            out[2 : 2 + dim] = self.vector[:dim]
        if self.center:
            out[5 : 5 + dim] = self.center[:dim]
        if self.matrix:
            m = np.zeros((3, 3))
            m[:dim, :dim] = np.asarray(self.matrix)[:dim, :dim]
            out[8:17] = m.ravel()
        return out

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        dim = pts.shape[1]
        if self.kind == "none":
            return np.zeros_like(pts)
        if self.kind == "constant":
            return np.broadcast_to(np.asarray(self.vector[:dim]), pts.shape).copy()
        if self.kind == "radial":
            r = pts - np.asarray(self.center[:dim])
            n = np.linalg.norm(r, axis=1, keepdims=True)
            with np.errstate(invalid="ignore", divide="ignore"):
                out = np.where(n > 0, self.magnitude * r / n, 0.0)
            return out
        a = np.asarray(self.matrix)[:dim, :dim]
        c = np.asarray(self.vector[:dim]) if self.vector else np.zeros(dim)
        return pts @ a.T + c

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.vector:
            d["vector"] = list(self.vector)
        if self.center:
            d["center"] = list(self.center)
        if self.magnitude:
            d["magnitude"] = self.magnitude
        if self.matrix:
            d["matrix"] = [list(r) for r in self.matrix]
        return d


@dataclass(frozen=True)
class DiffusivityField:
    """Anisotropy Sigma(x) = factor(x) * sigma, so a(x) = factor(x)**2 sigma sigma^T.

    ``regions`` pairs shapes with scalar factors; the first region containing
    x wins and points outside every region use factor 1. ``sigma`` defaults
    to the identity.
    """

    sigma: tuple[tuple[float, ...], ...] = ()
    regions: tuple[tuple[Shape, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sigma", _matrix(self.sigma) if len(self.sigma) else ())
        object.__setattr__(self, "regions", tuple((s, float(f)) for s, f in self.regions))

    @property
    def isotropic(self) -> bool:
        if not self.sigma:
            return True
        s = np.asarray(self.sigma)
        a = s @ s.T
        return bool(np.allclose(a, a[0, 0] * np.eye(len(a)), rtol=0, atol=1e-14))

    def sigma_matrix(self, dim: int) -> np.ndarray:
        if not self.sigma:
            return np.eye(dim)
        return np.asarray(self.sigma, dtype=float)[:dim, :dim]

    def encode(self, dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        sig = np.zeros((3, 3))
        sig[:dim, :dim] = self.sigma_matrix(dim)
        rows = geo.encode_shapes([s for s, _ in self.regions])
        factors = np.array([f for _, f in self.regions], dtype=float)
        return sig, rows, factors

    def factor(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        out = np.ones(len(pts))
        done = np.zeros(len(pts), dtype=bool)
        for shape, f in self.regions:
            inside = geo.shape_contains(shape, pts) & ~done
            out[inside] = f
            done |= inside
        return out

    def tensor(self, pts: np.ndarray) -> np.ndarray:
        """a(x) at each point, shape (n, dim, dim)."""
        pts = np.atleast_2d(pts)
        dim = pts.shape[1]
        s = self.sigma_matrix(dim)
        a0 = s @ s.T
        f = self.factor(pts)
        return (f**2)[:, None, None] * a0[None, :, :]

    def to_dict(self) -> dict:
        d: dict = {}
        if self.sigma:
            d["sigma"] = [list(r) for r in self.sigma]
        if self.regions:
            d["regions"] = [{"shape": s.to_dict(), "factor": f} for s, f in self.regions]
        return d


@dataclass(frozen=True)
class DynamicsSpec:
    diffusivity: float = 1.0
    drift: DriftField = field(default_factory=DriftField)
    anisotropy: DiffusivityField = field(default_factory=DiffusivityField)
    eigen_bounds: tuple[float, float] = (1e-6, 1e6)

    def __post_init__(self):
        if not (self.diffusivity > 0 and math.isfinite(self.diffusivity)):
            raise ValueError("diffusivity scale D must be positive and finite")
        object.__setattr__(self, "eigen_bounds", tuple(float(x) for x in self.eigen_bounds))


@dataclass(frozen=True)
class ProblemSpec:
    geometry: DomainGeometry
    dynamics: DynamicsSpec
    target: TargetSpec
    initial: InitialDistribution

    @property
    def dimension(self) -> int:
        return self.geometry.dimension

    def without_obstacles(self) -> "ProblemSpec":
        return replace(self, geometry=self.geometry.without_obstacles())


@dataclass(frozen=True)
class ConditionalMomentEstimate:
    """Estimate of E[tau^m | tau < sigma] together with where it came from."""

    order: float
    value: float
    std_err: float = 0.0
    n_effective: float = math.inf
    method: str = "analytic"
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.method not in ("analytic", "quadrature", "monte-carlo", "asymptotic"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.value < 0 or self.std_err < 0 or self.n_effective < 0:
            raise ValueError("estimate fields must be nonnegative")


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


def sample_grid(geometry: DomainGeometry, n: int) -> tuple[list[np.ndarray], np.ndarray]:
    """Regular node grid over the outer bounding box: (axes, points (N, d))."""
    lo, hi = geometry.bounds()
    axes = [np.linspace(lo[i], hi[i], n) for i in range(geometry.dimension)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return axes, np.ascontiguousarray(pts)


def free_mask(geometry: DomainGeometry, pts: np.ndarray, spacing: np.ndarray) -> np.ndarray:
    """Nodes inside the outer boundary and outside every obstacle.

    Thin walls are thickened by half a grid cell so they stay watertight on
    a face-connected lattice.
    """
    free = geo.shape_contains(geometry.outer, pts)
    for ob in geometry.obstacles:
        if isinstance(ob, Box) and not ob.has_interior():
            lo = np.array(ob.lo) - 0.5 * spacing * (np.array(ob.hi) == np.array(ob.lo))
            hi = np.array(ob.hi) + 0.5 * spacing * (np.array(ob.hi) == np.array(ob.lo))
            free &= ~geo.shape_contains(Box(lo, hi), pts)
        else:
            free &= ~geo.interior_points(ob.encode(), pts)
    return free


def _in_any(shapes, pts) -> np.ndarray:
    out = np.zeros(len(pts), dtype=bool)
    for s in shapes:
        out |= geo.shape_contains(s, pts)
    return out


def validate_problem(spec: ProblemSpec, grid: int = 256) -> ProblemSpec:
    """Check a problem against the standing assumptions.

    Returns ``spec`` unchanged when every check passes. Otherwise raises the
    single violation found, or a :class:`ProblemValidationError` carrying all
    of them in ``violations``.
    """
    errors: list[ProblemValidationError] = []
    dim = spec.dimension
    g = spec.geometry
    for s in (*spec.target.region, *spec.initial.region):
        if s.dim != dim:
            errors.append(ProblemValidationError(f"shape {s} does not match dimension {dim}"))
    if spec.initial.kind == "point" and len(spec.initial.point) != dim:
        errors.append(ProblemValidationError("initial point has wrong dimension"))
    if errors:
        raise _bundle(errors)

    if not spec.target.region or not any(s.has_interior() for s in spec.target.region):
        errors.append(EmptyTarget("target region has empty interior"))
    if spec.target.reactivity == 0:
        errors.append(EmptyTarget("reactivity 0 makes the target unreachable"))

    axes, pts = sample_grid(g, grid)
    spacing = np.array([a[1] - a[0] for a in axes])
    free = free_mask(g, pts, spacing)
    in_target = _in_any(spec.target.region, pts) & free
    if not errors and not in_target.any():
        errors.append(EmptyTarget("target does not intersect the free domain on the validation grid"))

    # compact-support start must stay clear of the target
    init = spec.initial
    if init.kind == "point":
        x0 = np.array(init.point)[None, :]
        if _in_any(spec.target.region, x0)[0]:
            errors.append(StartInsideTarget(f"initial point {init.point} lies in the target"))
        if not geo.shape_contains(g.outer, x0)[0] or any(
            geo.interior_points(ob.encode(), x0)[0] for ob in g.obstacles
        ):
            errors.append(ProblemValidationError(f"initial point {init.point} is not in the free domain"))
    elif init.kind == "uniform" and init.region:
        if any(_overlaps(u, t) for u in init.region for t in spec.target.region):
            errors.append(StartInsideTarget("initial support intersects the target"))

    # ellipticity of a = Sigma Sigma^T on the grid
    a1, a2 = spec.dynamics.eigen_bounds
    sample = pts[free] if free.any() else pts
    eig = np.linalg.eigvalsh(spec.dynamics.anisotropy.tensor(sample))
    if eig.min() <= a1 or eig.max() >= a2:
        errors.append(
            DegenerateDiffusivity(
                f"eigenvalues of a(x) span [{eig.min():.3g}, {eig.max():.3g}], outside ({a1:g}, {a2:g})"
            )
        )

    if not errors and init.kind != "quasi-stationary":
        shape = tuple(len(a) for a in axes)
        labels, _ = ndimage.label(free.reshape(shape))
        labels = labels.ravel()
        start_nodes = _support_nodes(init, g, pts, free, spacing)
        target_labels = set(np.unique(labels[in_target])) - {0}
        start_labels = set(np.unique(labels[start_nodes])) - {0}
        if not free.any():
            errors.append(DisconnectedDomain("obstacles cover the whole domain"))
        elif not start_labels:
            errors.append(DisconnectedDomain("initial support has no free grid node"))
        elif init.compact_support and not start_labels <= target_labels:
            errors.append(DisconnectedDomain("part of the initial support cannot reach the target"))
        elif not init.compact_support and not (start_labels & target_labels):
            errors.append(DisconnectedDomain("no free path from the start region to the target"))

    if errors:
        raise _bundle(errors)
    return spec


def _bundle(errors: list[ProblemValidationError]) -> ProblemValidationError:
    if len(errors) == 1:
        return errors[0]
    msg = "; ".join(f"{type(e).__name__}: {e}" for e in errors)
    return ProblemValidationError(msg, violations=errors)


def _overlaps(a: Shape, b: Shape, n: int = 64) -> bool:
    """Do two shapes share a point? Sampled on a grid over a's bounds."""
    ba = a.bounds()
    if ba is None:
        ba, a, b = b.bounds(), b, a
        if ba is None:
            return True
    lo, hi = ba
    axes = [np.linspace(lo[i], hi[i], n) for i in range(len(lo))]
    pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    pts = np.ascontiguousarray(pts)
    return bool((geo.shape_contains(a, pts) & geo.shape_contains(b, pts)).any())


def _support_nodes(init, g, pts, free, spacing) -> np.ndarray:
    if init.kind == "point":
        d = np.linalg.norm(pts - np.array(init.point), axis=1)
        d[~free] = np.inf
        idx = np.zeros(len(pts), dtype=bool)
        if np.isfinite(d).any():
            idx[np.argmin(d)] = True
        return idx
    if init.region:
        sel = _in_any(init.region, pts) & free
        if not sel.any():
            # region thinner than the grid: take the nearest free node to each shape
            for s in init.region:
                d = geo.shape_distance(s, pts)
                d[~free] = np.inf
                sel[np.argmin(d)] = True
        return sel
    return free.copy()


def min_feature_size(spec: ProblemSpec) -> float:
    """Smallest nonzero extent among domain, obstacles and target shapes."""
    sizes = [spec.geometry.outer.feature_size()]
    sizes += [s.feature_size() for s in spec.geometry.obstacles]
    sizes += [s.feature_size() for s in spec.target.region]
    return min(sizes)


# --------------------------------------------------------------------------
# nested key-value (de)serialisation
# --------------------------------------------------------------------------


def _check_keys(d, allowed: set, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(d).__name__}")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")


def _shape(d, where):
    try:
        return shape_from_dict(d)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _float(v) -> float:
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity", "perfect"):
        return math.inf
    return float(v)


def problem_to_dict(spec: ProblemSpec) -> dict:
    g, dyn, tgt, init = spec.geometry, spec.dynamics, spec.target, spec.initial
    out = {
        "geometry": {
            "dimension": g.dimension,
            "outer": g.outer.to_dict(),
            "obstacles": [s.to_dict() for s in g.obstacles],
        },
        "dynamics": {
            "diffusivity": dyn.diffusivity,
            "drift": dyn.drift.to_dict(),
            "anisotropy": dyn.anisotropy.to_dict(),
            "eigen_bounds": list(dyn.eigen_bounds),
        },
        "target": {
            "region": [s.to_dict() for s in tgt.region],
            "reactivity": "inf" if tgt.perfect else tgt.reactivity,
        },
        "initial": {"kind": init.kind},
    }
    if init.point is not None:
        out["initial"]["point"] = list(init.point)
    if init.region:
        out["initial"]["region"] = [s.to_dict() for s in init.region]
    if init.rate is not None:
        out["initial"]["rate"] = init.rate
    return out


def problem_from_dict(d: dict) -> ProblemSpec:
    _check_keys(d, {"geometry", "dynamics", "target", "initial"}, "problem")
    for k in ("geometry", "target", "initial"):
        if k not in d:
            raise ConfigError(f"problem: missing section {k!r}")
    try:
        gd = d["geometry"]
        _check_keys(gd, {"dimension", "outer", "obstacles"}, "geometry")
        geometry = DomainGeometry(
            dimension=int(gd["dimension"]),
            outer=_shape(gd["outer"], "geometry.outer"),
            obstacles=tuple(_shape(s, "geometry.obstacles") for s in gd.get("obstacles", []) or []),
        )

        dd = d.get("dynamics", {}) or {}
        _check_keys(dd, {"diffusivity", "drift", "anisotropy", "eigen_bounds"}, "dynamics")
        dr = dd.get("drift", {}) or {}
        _check_keys(dr, {"kind", "vector", "center", "magnitude", "matrix"}, "dynamics.drift")
        an = dd.get("anisotropy", {}) or {}
        _check_keys(an, {"sigma", "regions"}, "dynamics.anisotropy")
        regions = []
        for r in an.get("regions", []) or []:
            _check_keys(r, {"shape", "factor"}, "dynamics.anisotropy.regions")
            regions.append((_shape(r["shape"], "anisotropy region"), float(r["factor"])))
        dynamics = DynamicsSpec(
            diffusivity=float(dd.get("diffusivity", 1.0)),
            drift=DriftField(**dr),
            anisotropy=DiffusivityField(sigma=an.get("sigma", ()), regions=tuple(regions)),
            eigen_bounds=tuple(dd.get("eigen_bounds", (1e-6, 1e6))),
        )

        td = d["target"]
        _check_keys(td, {"region", "reactivity"}, "target")
        target = TargetSpec(
            region=tuple(_shape(s, "target.region") for s in td["region"]),
            reactivity=_float(td.get("reactivity", "inf")),
        )

        idd = d["initial"]
        _check_keys(idd, {"kind", "point", "region", "rate"}, "initial")
        initial = InitialDistribution(
            kind=idd["kind"],
            point=idd.get("point"),
            region=tuple(_shape(s, "initial.region") for s in idd.get("region", []) or []),
            rate=idd.get("rate"),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return ProblemSpec(geometry=geometry, dynamics=dynamics, target=target, initial=initial)


def load_problem(path) -> ProblemSpec:
    import yaml

    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if isinstance(data, dict) and "problem" in data:
        data = data["problem"]
    return problem_from_dict(data)


def dump_problem(spec: ProblemSpec, path) -> None:
    import yaml

    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump({"problem": problem_to_dict(spec)}, fh, sort_keys=False)


# --------------------------------------------------------------------------
# canonical instances used by tests, experiments and the CLI
# --------------------------------------------------------------------------


def half_line_problem(L: float = 1.0, D: float = 1.0, kappa: float = PERFECT, far: float = 50.0) -> ProblemSpec:
    """Searcher on (0, far] starting at x=L, target {x <= 0}, reflecting wall at ``far``."""
    return ProblemSpec(
        geometry=DomainGeometry(1, Box((-1.0,), (far,))),
        dynamics=DynamicsSpec(diffusivity=D),
        target=TargetSpec((HalfSpace((1.0,), 0.0),), kappa),
        initial=InitialDistribution("point", point=(L,)),
    )


def uniform_interval_problem(D: float = 1.0, kappa: float = PERFECT) -> ProblemSpec:
    """Searchers uniform on (0, 1), target {x <= 0}, reflecting at x = 1."""
    return ProblemSpec(
        geometry=DomainGeometry(1, Box((-1.0,), (1.0,))),
        dynamics=DynamicsSpec(diffusivity=D),
        target=TargetSpec((HalfSpace((1.0,), 0.0),), kappa),
        initial=InitialDistribution("uniform"),
    )


WALL_HALF_HEIGHT = math.sqrt((2 * math.sqrt(2) - 1) ** 2 - 1)
"""Wall half-height that makes the detour around it exactly 2*sqrt(2) long."""


def slab_wall_problem(with_wall: bool = True, D: float = 1.0) -> ProblemSpec:
    """Start at the origin, target the half-plane x >= 2, thin wall on x = 1.

    Without the wall the geodesic is 2; with it the shortest path runs to the
    wall tip and then straight to the target, 2*sqrt(2) in total.
    """
    h = WALL_HALF_HEIGHT
    obstacles = (Box((1.0, -h), (1.0, h)),) if with_wall else ()
    return ProblemSpec(
        geometry=DomainGeometry(2, Box((-3.0, -4.0), (3.0, 4.0)), obstacles),
        dynamics=DynamicsSpec(diffusivity=D),
        target=TargetSpec((Box((2.0, -4.0), (3.0, 4.0)),)),
        initial=InitialDistribution("point", point=(0.0, 0.0)),
    )


def disc_drift_problem(drift_strength: float = 0.0, D: float = 1.0) -> ProblemSpec:
    """Disc of radius 2.5, target disc of radius 0.5 at the centre, start at distance 1.

    ``drift_strength`` is |b| L / D with L = 1; the drift points radially outward.
    """
    drift = DriftField("radial", center=(0.0, 0.0), magnitude=drift_strength * D) if drift_strength else DriftField()
    return ProblemSpec(
        geometry=DomainGeometry(2, Ball((0.0, 0.0), 2.5)),
        dynamics=DynamicsSpec(diffusivity=D, drift=drift),
        target=TargetSpec((Ball((0.0, 0.0), 0.5),)),
        initial=InitialDistribution("point", point=(1.5, 0.0)),
    )


__all__ = [
    "PERFECT",
    "InactivationLaw",
    "DomainGeometry",
    "TargetSpec",
    "InitialDistribution",
    "DriftField",
    "DiffusivityField",
    "DynamicsSpec",
    "ProblemSpec",
    "ConditionalMomentEstimate",
    "validate_problem",
    "problem_to_dict",
    "problem_from_dict",
    "load_problem",
    "dump_problem",
    "half_line_problem",
    "uniform_interval_problem",
    "slab_wall_problem",
    "disc_drift_problem",
    "Box",
    "Ball",
    "HalfSpace",
    "Point",
    "Shell",
]
