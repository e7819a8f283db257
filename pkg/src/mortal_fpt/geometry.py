"""Shape vocabulary and the compiled geometric predicates built on it.

Every shape encodes to a fixed-width float row so that the Monte Carlo
and shortest-path kernels can loop over mixed shape lists inside numba::

    [kind, p0, p1, p2, q0, q1, q2, r]

Boxes may be degenerate along one or more axes; a zero-width box is a
thin wall (a segment in 2D, a plate in 3D).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numba as nb
import numpy as np

POINT, BOX, BALL, HALFSPACE, SHELL = 0, 1, 2, 3, 4
ROW = 8
_EPS = 1e-12


def _vec(v) -> tuple[float, ...]:
    out = tuple(float(x) for x in np.atleast_1d(np.asarray(v, dtype=float)))
    if not 1 <= len(out) <= 3:
        raise ValueError(f"expected a 1-, 2- or 3-vector, got {v!r}")
    return out


@dataclass(frozen=True)
class Point:
    x: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", _vec(self.x))

    @property
    def dim(self) -> int:
        return len(self.x)

    def has_interior(self) -> bool:
        return False

    def bounds(self):
        return np.array(self.x), np.array(self.x)

    def feature_size(self) -> float:
        return math.inf

    def encode(self) -> np.ndarray:
        row = np.zeros(ROW)
        row[0] = POINT
        row[1 : 1 + self.dim] = self.x
        return row

    def to_dict(self) -> dict:
        return {"kind": "point", "x": list(self.x)}


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo, hi = _vec(self.lo), _vec(self.hi)
        if len(lo) != len(hi):
            raise ValueError("box corners differ in dimension")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"box lo {lo} exceeds hi {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def has_interior(self) -> bool:
        return all(b > a for a, b in zip(self.lo, self.hi))

    def bounds(self):
        return np.array(self.lo), np.array(self.hi)

    def feature_size(self) -> float:
        widths = [b - a for a, b in zip(self.lo, self.hi) if b > a]
        return min(widths) if widths else math.inf

    def encode(self) -> np.ndarray:
        row = np.zeros(ROW)
        row[0] = BOX
        row[1 : 1 + self.dim] = self.lo
        row[4 : 4 + self.dim] = self.hi
        return row

    def to_dict(self) -> dict:
        return {"kind": "box", "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius < 0:
            raise ValueError("negative radius")

    @property
    def dim(self) -> int:
        return len(self.center)

    def has_interior(self) -> bool:
        return self.radius > 0

    def bounds(self):
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    def feature_size(self) -> float:
        return 2 * self.radius if self.radius > 0 else math.inf

    def encode(self) -> np.ndarray:
        row = np.zeros(ROW)
        row[0] = BALL
        row[1 : 1 + self.dim] = self.center
        row[7] = self.radius
        return row

    def to_dict(self) -> dict:
        return {"kind": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class HalfSpace:
    """The closed set ``{x : normal . x <= offset}``; the normal is stored unit length."""

    normal: tuple[float, ...]
    offset: float

    def __post_init__(self):
        n = np.array(_vec(self.normal))
        norm = float(np.linalg.norm(n))
        if norm == 0:
            raise ValueError("half-space normal must be nonzero")
        object.__setattr__(self, "normal", tuple(float(v) for v in n / norm))
        object.__setattr__(self, "offset", float(self.offset) / norm)

    @property
    def dim(self) -> int:
        return len(self.normal)

    def has_interior(self) -> bool:
        return True

    def bounds(self):
        return None

    def feature_size(self) -> float:
        return math.inf

    def encode(self) -> np.ndarray:
        row = np.zeros(ROW)
        row[0] = HALFSPACE
        row[1 : 1 + self.dim] = self.normal
        row[7] = self.offset
        return row

    def to_dict(self) -> dict:
        return {"kind": "halfspace", "normal": list(self.normal), "offset": self.offset}


@dataclass(frozen=True)
class Shell:
    """Annulus (2D) or spherical shell (3D): ``inner <= |x - center| <= outer``."""

    center: tuple[float, ...]
    inner: float
    outer: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "inner", float(self.inner))
        object.__setattr__(self, "outer", float(self.outer))
        if not 0 <= self.inner <= self.outer:
            raise ValueError("shell needs 0 <= inner <= outer")

    @property
    def dim(self) -> int:
        return len(self.center)

    def has_interior(self) -> bool:
        return self.outer > self.inner

    def bounds(self):
        c = np.array(self.center)
        return c - self.outer, c + self.outer

    def feature_size(self) -> float:
        return self.outer - self.inner if self.outer > self.inner else math.inf

    def encode(self) -> np.ndarray:
        row = np.zeros(ROW)
        row[0] = SHELL
        row[1 : 1 + self.dim] = self.center
        row[4] = self.inner
        row[7] = self.outer
        return row

    def to_dict(self) -> dict:
        return {"kind": "shell", "center": list(self.center), "inner": self.inner, "outer": self.outer}


Shape = Union[Point, Box, Ball, HalfSpace, Shell]

_KINDS = {"point": Point, "box": Box, "ball": Ball, "halfspace": HalfSpace, "shell": Shell}
_FIELDS = {
    "point": {"x"},
    "box": {"lo", "hi"},
    "ball": {"center", "radius"},
    "halfspace": {"normal", "offset"},
    "shell": {"center", "inner", "outer"},
}


def shape_from_dict(d: dict) -> Shape:
    if not isinstance(d, dict) or "kind" not in d:
        raise ValueError(f"shape entry needs a 'kind' key: {d!r}")
    kind = d["kind"]
    if kind not in _KINDS:
        raise ValueError(f"unknown shape kind {kind!r}")
    extra = set(d) - _FIELDS[kind] - {"kind"}
    missing = _FIELDS[kind] - set(d)
    if extra:
        raise ValueError(f"unknown keys for {kind}: {sorted(extra)}")
    if missing:
        raise ValueError(f"missing keys for {kind}: {sorted(missing)}")
    return _KINDS[kind](**{k: v for k, v in d.items() if k != "kind"})


def encode_shapes(shapes) -> np.ndarray:
    if not shapes:
        return np.zeros((0, ROW))
    return np.stack([s.encode() for s in shapes])


# --------------------------------------------------------------------------
# compiled predicates
#
# Kernels take shape rows as 8-tuples and points as 3-tuples (unused trailing
# coordinates are ignored). Tuples are plain values inside numba, which keeps
# the hot loops free of array reference counting.
# --------------------------------------------------------------------------

_jit = nb.njit(cache=True, nogil=True)


@_jit
def row_at(a, k):
    """Row ``k`` of an (n, 8) shape table as a tuple."""
    return (a[k, 0], a[k, 1], a[k, 2], a[k, 3], a[k, 4], a[k, 5], a[k, 6], a[k, 7])


@_jit
def point_at(a, k):
    """Row ``k`` of an (n, dim) point array as a 3-tuple."""
    d = a.shape[1]
    return (a[k, 0], a[k, 1] if d > 1 else 0.0, a[k, 2] if d > 2 else 0.0)


@_jit
def _ndot(row, x, dim):
    # half-space normal dotted with x
    s = row[1] * x[0]
    if dim > 1:
        s += row[2] * x[1]
    if dim > 2:
        s += row[3] * x[2]
    return s


@_jit
def _radius(row, x, dim):
    s = (x[0] - row[1]) ** 2
    if dim > 1:
        s += (x[1] - row[2]) ** 2
    if dim > 2:
        s += (x[2] - row[3]) ** 2
    return math.sqrt(s)


@_jit
def contains(row, x, dim):
    """Closed-set membership."""
    kind = int(row[0])
    if kind == BOX:
        for i in range(dim):
            if x[i] < row[1 + i] or x[i] > row[4 + i]:
                return False
        return True
    if kind == BALL:
        return _radius(row, x, dim) <= row[7]
    if kind == HALFSPACE:
        return _ndot(row, x, dim) <= row[7]
    if kind == SHELL:
        r = _radius(row, x, dim)
        return row[4] <= r <= row[7]
    for i in range(dim):
        if x[i] != row[1 + i]:
            return False
    return True


@_jit
def distance(row, x, dim):
    """Euclidean distance from ``x`` to the shape (zero inside)."""
    kind = int(row[0])
    if kind == BOX:
        s = 0.0
        for i in range(dim):
            d = max(row[1 + i] - x[i], 0.0, x[i] - row[4 + i])
            s += d * d
        return math.sqrt(s)
    if kind == BALL:
        return max(_radius(row, x, dim) - row[7], 0.0)
    if kind == HALFSPACE:
        return max(_ndot(row, x, dim) - row[7], 0.0)
    if kind == SHELL:
        r = _radius(row, x, dim)
        return max(row[4] - r, 0.0, r - row[7])
    return _radius(row, x, dim)


@_jit
def _sphere_roots(row, rad, p, y, dim):
    # |p + s (y - p) - c|^2 = rad^2 with c the centre stored in the row
    a = 0.0
    b = 0.0
    cc = 0.0
    for i in range(dim):
        w = p[i] - row[1 + i]
        di = y[i] - p[i]
        a += di * di
        b += w * di
        cc += w * w
    cc -= rad * rad
    if a == 0.0:
        return np.inf, np.inf
    disc = b * b - a * cc
    if disc < 0.0:
        return np.inf, np.inf
    sq = math.sqrt(disc)
    return (-b - sq) / a, (-b + sq) / a


@_jit
def _sphere_normal(row, rad, p, y, s, dim, sign):
    n0 = sign * (p[0] + s * (y[0] - p[0]) - row[1]) / rad
    n1 = sign * (p[1] + s * (y[1] - p[1]) - row[2]) / rad if dim > 1 else 0.0
    n2 = sign * (p[2] + s * (y[2] - p[2]) - row[3]) / rad if dim > 2 else 0.0
    return n0, n1, n2


@_jit
def seg_enter(row, p, y, dim):
    """First entry of the segment p->y into the shape.

    ``p`` is assumed to lie outside the shape. Returns ``(s, n0, n1, n2)``
    with ``s`` in [0, 1] and the outward unit normal at the entry point, or
    ``s = inf`` when the segment never enters.
    """
    kind = int(row[0])
    if kind == BOX:
        t0 = -np.inf
        t1 = np.inf
        axis = -1
        sgn = 0.0
        for i in range(dim):
            lo = row[1 + i]
            hi = row[4 + i]
            di = y[i] - p[i]
            if di == 0.0:
                if p[i] < lo or p[i] > hi:
                    return np.inf, 0.0, 0.0, 0.0
                continue
            a = (lo - p[i]) / di
            b = (hi - p[i]) / di
            if a > b:
                a, b = b, a
            if a > t0:
                t0 = a
                axis = i
                sgn = -1.0 if di > 0.0 else 1.0
            if b < t1:
                t1 = b
            if t0 > t1 or t0 > 1.0 or t1 < 0.0:
                return np.inf, 0.0, 0.0, 0.0
        if axis < 0 or t0 < 0.0:
            return np.inf, 0.0, 0.0, 0.0
        return t0, sgn if axis == 0 else 0.0, sgn if axis == 1 else 0.0, sgn if axis == 2 else 0.0
    if kind == BALL:
        s0, s1 = _sphere_roots(row, row[7], p, y, dim)
        if s0 < 0.0 or s0 > 1.0:
            return np.inf, 0.0, 0.0, 0.0
        n0, n1, n2 = _sphere_normal(row, row[7], p, y, s0, dim, 1.0)
        return s0, n0, n1, n2
    if kind == HALFSPACE:
        a = _ndot(row, p, dim)
        nd = _ndot(row, y, dim) - a
        if nd >= 0.0:
            return np.inf, 0.0, 0.0, 0.0
        s = (row[7] - a) / nd
        if s < 0.0 or s > 1.0:
            return np.inf, 0.0, 0.0, 0.0
        return s, row[1], row[2], row[3]
    if kind == SHELL:
        if _radius(row, p, dim) < row[4]:
            # inside the hole: enter through the inner sphere going outwards
            s0, s1 = _sphere_roots(row, row[4], p, y, dim)
            if s1 < 0.0 or s1 > 1.0:
                return np.inf, 0.0, 0.0, 0.0
            n0, n1, n2 = _sphere_normal(row, row[4], p, y, s1, dim, -1.0)
            return s1, n0, n1, n2
        s0, s1 = _sphere_roots(row, row[7], p, y, dim)
        if s0 < 0.0 or s0 > 1.0:
            return np.inf, 0.0, 0.0, 0.0
        n0, n1, n2 = _sphere_normal(row, row[7], p, y, s0, dim, 1.0)
        return s0, n0, n1, n2
    return np.inf, 0.0, 0.0, 0.0


@_jit
def seg_exit(row, p, y, dim):
    """Where the segment p->y leaves a convex domain (box or ball).

    Returns ``(s, n0, n1, n2)`` with the inward unit normal, or ``s = inf``
    when ``y`` is still inside.
    """
    kind = int(row[0])
    if kind == BOX:
        best = np.inf
        axis = -1
        for i in range(dim):
            di = y[i] - p[i]
            if di > 0.0:
                if y[i] <= row[4 + i]:
                    continue
                s = (row[4 + i] - p[i]) / di
            elif di < 0.0:
                if y[i] >= row[1 + i]:
                    continue
                s = (row[1 + i] - p[i]) / di
            else:
                continue
            if s < best:
                best = s
                axis = i
        if axis < 0:
            return np.inf, 0.0, 0.0, 0.0
        best = max(best, 0.0)
        sgn = -1.0 if y[axis] > p[axis] else 1.0
        return best, sgn if axis == 0 else 0.0, sgn if axis == 1 else 0.0, sgn if axis == 2 else 0.0
    if kind == BALL:
        if _radius(row, y, dim) <= row[7]:
            return np.inf, 0.0, 0.0, 0.0
        s0, s1 = _sphere_roots(row, row[7], p, y, dim)
        if s1 == np.inf:
            return np.inf, 0.0, 0.0, 0.0
        s1 = min(max(s1, 0.0), 1.0)
        n0, n1, n2 = _sphere_normal(row, row[7], p, y, s1, dim, -1.0)
        return s1, n0, n1, n2
    return np.inf, 0.0, 0.0, 0.0


@_jit
def segment_blocked(row, p, y, dim):
    """True when the open segment meets the (relative) interior of an obstacle.

    Grazing a face, or passing exactly through a wall tip, is allowed.
    """
    kind = int(row[0])
    tol = 1e-12
    if kind == BOX:
        t0 = 0.0
        t1 = 1.0
        for i in range(dim):
            lo = row[1 + i]
            hi = row[4 + i]
            di = y[i] - p[i]
            if di == 0.0:
                if p[i] < lo - tol or p[i] > hi + tol:
                    return False
                continue
            a = (lo - p[i]) / di
            b = (hi - p[i]) / di
            if a > b:
                a, b = b, a
            t0 = max(t0, a)
            t1 = min(t1, b)
            if t0 > t1:
                return False
        tm = 0.5 * (t0 + t1)
        for i in range(dim):
            lo = row[1 + i]
            hi = row[4 + i]
            if hi - lo > tol:
                q = p[i] + tm * (y[i] - p[i])
                if not (lo + tol < q < hi - tol):
                    return False
        return True
    if kind == BALL or kind == SHELL:
        # closest point of the segment to the centre
        a = 0.0
        b = 0.0
        for i in range(dim):
            di = y[i] - p[i]
            a += di * di
            b += (row[1 + i] - p[i]) * di
        t = 0.0 if a == 0.0 else min(max(b / a, 0.0), 1.0)
        s = 0.0
        for i in range(dim):
            q = p[i] + t * (y[i] - p[i]) - row[1 + i]
            s += q * q
        dmin = math.sqrt(s)
        if kind == BALL:
            return dmin < row[7] - tol
        dmax = max(_radius(row, p, dim), _radius(row, y, dim))
        return dmin < row[7] - tol and dmax > row[4] + tol
    if kind == HALFSPACE:
        return min(_ndot(row, p, dim), _ndot(row, y, dim)) < row[7] - tol
    return False


@_jit
def in_interior(row, x, dim):
    """Membership in the open interior (relative interior for thin walls)."""
    kind = int(row[0])
    tol = 1e-12
    if kind == BOX:
        for i in range(dim):
            lo = row[1 + i]
            hi = row[4 + i]
            if hi - lo > tol:
                if not (lo + tol < x[i] < hi - tol):
                    return False
            elif abs(x[i] - lo) > tol:
                return False
        return True
    if kind == BALL:
        return _radius(row, x, dim) < row[7] - tol
    if kind == HALFSPACE:
        return _ndot(row, x, dim) < row[7] - tol
    if kind == SHELL:
        r = _radius(row, x, dim)
        return row[4] + tol < r < row[7] - tol
    return False


@_jit
def contains_points(row_arr, pts):
    n, dim = pts.shape
    row = (row_arr[0], row_arr[1], row_arr[2], row_arr[3], row_arr[4], row_arr[5], row_arr[6], row_arr[7])
    out = np.empty(n, dtype=np.bool_)
    for k in range(n):
        out[k] = contains(row, point_at(pts, k), dim)
    return out


@_jit
def interior_points(row_arr, pts):
    n, dim = pts.shape
    row = (row_arr[0], row_arr[1], row_arr[2], row_arr[3], row_arr[4], row_arr[5], row_arr[6], row_arr[7])
    out = np.empty(n, dtype=np.bool_)
    for k in range(n):
        out[k] = in_interior(row, point_at(pts, k), dim)
    return out


@_jit
def distance_points(row_arr, pts):
    n, dim = pts.shape
    row = (row_arr[0], row_arr[1], row_arr[2], row_arr[3], row_arr[4], row_arr[5], row_arr[6], row_arr[7])
    out = np.empty(n)
    for k in range(n):
        out[k] = distance(row, point_at(pts, k), dim)
    return out


def _pts(pts, dim: int) -> np.ndarray:
    a = np.asarray(pts, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, dim) if dim == 1 or a.size != dim else a[None, :]
    return np.ascontiguousarray(a)


def shape_contains(shape: Shape, pts) -> np.ndarray:
    """Closed-set membership for an (n, dim) array of points (or a single point)."""
    return contains_points(shape.encode(), _pts(pts, shape.dim))


def shape_distance(shape: Shape, pts) -> np.ndarray:
    return distance_points(shape.encode(), _pts(pts, shape.dim))


def as_tuple(row) -> tuple:
    """Python-side conversion of an encoded row or point to the kernel tuple form."""
    return tuple(float(v) for v in row)
