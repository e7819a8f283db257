"""Set-to-set geodesic lengths.

The length of a path w is the integral of sqrt(w'^T a^{-1} w'), so slow
diffusion makes a region expensive to cross. Three routes are provided:

* :func:`euclidean_L`, exact for the basic shapes when a is the identity;
* :func:`riemannian_L`, Dijkstra on a wide-stencil lattice (16 neighbours in
  2D, 26 in 3D) for arbitrary SPD tensors;
* :func:`fmm_isotropic`, a fast-marching eikonal solve (second order by
  default) for a = c^2 I.

:func:`dijkstra_oracle` is a slow, plain-Python search over the same graph
meant only for cross-checking :func:`riemannian_L`.
"""
from __future__ import annotations

import csv
import heapq
import itertools
import math
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numba as nb
import numpy as np

from . import geometry as geo
from .errors import AnisotropicInput, NoPath, NonSPDMetric, OverlappingSets
from .geometry import Ball, Box, HalfSpace, Point, Shape, Shell
from .model import ProblemSpec, free_mask, sample_grid

DEFAULT_GRID = {1: 4097, 2: 512, 3: 96}

EXACT_EUCLIDEAN = "exact-euclidean"
DIJKSTRA = "dijkstra-anisotropic"
FMM = "fmm-isotropic"


# --------------------------------------------------------------------------
# exact Euclidean distances
# --------------------------------------------------------------------------


def _as_shapes(s) -> tuple:
    if isinstance(s, (list, tuple)):
        return tuple(s)
    return (s,)


def _point_gap(p: np.ndarray, s: Shape) -> tuple[float, bool]:
    """Distance from p to s and whether p lies in the open interior of s."""
    inside = bool(geo.interior_points(s.encode(), p[None, :])[0])
    return float(geo.shape_distance(s, p)[0]), inside


def _pair(a: Shape, b: Shape) -> tuple[float, bool]:
    """(distance, interiors meet) for one pair of shapes."""
    if isinstance(b, Point) and not isinstance(a, Point):
        a, b = b, a
    if isinstance(a, Point):
        p = np.array(a.x)
        if isinstance(b, Point):
            d = float(np.linalg.norm(p - np.array(b.x)))
            return d, False
        return _point_gap(p, b)
    if isinstance(a, HalfSpace) and not isinstance(b, HalfSpace):
        a, b = b, a
    if isinstance(b, HalfSpace):
        n = np.array(b.normal)
        if isinstance(a, HalfSpace):
            m = np.array(a.normal)
            if np.allclose(m, -n, rtol=0, atol=1e-14):
                gap = -a.offset - b.offset
                return max(gap, 0.0), gap < 0
            return 0.0, True
        if isinstance(a, Box):
            low = sum(min(ni * l, ni * h) for ni, l, h in zip(n, a.lo, a.hi))
            gap = low - b.offset
            return max(gap, 0.0), gap < 0
        if isinstance(a, Ball):
            gap = float(n @ np.array(a.center)) - a.radius - b.offset
            return max(gap, 0.0), gap < 0
        raise TypeError(f"no exact distance between {type(a).__name__} and a half-space")
    if isinstance(a, Ball) and isinstance(b, Box):
        a, b = b, a
    if isinstance(a, Box) and isinstance(b, Box):
        lo = np.maximum(a.lo, b.lo)
        hi = np.minimum(a.hi, b.hi)
        gaps = np.maximum(lo - hi, 0.0)
        d = float(np.linalg.norm(gaps))
        meet = bool(np.all(hi - lo > 0)) and a.has_interior() and b.has_interior()
        return d, meet
    if isinstance(a, Box) and isinstance(b, Ball):
        dc = float(geo.shape_distance(a, np.array(b.center))[0])
        gap = dc - b.radius
        return max(gap, 0.0), gap < 0
    if isinstance(a, Ball) and isinstance(b, Ball):
        gap = float(np.linalg.norm(np.subtract(a.center, b.center))) - a.radius - b.radius
        return max(gap, 0.0), gap < 0
    raise TypeError(f"no exact distance between {type(a).__name__} and {type(b).__name__}")


def euclidean_L(U0, UT) -> float:
    """Exact Euclidean distance between two shape collections.

    Touching sets give 0; sets whose interiors overlap (or a point strictly
    inside the other set) raise :class:`OverlappingSets`.
    """
    best = math.inf
    for a in _as_shapes(U0):
        for b in _as_shapes(UT):
            d, meet = _pair(a, b)
            if meet:
                raise OverlappingSets(f"{a} and {b} overlap")
            best = min(best, d)
    return best


# --------------------------------------------------------------------------
# lattice metric
# --------------------------------------------------------------------------


def _pack(a: np.ndarray, dim: int) -> np.ndarray:
    """(N, dim, dim) tensors -> (N, 6) upper-triangular components, zero padded."""
    out = np.zeros((len(a), 6))
    k = 0
    for i in range(dim):
        for j in range(i, dim):
            out[:, k] = a[:, i, j]
            k += 1
    return out


@dataclass(frozen=True, eq=False)
class MetricField:
    """Diffusivity tensor a sampled on a regular node lattice.

    ``shape`` counts nodes per axis, node k sits at ``lo + k * h`` and nodes
    are flattened in C order. ``free`` is False at masked nodes (obstacles,
    outside the domain). ``blockers`` are encoded obstacle rows used to
    reject lattice edges that slip through thin walls. ``sampler`` maps an
    (n, dim) point array to (n, dim, dim) tensors and is used for refinement.
    """

    lo: np.ndarray
    h: np.ndarray
    shape: tuple[int, ...]
    a: np.ndarray
    free: np.ndarray
    blockers: np.ndarray = field(default_factory=lambda: np.zeros((0, geo.ROW)))
    sampler: Optional[Callable[[np.ndarray], np.ndarray]] = None
    geometry: object = None

    def __post_init__(self):
        dim = len(self.shape)
        n = int(np.prod(self.shape))
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "h", np.asarray(self.h, dtype=float))
        a = np.asarray(self.a, dtype=float)
        if a.ndim == 1:
            a = a[:, None, None] * np.eye(dim)[None]
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "free", np.asarray(self.free, dtype=bool).ravel())
        if a.shape != (n, dim, dim) or self.free.shape != (n,):
            raise ValueError("tensor and mask sizes do not match the lattice")
        if np.any(self.h <= 0) or len(self.h) != dim or len(self.lo) != dim:
            raise ValueError("bad lattice spacing")
        af = a[self.free]
        if len(af):
            if not np.allclose(af, np.swapaxes(af, 1, 2), rtol=0, atol=1e-12 * np.abs(af).max()):
                raise NonSPDMetric("diffusivity tensor is not symmetric")
            if not np.all(np.isfinite(af)) or np.linalg.eigvalsh(af).min() <= 0:
                raise NonSPDMetric("diffusivity tensor is not positive definite at some free node")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def isotropic(self) -> bool:
        af = self.a[self.free]
        diag = af[:, 0, 0][:, None, None] * np.eye(self.dim)[None]
        return bool(np.allclose(af, diag, rtol=0, atol=1e-14 * max(1.0, np.abs(af).max(initial=0))))

    def points(self) -> np.ndarray:
        axes = [self.lo[i] + self.h[i] * np.arange(self.shape[i]) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.ascontiguousarray(np.stack([m.ravel() for m in mesh], axis=1))

    @classmethod
    def from_problem(cls, spec: ProblemSpec, n: int | None = None, obstacles: bool = True) -> "MetricField":
        """Lattice over the bounding box of the domain with ``n`` nodes per axis."""
        g = spec.geometry if obstacles else spec.geometry.without_obstacles()
        n = n or DEFAULT_GRID[g.dimension]
        return cls._build(g, spec.dynamics.anisotropy.tensor, n)

    @classmethod
    def _build(cls, g, sampler, n: int) -> "MetricField":
        axes, pts = sample_grid(g, n)
        h = np.array([ax[1] - ax[0] for ax in axes])
        free = free_mask(g, pts, h)
        return cls(
            lo=np.array([ax[0] for ax in axes]),
            h=h,
            shape=(n,) * g.dimension,
            a=sampler(pts),
            free=free,
            blockers=geo.encode_shapes(g.obstacles),
            sampler=sampler,
            geometry=g,
        )

    @classmethod
    def uniform(cls, shape, h=1.0, a=None, free=None, lo=None) -> "MetricField":
        """Lattice with an explicit node tensor field (identity by default) and mask."""
        shape = tuple(int(s) for s in shape)
        dim = len(shape)
        n = int(np.prod(shape))
        h = np.broadcast_to(np.asarray(h, dtype=float), (dim,)).copy()
        a = np.ones(n) if a is None else np.asarray(a, dtype=float)
        if a.shape[:dim] == shape:
            a = a.reshape((n,) + a.shape[dim:])
        free = np.ones(n, dtype=bool) if free is None else np.asarray(free, dtype=bool).ravel()
        return cls(lo=np.zeros(dim) if lo is None else lo, h=h, shape=shape, a=a, free=free)

    def refined(self) -> "MetricField":
        """Same region with half the spacing."""
        if self.geometry is not None and self.sampler is not None:
            return MetricField._build(self.geometry, self.sampler, 2 * (self.shape[0] - 1) + 1)
        shape = tuple(2 * (s - 1) + 1 for s in self.shape)
        fine = MetricField(self.lo, self.h / 2, shape, np.ones(int(np.prod(shape))), np.ones(int(np.prod(shape)), bool))
        pts = fine.points()
        if self.sampler is not None:
            a = self.sampler(pts)
        else:
            a = _interp_tensor(self, pts)
        free = _refine_mask(self)
        a = np.where(free[:, None, None], a, np.eye(self.dim)[None])
        return replace(fine, a=a, free=free, blockers=self.blockers, sampler=self.sampler)


def _refine_mask(m: MetricField) -> np.ndarray:
    """A fine node is free when every coarse node it interpolates from is free."""
    coarse = m.free.reshape(m.shape)
    fine_shape = tuple(2 * (s - 1) + 1 for s in m.shape)
    out = np.ones(fine_shape, dtype=bool)
    for corner in itertools.product((0, 1), repeat=m.dim):
        sl = [(np.arange(fine_shape[ax]) + c) // 2 for ax, c in enumerate(corner)]
        out &= coarse[np.ix_(*sl)]
    return out.ravel()


def _interp_tensor(m: MetricField, pts: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of the node tensors (free nodes only)."""
    s = (pts - m.lo) / m.h
    base = np.clip(np.floor(s).astype(int), 0, np.array(m.shape) - 2)
    frac = s - base
    out = np.zeros((len(pts), m.dim, m.dim))
    wsum = np.zeros(len(pts))
    strides = np.array([int(np.prod(m.shape[k + 1 :])) for k in range(m.dim)])
    for corner in itertools.product((0, 1), repeat=m.dim):
        c = np.array(corner)
        w = np.prod(np.where(c == 1, frac, 1 - frac), axis=1)
        idx = (base + c) @ strides
        w = np.where(m.free[idx], w, 0.0)
        out += w[:, None, None] * m.a[idx]
        wsum += w
    wsum = np.where(wsum > 0, wsum, 1.0)
    return out / wsum[:, None, None]


def stencil(dim: int, neighbors: int | None = None) -> np.ndarray:
    """Lattice offsets: 2/4/8/16 neighbours in 1D-2D, 6/18/26 in 3D."""
    if neighbors is None:
        neighbors = {1: 2, 2: 16, 3: 26}[dim]
    base = [o for o in itertools.product((-1, 0, 1), repeat=dim) if any(o)]
    if dim == 1 and neighbors == 2:
        offs = base
    elif dim == 2 and neighbors in (4, 8, 16):
        offs = [o for o in base if neighbors > 4 or sum(map(abs, o)) == 1]
        if neighbors == 16:
            offs += [(i, j) for i in (-2, -1, 1, 2) for j in (-2, -1, 1, 2) if abs(i) + abs(j) == 3]
    elif dim == 3 and neighbors in (6, 18, 26):
        cap = {6: 1, 18: 2, 26: 3}[neighbors]
        offs = [o for o in base if sum(map(abs, o)) <= cap]
    else:
        raise ValueError(f"unsupported neighbour count {neighbors} in {dim}D")
    out = np.zeros((len(offs), 3), dtype=np.int64)
    out[:, :dim] = np.array(offs)
    return out


# --------------------------------------------------------------------------
# source and target seeding
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Seeds:
    nodes: np.ndarray
    cost: np.ndarray


def _local_cost(m: MetricField, p: np.ndarray, q: np.ndarray) -> float:
    """Straight-segment cost with the tensor at the segment midpoint."""
    mid = 0.5 * (p + q)
    a = _interp_tensor(m, mid[None, :])[0]
    d = q - p
    return float(math.sqrt(max(d @ np.linalg.solve(a, d), 0.0)))


def _blocked(m: MetricField, p: np.ndarray, q: np.ndarray) -> bool:
    pp = tuple(np.pad(p, (0, 3 - len(p))))
    qq = tuple(np.pad(q, (0, 3 - len(q))))
    return any(geo.segment_blocked(geo.as_tuple(r), pp, qq, m.dim) for r in m.blockers)


def seed_nodes(m: MetricField, shapes, radius: float = 0.0) -> _Seeds:
    """Lattice nodes standing in for a set, with the cost of reaching each.

    Points map to the free corners of their cell, plus every free node within
    ``radius`` cells in direct sight (cost: local straight segment); shapes
    with interior map to the free nodes they contain. Shapes too thin to
    contain a node fall back to their nearest free node.
    """
    pts = m.points()
    nodes: dict[int, float] = {}
    strides = np.array([int(np.prod(m.shape[k + 1 :])) for k in range(m.dim)])
    top = np.array(m.shape) - 1
    for s in _as_shapes(shapes):
        if isinstance(s, Point):
            p = np.array(s.x)
            base = np.clip(np.floor((p - m.lo) / m.h).astype(int), 0, top - 1)
            r = int(math.ceil(radius))
            ranges = [range(max(b - r, 0), min(b + 1 + r, t) + 1) for b, t in zip(base, top)]
            for ix in itertools.product(*ranges):
                ix = np.array(ix)
                corner = np.all((ix >= base) & (ix <= base + 1))
                if not corner and np.linalg.norm((pts[ix @ strides] - p) / m.h) > radius:
                    continue
                idx = int(ix @ strides)
                if not m.free[idx] or _blocked(m, p, pts[idx]):
                    continue
                c = _local_cost(m, p, pts[idx])
                nodes[idx] = min(nodes.get(idx, math.inf), c)
            continue
        inside = np.flatnonzero(geo.shape_contains(s, pts) & m.free)
        if len(inside) == 0:
            d = geo.shape_distance(s, pts)
            d[~m.free] = np.inf
            if np.isfinite(d).any():
                inside = np.array([int(np.argmin(d))])
        for idx in inside:
            nodes[int(idx)] = 0.0
    keys = np.array(sorted(nodes), dtype=np.int64)
    return _Seeds(keys, np.array([nodes[k] for k in keys], dtype=float))


# --------------------------------------------------------------------------
# compiled searches
# --------------------------------------------------------------------------

_jit = nb.njit(cache=True, nogil=True)


@_jit
def _heap_push(keys, vals, size, key, val):
    if size == len(keys):
        nk = np.empty(2 * len(keys))
        nv = np.empty(2 * len(keys), dtype=np.int64)
        nk[:size] = keys[:size]
        nv[:size] = vals[:size]
        keys = nk
        vals = nv
    i = size
    keys[i] = key
    vals[i] = val
    while i > 0:
        parent = (i - 1) >> 1
        if keys[parent] <= keys[i]:
            break
        keys[parent], keys[i] = keys[i], keys[parent]
        vals[parent], vals[i] = vals[i], vals[parent]
        i = parent
    return keys, vals, size + 1


@_jit
def _heap_pop(keys, vals, size):
    key = keys[0]
    val = vals[0]
    size -= 1
    keys[0] = keys[size]
    vals[0] = vals[size]
    i = 0
    while True:
        lft = 2 * i + 1
        if lft >= size:
            break
        c = lft
        if lft + 1 < size and keys[lft + 1] < keys[lft]:
            c = lft + 1
        if keys[i] <= keys[c]:
            break
        keys[c], keys[i] = keys[i], keys[c]
        vals[c], vals[i] = vals[i], vals[c]
        i = c
    return key, val, size


@_jit
def _edge_cost(i0, i1, i2, d0, d1, d2, n1, n2, dim, h0, h1, h2, free, comps, iso):
    """Cost of the lattice edge from node (i0,i1,i2) along (d0,d1,d2); inf if not allowed.

    The tensor is the mean over the nodes whose multilinear weight at the
    edge midpoint is nonzero; all of them, and both endpoints, must be free.
    """
    if not free[(i0 * n1 + i1) * n2 + i2] or not free[((i0 + d0) * n1 + i1 + d1) * n2 + i2 + d2]:
        return np.inf
    # per axis: lower and upper stencil index (equal when the offset is even)
    a0 = i0 + d0 // 2 if d0 % 2 == 0 else min(i0, i0 + d0)
    b0 = a0 if d0 % 2 == 0 else a0 + 1
    a1 = i1 + d1 // 2 if d1 % 2 == 0 else min(i1, i1 + d1)
    b1 = a1 if d1 % 2 == 0 else a1 + 1
    a2 = i2 + d2 // 2 if d2 % 2 == 0 else min(i2, i2 + d2)
    b2 = a2 if d2 % 2 == 0 else a2 + 1
    s0 = s1 = s2 = s3 = s4 = s5 = 0.0
    cnt = 0
    for j0 in range(a0, b0 + 1):
        for j1 in range(a1, b1 + 1):
            for j2 in range(a2, b2 + 1):
                k = (j0 * n1 + j1) * n2 + j2
                if not free[k]:
                    return np.inf
                s0 += comps[k, 0]
                s1 += comps[k, 1]
                s2 += comps[k, 2]
                s3 += comps[k, 3]
                s4 += comps[k, 4]
                s5 += comps[k, 5]
                cnt += 1
    x = d0 * h0
    y = d1 * h1
    z = d2 * h2
    if iso:
        return math.sqrt(x * x + y * y + z * z) / math.sqrt(s0 / cnt)
    if dim == 1:
        return abs(x) / math.sqrt(s0 / cnt)
    if dim == 2:
        p = s0 / cnt
        q = s1 / cnt
        r = s2 / cnt
        return math.sqrt((r * x * x - 2.0 * q * x * y + p * y * y) / (p * r - q * q))
    # 3D, components [a00, a01, a02, a11, a12, a22]
    a00 = s0 / cnt
    a01 = s1 / cnt
    a02 = s2 / cnt
    a11 = s3 / cnt
    a12 = s4 / cnt
    a22 = s5 / cnt
    c00 = a11 * a22 - a12 * a12
    c01 = a02 * a12 - a01 * a22
    c02 = a01 * a12 - a02 * a11
    c11 = a00 * a22 - a02 * a02
    c12 = a01 * a02 - a00 * a12
    c22 = a00 * a11 - a01 * a01
    det = a00 * c00 + a01 * c01 + a02 * c02
    qf = c00 * x * x + c11 * y * y + c22 * z * z + 2.0 * (c01 * x * y + c02 * x * z + c12 * y * z)
    return math.sqrt(qf / det)


@_jit
def _dijkstra(n0, n1, n2, dim, lo, h, offsets, free, comps, iso, blockers,
              src, src_cost, is_tgt, tgt_cost, early_stop):
    n = n0 * n1 * n2
    dist = np.full(n, np.inf)
    done = np.zeros(n, dtype=np.bool_)
    keys = np.empty(1024)
    vals = np.empty(1024, dtype=np.int64)
    size = 0
    for k in range(len(src)):
        if src_cost[k] < dist[src[k]]:
            dist[src[k]] = src_cost[k]
            keys, vals, size = _heap_push(keys, vals, size, src_cost[k], src[k])
    best = np.inf
    nb_ = blockers.shape[0]
    while size > 0:
        du, u, size = _heap_pop(keys, vals, size)
        if done[u]:
            continue
        if early_stop and du >= best:
            break
        done[u] = True
        if is_tgt[u]:
            best = min(best, du + tgt_cost[u])
        i0 = u // (n1 * n2)
        i1 = (u // n2) % n1
        i2 = u % n2
        for m in range(offsets.shape[0]):
            d0 = offsets[m, 0]
            d1 = offsets[m, 1]
            d2 = offsets[m, 2]
            j0 = i0 + d0
            j1 = i1 + d1
            j2 = i2 + d2
            if j0 < 0 or j0 >= n0 or j1 < 0 or j1 >= n1 or j2 < 0 or j2 >= n2:
                continue
            v = (j0 * n1 + j1) * n2 + j2
            if done[v]:
                continue
            c = _edge_cost(i0, i1, i2, d0, d1, d2, n1, n2, dim, h[0], h[1], h[2], free, comps, iso)
            if c == np.inf:
                continue
            if nb_ > 0:
                p = (lo[0] + i0 * h[0], lo[1] + i1 * h[1], lo[2] + i2 * h[2])
                y = (lo[0] + j0 * h[0], lo[1] + j1 * h[1], lo[2] + j2 * h[2])
                hit = False
                for b in range(nb_):
                    r = (blockers[b, 0], blockers[b, 1], blockers[b, 2], blockers[b, 3],
                         blockers[b, 4], blockers[b, 5], blockers[b, 6], blockers[b, 7])
                    if geo.segment_blocked(r, p, y, dim):
                        hit = True
                        break
                if hit:
                    continue
            alt = du + c
            if alt < dist[v]:
                dist[v] = alt
                keys, vals, size = _heap_push(keys, vals, size, alt, v)
    return dist, best


@_jit
def _fmm_update(v, n0, n1, n2, dim, h, T, known, slow, order):
    """Upwind solve of |grad T| = slow[v] at node v from known neighbours.

    Each axis contributes alpha (T - beta)^2; with ``order`` 2 the two-node
    one-sided difference is used whenever the second upwind node is known
    and not later than the first.
    """
    i = (v // (n1 * n2), (v // n2) % n1, v % n2)
    ns = (n0, n1, n2)
    strides = (n1 * n2, n2, 1)
    alpha = np.empty(3)
    beta = np.empty(3)
    m = 0
    for ax in range(dim):
        t1 = np.inf
        t2 = np.inf
        for sgn in (-1, 1):
            j = i[ax] + sgn
            if 0 <= j < ns[ax]:
                w = v + sgn * strides[ax]
                if known[w] and T[w] < t1:
                    t1 = T[w]
                    t2 = np.inf
                    j2 = j + sgn
                    if order == 2 and 0 <= j2 < ns[ax]:
                        w2 = w + sgn * strides[ax]
                        if known[w2] and T[w2] <= T[w]:
                            t2 = T[w2]
        if t1 < np.inf:
            hh = h[ax] * h[ax]
            if t2 < np.inf:
                alpha[m] = 2.25 / hh
                beta[m] = (4.0 * t1 - t2) / 3.0
            else:
                alpha[m] = 1.0 / hh
                beta[m] = t1
            m += 1
    if m == 0:
        return np.inf
    for a in range(1, m):
        for b in range(a, 0, -1):
            if beta[b] < beta[b - 1]:
                beta[b], beta[b - 1] = beta[b - 1], beta[b]
                alpha[b], alpha[b - 1] = alpha[b - 1], alpha[b]
    f = slow[v]
    res = beta[0] + f / math.sqrt(alpha[0])
    for k in range(2, m + 1):
        if res <= beta[k - 1]:
            break
        A = 0.0
        B = 0.0
        Cc = -f * f
        for q in range(k):
            A += alpha[q]
            B -= 2.0 * alpha[q] * beta[q]
            Cc += alpha[q] * beta[q] * beta[q]
        disc = B * B - 4.0 * A * Cc
        if disc < 0:
            break
        res = (-B + math.sqrt(disc)) / (2.0 * A)
    return res


@_jit
def _fmm(n0, n1, n2, dim, h, free, slow, src, src_cost, is_tgt, tgt_cost, early_stop, order):
    n = n0 * n1 * n2
    T = np.full(n, np.inf)
    known = np.zeros(n, dtype=np.bool_)
    keys = np.empty(1024)
    vals = np.empty(1024, dtype=np.int64)
    size = 0
    for k in range(len(src)):
        if src_cost[k] < T[src[k]]:
            T[src[k]] = src_cost[k]
            keys, vals, size = _heap_push(keys, vals, size, src_cost[k], src[k])
    strides = (n1 * n2, n2, 1)
    ns = (n0, n1, n2)
    best = np.inf
    while size > 0:
        tu, u, size = _heap_pop(keys, vals, size)
        if known[u] or tu > T[u]:
            continue
        if early_stop and tu >= best:
            break
        known[u] = True
        if is_tgt[u]:
            best = min(best, tu + tgt_cost[u])
        i = (u // (n1 * n2), (u // n2) % n1, u % n2)
        for ax in range(dim):
            for sgn in (-1, 1):
                j = i[ax] + sgn
                if j < 0 or j >= ns[ax]:
                    continue
                v = u + sgn * strides[ax]
                if known[v] or not free[v]:
                    continue
                t = _fmm_update(v, n0, n1, n2, dim, h, T, known, slow, order)
                if t < T[v]:
                    T[v] = t
                    keys, vals, size = _heap_push(keys, vals, size, t, v)
    return T, best


# --------------------------------------------------------------------------
# public solvers
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GeodesicResult:
    length: float
    h: float
    method: str
    history: tuple[tuple[float, float], ...] = ()
    field: Optional[np.ndarray] = None
    metric: Optional[MetricField] = None


def _dims(m: MetricField):
    s = tuple(m.shape) + (1,) * (3 - m.dim)
    h = np.ones(3)
    h[: m.dim] = m.h
    lo = np.zeros(3)
    lo[: m.dim] = m.lo
    return s, h, lo


def _targets(m: MetricField, UT, radius: float = 0.0):
    seeds = seed_nodes(m, UT, radius)
    is_t = np.zeros(m.n_nodes, dtype=bool)
    cost = np.zeros(m.n_nodes)
    is_t[seeds.nodes] = True
    cost[seeds.nodes] = seeds.cost
    return is_t, cost


def _solve_dijkstra(m: MetricField, U0, UT, neighbors, keep_field):
    src = seed_nodes(m, U0)
    is_t, tc = _targets(m, UT)
    if len(src.nodes) == 0 or not is_t.any():
        raise NoPath("a start or target set has no free lattice node")
    (n0, n1, n2), h, lo = _dims(m)
    dist, best = _dijkstra(
        n0, n1, n2, m.dim, lo, h, stencil(m.dim, neighbors), m.free, _pack(m.a, m.dim), m.isotropic,
        np.ascontiguousarray(m.blockers, dtype=float), src.nodes, src.cost, is_t, tc, not keep_field,
    )
    if not math.isfinite(best):
        raise NoPath("target unreachable from the start set on the lattice")
    return best, dist


def riemannian_L(metric: MetricField, U0, UT, neighbors: int | None = None, refine: bool = True,
                 keep_field: bool = False) -> GeodesicResult:
    """Shortest path length from U0 to UT under edge costs sqrt(d^T a_mid^{-1} d).

    With ``refine`` the solve is repeated at half the spacing; the reported
    length is the fine one and ``history`` holds both (h, L) pairs.
    """
    L, dist = _solve_dijkstra(metric, U0, UT, neighbors, keep_field)
    hist = [(float(metric.h.max()), L)]
    res_metric = metric
    if refine:
        fine = metric.refined()
        L, dist = _solve_dijkstra(fine, U0, UT, neighbors, keep_field)
        hist.append((float(fine.h.max()), L))
        res_metric = fine
    return GeodesicResult(L, hist[-1][0], DIJKSTRA, tuple(hist), dist if keep_field else None, res_metric)


def fmm_isotropic(metric: MetricField, U0, UT, keep_field: bool = False, order: int = 2,
                  seed_radius: float = 3.0) -> GeodesicResult:
    """First-arrival time of the eikonal front |grad T| = 1/c with a = c^2 I.

    Point sets are seeded with straight-segment costs out to ``seed_radius``
    cells, which removes most of the error a point source otherwise causes.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if not metric.isotropic:
        raise AnisotropicInput("fast marching needs a = c(x)^2 I")
    src = seed_nodes(metric, U0, seed_radius)
    is_t, tc = _targets(metric, UT, seed_radius)
    if len(src.nodes) == 0 or not is_t.any():
        raise NoPath("a start or target set has no free lattice node")
    (n0, n1, n2), h, _ = _dims(metric)
    slow = 1.0 / np.sqrt(np.where(metric.free, metric.a[:, 0, 0], 1.0))
    T, best = _fmm(n0, n1, n2, metric.dim, h, metric.free, slow, src.nodes, src.cost, is_t, tc, not keep_field, order)
    if not math.isfinite(best):
        raise NoPath("target unreachable from the start set on the lattice")
    hh = float(metric.h.max())
    return GeodesicResult(best, hh, FMM, ((hh, best),), T if keep_field else None, metric)


def dijkstra_oracle(metric: MetricField, U0, UT, neighbors: int | None = None) -> float:
    """Reference search in plain Python over the same lattice graph (slow; small grids only)."""
    m = metric
    dim = m.dim
    src = seed_nodes(m, U0)
    tgt = seed_nodes(m, UT)
    tcost = dict(zip(tgt.nodes.tolist(), tgt.cost.tolist()))
    if not len(src.nodes) or not tcost:
        raise NoPath("a start or target set has no free lattice node")
    offs = [tuple(int(v) for v in o[:dim]) for o in stencil(dim, neighbors)]
    shape = m.shape
    pts = m.points()

    def flat(ix):
        k = 0
        for a, n in zip(ix, shape):
            k = k * n + a
        return k

    def cost(ix, d):
        axes = []
        for a, di in zip(ix, d):
            if di % 2 == 0:
                axes.append((a + di // 2,))
            else:
                lo_ = min(a, a + di)
                axes.append((lo_, lo_ + 1))
        nodes = [flat(c) for c in itertools.product(*axes)]
        if not all(m.free[k] for k in nodes):
            return None
        a = sum(m.a[k] for k in nodes) / len(nodes)
        vec = np.array(d, dtype=float) * m.h
        return math.sqrt(float(vec @ np.linalg.solve(a, vec)))

    best = {int(k): c for k, c in zip(src.nodes, src.cost)}
    queue = [(c, k) for k, c in best.items()]
    heapq.heapify(queue)
    settled = set()
    answer = math.inf
    while queue:
        du, u = heapq.heappop(queue)
        if u in settled or du > best[u]:
            continue
        if du >= answer:
            break
        settled.add(u)
        if u in tcost:
            answer = min(answer, du + tcost[u])
        ix = np.unravel_index(u, shape)
        for d in offs:
            jx = tuple(int(a + b) for a, b in zip(ix, d))
            if not all(0 <= j < n for j, n in zip(jx, shape)):
                continue
            v = flat(jx)
            if v in settled or not m.free[v]:
                continue
            c = cost(ix, d)
            if c is None or _blocked(m, pts[u], pts[v]):
                continue
            if du + c < best.get(v, math.inf):
                best[v] = du + c
                heapq.heappush(queue, (du + c, v))
    if not math.isfinite(answer):
        raise NoPath("target unreachable from the start set on the lattice")
    return answer


# --------------------------------------------------------------------------
# problem-level helpers
# --------------------------------------------------------------------------


def _plain_identity(spec: ProblemSpec) -> bool:
    an = spec.dynamics.anisotropy
    return not an.regions and (not an.sigma or np.allclose(an.sigma_matrix(spec.dimension), np.eye(spec.dimension)))


def problem_length(spec: ProblemSpec, grid: int | None = None, obstacles: bool = True) -> GeodesicResult:
    """Geodesic length from the initial support to the target of a problem.

    Exact when the metric is the identity and no obstacle is present;
    fast marching for isotropic metrics; wide-stencil Dijkstra otherwise.
    """
    U0 = spec.initial.support()
    if not U0:
        raise NoPath("initial distribution has no compact support to measure from")
    UT = spec.target.region
    has_obstacles = obstacles and bool(spec.geometry.obstacles)
    if _plain_identity(spec) and not has_obstacles:
        try:
            return GeodesicResult(euclidean_L(U0, UT), 0.0, EXACT_EUCLIDEAN)
        except TypeError:
            pass
    metric = MetricField.from_problem(spec, grid, obstacles=obstacles)
    if metric.isotropic:
        return fmm_isotropic(metric, U0, UT)
    return riemannian_L(metric, U0, UT)


def dump_distance_field(result: GeodesicResult, path) -> None:
    """Flat CSV of the distance field: node index, coordinates, value."""
    if result.field is None or result.metric is None:
        raise ValueError("result carries no distance field; solve with keep_field=True")
    pts = result.metric.points()
    names = ["x", "y", "z"][: result.metric.dim]
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", *names, "value"])
        for k, (p, v) in enumerate(zip(pts, result.field)):
            w.writerow([k, *(repr(float(c)) for c in p), repr(float(v))])
    os.replace(tmp, path)


__all__ = [
    "MetricField",
    "GeodesicResult",
    "euclidean_L",
    "riemannian_L",
    "fmm_isotropic",
    "dijkstra_oracle",
    "problem_length",
    "seed_nodes",
    "stencil",
    "dump_distance_field",
    "DEFAULT_GRID",
]
