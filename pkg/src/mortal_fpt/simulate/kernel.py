"""Compiled trajectory loop: Euler-Maruyama with specular reflection and
perfect or per-contact partial absorption.

Shape tables arrive as (n, 8) arrays but are read into tuples inside the loop;
helpers only ever receive tuples and scalars, which keeps numba from emitting
reference-count traffic on every step.
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

from ..geometry import contains, distance, in_interior, seg_enter, seg_exit
from .rng import draw_normal_pair, draw_uniform, stream_key

INIT_POINT, INIT_UNIFORM, INIT_QSD = 0, 1, 2

# status codes
CENSORED, ABSORBED, START_FAILED = 0, 1, -1

_MAX_BOUNCES = 32
_MAX_REJECT = 1_000_000


@nb.njit(cache=True, nogil=True)
def drift_at(blk, x, dim):
    """Drift vector at x from the 17-float block [kind, mag, vec(3), centre(3), matrix(9)]."""
    kind = int(blk[0])
    if kind == 1:
        return blk[2], blk[3], blk[4]
    if kind == 2:
        r0 = x[0] - blk[5]
        r1 = x[1] - blk[6] if dim > 1 else 0.0
        r2 = x[2] - blk[7] if dim > 2 else 0.0
        r = math.sqrt(r0 * r0 + r1 * r1 + r2 * r2)
        if r == 0.0:
            return 0.0, 0.0, 0.0
        return blk[1] * r0 / r, blk[1] * r1 / r, blk[1] * r2 / r
    if kind == 3:
        return (
            blk[2] + blk[8] * x[0] + blk[9] * x[1] + blk[10] * x[2],
            blk[3] + blk[11] * x[0] + blk[12] * x[1] + blk[13] * x[2],
            blk[4] + blk[14] * x[0] + blk[15] * x[1] + blk[16] * x[2],
        )
    return 0.0, 0.0, 0.0


@nb.njit(cache=True, nogil=True)
def _sample_start(kind, x0, init_rows, lo, hi, outer, obstacles, targets, dim, key):
    """Start point, next counter and success flag."""
    c = np.uint64(0)
    if kind == INIT_POINT:
        return (x0[0], x0[1], x0[2]), c, True
    orow = (outer[0], outer[1], outer[2], outer[3], outer[4], outer[5], outer[6], outer[7])
    for _ in range(_MAX_REJECT):
        u0 = draw_uniform(key, c)
        u1 = draw_uniform(key, c + np.uint64(1))
        u2 = draw_uniform(key, c + np.uint64(2))
        c += np.uint64(dim)
        x = (
            lo[0] + (hi[0] - lo[0]) * u0,
            lo[1] + (hi[1] - lo[1]) * u1 if dim > 1 else 0.0,
            lo[2] + (hi[2] - lo[2]) * u2 if dim > 2 else 0.0,
        )
        ok = contains(orow, x, dim)
        if ok and init_rows.shape[0] > 0:
            ok = False
            for k in range(init_rows.shape[0]):
                r = (init_rows[k, 0], init_rows[k, 1], init_rows[k, 2], init_rows[k, 3],
                     init_rows[k, 4], init_rows[k, 5], init_rows[k, 6], init_rows[k, 7])
                if contains(r, x, dim):
                    ok = True
                    break
        if ok:
            for k in range(targets.shape[0]):
                r = (targets[k, 0], targets[k, 1], targets[k, 2], targets[k, 3],
                     targets[k, 4], targets[k, 5], targets[k, 6], targets[k, 7])
                if contains(r, x, dim):
                    ok = False
                    break
        if ok:
            for k in range(obstacles.shape[0]):
                r = (obstacles[k, 0], obstacles[k, 1], obstacles[k, 2], obstacles[k, 3],
                     obstacles[k, 4], obstacles[k, 5], obstacles[k, 6], obstacles[k, 7])
                if in_interior(r, x, dim):
                    ok = False
                    break
        if ok:
            return x, c, True
    return (0.0, 0.0, 0.0), c, False


@nb.njit(cache=True, nogil=True)
def run_range(
    first_id, count, seed, dim,
    init_kind, x0, init_rows, init_lo, init_hi, qsd_rate,
    outer, obstacles, targets,
    drift, sig, diff_rows, diff_factors,
    D, perfect, p_absorb,
    dt_base, dt_min, adapt_gamma, amax_sig, bmax, t_max, eps,
    out_fpt, out_status, out_steps,
):
    """Simulate trajectories ``first_id .. first_id + count - 1`` into the output slices.

    With a perfect target the step shrinks near it, dt = (gamma d)^2 / (2 D a_max)
    clipped to [dt_min, dt_base]; with partial absorption dt_base is used
    throughout so that the per-contact probability ``p_absorb`` stays consistent.
    """
    orow = (outer[0], outer[1], outer[2], outer[3], outer[4], outer[5], outer[6], outer[7])
    blk = (drift[0], drift[1], drift[2], drift[3], drift[4], drift[5], drift[6], drift[7], drift[8],
           drift[9], drift[10], drift[11], drift[12], drift[13], drift[14], drift[15], drift[16])
    n_t = targets.shape[0]
    n_o = obstacles.shape[0]
    n_r = diff_rows.shape[0]
    isotropic = True
    for i in range(dim):
        for j in range(dim):
            if sig[i, j] != (1.0 if i == j else 0.0):
                isotropic = False
    has_drift = int(blk[0]) != 0
    for k in range(count):
        key = stream_key(seed, np.uint64(first_id + k))
        if init_kind == INIT_QSD:
            out_fpt[k] = -math.log(draw_uniform(key, np.uint64(0))) / qsd_rate
            out_status[k] = ABSORBED
            out_steps[k] = 0
            continue
        x, c, ok = _sample_start(init_kind, x0, init_rows, init_lo, init_hi, outer, obstacles, targets, dim, key)
        if not ok:
            out_fpt[k] = np.nan
            out_status[k] = START_FAILED
            out_steps[k] = 0
            continue
        x0_, x1_, x2_ = x
        t = 0.0
        steps = 0
        status = CENSORED
        spare = 0.0
        have_spare = False
        while t < t_max:
            x = (x0_, x1_, x2_)
            f = 1.0
            for m in range(n_r):
                r = (diff_rows[m, 0], diff_rows[m, 1], diff_rows[m, 2], diff_rows[m, 3],
                     diff_rows[m, 4], diff_rows[m, 5], diff_rows[m, 6], diff_rows[m, 7])
                if contains(r, x, dim):
                    f = diff_factors[m]
                    break
            dt = dt_base
            if perfect:
                d = np.inf
                for m in range(n_t):
                    r = (targets[m, 0], targets[m, 1], targets[m, 2], targets[m, 3],
                         targets[m, 4], targets[m, 5], targets[m, 6], targets[m, 7])
                    d = min(d, distance(r, x, dim))
                h = adapt_gamma * d
                dt_d = h * h / (2.0 * D * amax_sig * f * f)
                if bmax > 0.0:
                    dt_d = min(dt_d, h / bmax)
                dt = min(max(dt_d, dt_min), dt_base)
            if t + dt > t_max:
                dt = t_max - t
            # Gaussian increments
            if dim == 1 and have_spare:
                xi0 = spare
                xi1 = 0.0
                have_spare = False
            else:
                xi0, xi1 = draw_normal_pair(key, c)
                c += np.uint64(2)
                if dim == 1:
                    spare = xi1
                    have_spare = True
            xi2 = 0.0
            if dim == 3:
                xi2, _ = draw_normal_pair(key, c)
                c += np.uint64(2)
            if not isotropic:
                n0 = sig[0, 0] * xi0 + sig[0, 1] * xi1 + sig[0, 2] * xi2
                n1 = sig[1, 0] * xi0 + sig[1, 1] * xi1 + sig[1, 2] * xi2
                n2 = sig[2, 0] * xi0 + sig[2, 1] * xi1 + sig[2, 2] * xi2
                xi0, xi1, xi2 = n0, n1, n2
            amp = math.sqrt(2.0 * D * dt) * f
            b0 = 0.0
            b1 = 0.0
            b2 = 0.0
            if has_drift:
                b0, b1, b2 = drift_at(blk, x, dim)
            y0 = x0_ + b0 * dt + amp * xi0
            y1 = x1_ + b1 * dt + amp * xi1 if dim > 1 else 0.0
            y2 = x2_ + b2 * dt + amp * xi2 if dim > 2 else 0.0
            p0, p1, p2 = x0_, x1_, x2_
            steps += 1
            hit = False
            resolved = False
            for _ in range(_MAX_BOUNCES):
                p = (p0, p1, p2)
                y = (y0, y1, y2)
                best = np.inf
                is_target = False
                bn0 = 0.0
                bn1 = 0.0
                bn2 = 0.0
                for m in range(n_t):
                    r = (targets[m, 0], targets[m, 1], targets[m, 2], targets[m, 3],
                         targets[m, 4], targets[m, 5], targets[m, 6], targets[m, 7])
                    s, q0, q1, q2 = seg_enter(r, p, y, dim)
                    if s < best:
                        best, bn0, bn1, bn2 = s, q0, q1, q2
                        is_target = True
                for m in range(n_o):
                    r = (obstacles[m, 0], obstacles[m, 1], obstacles[m, 2], obstacles[m, 3],
                         obstacles[m, 4], obstacles[m, 5], obstacles[m, 6], obstacles[m, 7])
                    s, q0, q1, q2 = seg_enter(r, p, y, dim)
                    if s < best:
                        best, bn0, bn1, bn2 = s, q0, q1, q2
                        is_target = False
                s, q0, q1, q2 = seg_exit(orow, p, y, dim)
                if s < best:
                    best, bn0, bn1, bn2 = s, q0, q1, q2
                    is_target = False
                if best == np.inf:
                    resolved = True
                    break
                if is_target:
                    if perfect:
                        hit = True
                        break
                    u = draw_uniform(key, c)
                    c += np.uint64(1)
                    if u < p_absorb:
                        hit = True
                        break
                # specular reflection about the contact plane
                h0 = p0 + best * (y0 - p0)
                h1 = p1 + best * (y1 - p1)
                h2 = p2 + best * (y2 - p2)
                proj = (y0 - h0) * bn0 + (y1 - h1) * bn1 + (y2 - h2) * bn2
                y0 -= 2.0 * proj * bn0
                y1 -= 2.0 * proj * bn1
                y2 -= 2.0 * proj * bn2
                p0 = h0 + eps * bn0
                p1 = h1 + eps * bn1
                p2 = h2 + eps * bn2
            t += dt
            if hit:
                status = ABSORBED
                break
            if resolved:
                x0_, x1_, x2_ = y0, y1, y2
            else:
                x0_, x1_, x2_ = p0, p1, p2
        out_fpt[k] = t
        out_status[k] = status
        out_steps[k] = steps
