"""Pure-Python physics step, used when the compiled kernel is unavailable.

Scalar ``math`` calls in the same order as ``_kernels.pyx``; do not
vectorise this, bit-exact agreement with the compiled backend depends on it.
"""
from __future__ import annotations

from math import exp, fabs, log1p, sqrt


def physics_step(pos, vel, force, mass, size, movable, pair_mask, friction,
                 dt, damping, contact_force, contact_margin):
    n = pos.shape[0]
    p = pos.tolist()
    v = vel.tolist()
    fr = force.tolist()
    mass = mass.tolist()
    size = size.tolist()
    movable = movable.tolist()
    mask = pair_mask.tolist()
    friction = friction.tolist()

    tx = [fr[i][0] if movable[i] else 0.0 for i in range(n)]
    ty = [fr[i][1] if movable[i] else 0.0 for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if not mask[i][j]:
                continue
            dx = p[i][0] - p[j][0]
            dy = p[i][1] - p[j][1]
            dist = sqrt(dx * dx + dy * dy)
            if dist <= 0.0:
                continue
            z = -(dist - (size[i] + size[j])) / contact_margin
            pen = ((z if z > 0.0 else 0.0) + log1p(exp(-fabs(z)))) * contact_margin
            f = contact_force * pen / dist
            fx = f * dx
            fy = f * dy
            if movable[i]:
                tx[i] = tx[i] + fx
                ty[i] = ty[i] + fy
            if movable[j]:
                tx[j] = tx[j] - fx
                ty[j] = ty[j] - fy
    keep = 1.0 - damping
    for i in range(n):
        if not movable[i]:
            continue
        if friction[i] > 0.0:
            mag = sqrt(tx[i] * tx[i] + ty[i] * ty[i])
            if mag <= friction[i]:
                tx[i] = 0.0
                ty[i] = 0.0
            else:
                scale = (mag - friction[i]) / mag
                tx[i] = tx[i] * scale
                ty[i] = ty[i] * scale
        vx = v[i][0] * keep
        vy = v[i][1] * keep
        vx = vx + tx[i] / mass[i] * dt
        vy = vy + ty[i] / mass[i] * dt
        vel[i, 0] = vx
        vel[i, 1] = vy
        pos[i, 0] = p[i][0] + vx * dt
        pos[i, 1] = p[i][1] + vy * dt
