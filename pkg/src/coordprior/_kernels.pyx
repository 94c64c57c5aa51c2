# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled particle-physics step.

Mirrors ``coordprior._physics_py.physics_step`` operation for operation so
both backends produce bit-identical trajectories.
"""
from libc.math cimport sqrt, exp, log1p, fabs


def physics_step(double[:, ::1] pos, double[:, ::1] vel, const double[:, ::1] force,
                 const double[::1] mass, const double[::1] size,
                 const unsigned char[::1] movable, const unsigned char[:, ::1] pair_mask,
                 const double[::1] friction, double dt, double damping,
                 double contact_force, double contact_margin):
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t i, j
    cdef double dx, dy, dist, z, pen, f, fx, fy, mag, scale, keep
    cdef double[64] tx
    cdef double[64] ty
    if n > 64:
        raise ValueError("physics kernel supports at most 64 entities")
    for i in range(n):
        if movable[i]:
            tx[i] = force[i, 0]
            ty[i] = force[i, 1]
        else:
            tx[i] = 0.0
            ty[i] = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            if not pair_mask[i, j]:
                continue
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
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
        vel[i, 0] = vel[i, 0] * keep
        vel[i, 1] = vel[i, 1] * keep
        vel[i, 0] = vel[i, 0] + tx[i] / mass[i] * dt
        vel[i, 1] = vel[i, 1] + ty[i] / mass[i] * dt
        pos[i, 0] = pos[i, 0] + vel[i, 0] * dt
        pos[i, 1] = pos[i, 1] + vel[i, 1] * dt
