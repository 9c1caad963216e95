# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: explicit gradient-flow relaxation and triangle/disk clipping.

Semantics match ``stressenergy._fallback`` exactly; see that module for the
reference description of every argument.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, atan2, isfinite

cnp.import_array()

cdef enum:
    MAXC = 8


cdef inline double _pot(int code, const double* u, int m, const double* prm,
                        double* wu) noexcept nogil:
    """Return W(u) and write W_u(u) into ``wu``."""
    cdef double s = 0.0, w = 0.0, d0, d1, q[3]
    cdef double dx[3]
    cdef double dy[3]
    cdef int c, k
    if code == 0:
        for c in range(m):
            wu[c] = 0.0
        return 0.0
    if code == 1:
        for c in range(m):
            s += u[c] * u[c]
        for c in range(m):
            wu[c] = (s - 1.0) * u[c]
        return 0.25 * (s - 1.0) * (s - 1.0)
    if code == 2:
        d0 = 1.0 - u[0] * u[0]
        w = 0.25 * d0 * d0
        wu[0] = -d0 * u[0]
        for c in range(1, m):
            w += 0.5 * u[c] * u[c]
            wu[c] = u[c]
        return w
    # code 3: triple well in the plane
    for k in range(3):
        dx[k] = u[0] - prm[2 * k]
        dy[k] = u[1] - prm[2 * k + 1]
        q[k] = dx[k] * dx[k] + dy[k] * dy[k]
    wu[0] = 2.0 * (dx[0] * q[1] * q[2] + dx[1] * q[0] * q[2] + dx[2] * q[0] * q[1])
    wu[1] = 2.0 * (dy[0] * q[1] * q[2] + dy[1] * q[0] * q[2] + dy[2] * q[0] * q[1])
    return q[0] * q[1] * q[2]


def relax_loop(double[:, ::1] u, const cnp.int64_t[::1] free, const cnp.int64_t[:, ::1] plus,
               const cnp.int64_t[:, ::1] minus, const double[::1] inv_h2, double vol,
               double dt, double eps, int code, const double[::1] params,
               long max_steps, double tol):
    """Forward-Euler flow u_t = eps Lap u - W_u(u)/eps on the ``free`` nodes.

    Returns ``(steps, energy, residual, status)``; status 0 = converged,
    1 = step cap, 2 = non-finite residual or energy (u left at the last
    finite iterate).
    """
    cdef Py_ssize_t N = u.shape[0], K = free.shape[0], d = plus.shape[1]
    cdef int m = u.shape[1]
    cdef Py_ssize_t i, a, j, jp, jm, it
    cdef int c
    cdef double e_grad, e_pot, res, diff, lap
    cdef double wu[MAXC]
    cdef double pr[6]
    cdef double inv_eps = 1.0 / eps
    if m > MAXC:
        raise ValueError("too many components for the compiled kernel")
    for i in range(min(6, params.shape[0])):
        pr[i] = params[i]
    r_np = np.zeros((K, m))
    cdef double[:, ::1] r = r_np
    energy = np.empty(max_steps + 1)
    resid = np.empty(max_steps + 1)
    cdef double[::1] ev = energy, rv = resid
    cdef int status = 1
    it = 0
    with nogil:
        while True:
            e_grad = 0.0
            e_pot = 0.0
            for i in range(N):
                e_pot += _pot(code, &u[i, 0], m, pr, wu)
                for a in range(d):
                    jp = plus[i, a]
                    if jp >= 0:
                        for c in range(m):
                            diff = u[jp, c] - u[i, c]
                            e_grad += inv_h2[a] * diff * diff
            res = 0.0
            for j in range(K):
                i = free[j]
                _pot(code, &u[i, 0], m, pr, wu)
                for c in range(m):
                    lap = 0.0
                    for a in range(d):
                        lap += inv_h2[a] * (u[plus[i, a], c] + u[minus[i, a], c] - 2.0 * u[i, c])
                    r[j, c] = eps * lap - inv_eps * wu[c]
                    if not fabs(r[j, c]) <= res:
                        res = fabs(r[j, c])
            ev[it] = vol * (0.5 * eps * e_grad + inv_eps * e_pot)
            rv[it] = res
            if not (isfinite(res) and isfinite(ev[it])):
                status = 2
                break
            if res <= tol:
                status = 0
                break
            if it == max_steps:
                status = 1
                break
            for j in range(K):
                i = free[j]
                for c in range(m):
                    u[i, c] += dt * r[j, c]
            it += 1
    return it, energy[: it + 1], resid[: it + 1], status


cdef inline double _seg_disk(double px, double py, double qx, double qy, double r2) noexcept nogil:
    """Signed area of (origin, P, Q) intersected with the disk |x|^2 <= r2."""
    cdef double dx = qx - px, dy = qy - py
    cdef double A = dx * dx + dy * dy, B = px * dx + py * dy, C = px * px + py * py - r2
    cdef double t1 = 0.0, t2 = 0.0, disc, sq
    cdef double ts[4]
    cdef double area = 0.0, ax, ay, bx, by, mx, my, ta, tb
    cdef int k
    if A <= 0.0:
        return 0.0
    disc = B * B - A * C
    if disc > 0.0:
        sq = sqrt(disc)
        t1 = (-B - sq) / A
        t2 = (-B + sq) / A
    t1 = min(max(t1, 0.0), 1.0)
    t2 = min(max(t2, 0.0), 1.0)
    ts[0] = 0.0
    ts[1] = t1
    ts[2] = t2
    ts[3] = 1.0
    for k in range(3):
        ta = ts[k]
        tb = ts[k + 1]
        if tb <= ta:
            continue
        ax = px + ta * dx
        ay = py + ta * dy
        bx = px + tb * dx
        by = py + tb * dy
        mx = 0.5 * (ax + bx)
        my = 0.5 * (ay + by)
        if mx * mx + my * my <= r2:
            area += 0.5 * (ax * by - ay * bx)
        else:
            area += 0.5 * r2 * atan2(ax * by - ay * bx, ax * bx + ay * by)
    return area


def tri_disk_area(const double[:, ::1] a, const double[:, ::1] b,
                  const double[:, ::1] c, const double[::1] r2):
    """Area of planar triangles (coordinates relative to the disk center)
    intersected with disks of squared radius ``r2``; ``r2 < 0`` gives 0."""
    cdef Py_ssize_t n = a.shape[0], k
    out = np.zeros(n)
    cdef double[::1] o = out
    cdef double s
    with nogil:
        for k in range(n):
            if r2[k] <= 0.0:
                continue
            s = _seg_disk(a[k, 0], a[k, 1], b[k, 0], b[k, 1], r2[k])
            s += _seg_disk(b[k, 0], b[k, 1], c[k, 0], c[k, 1], r2[k])
            s += _seg_disk(c[k, 0], c[k, 1], a[k, 0], a[k, 1], r2[k])
            o[k] = fabs(s)
    return out
