"""Reference numpy implementations of the compiled kernels.

Used when ``stressenergy._kernels`` is not built, and by the tests and the
benchmark to cross-check the compiled path.
"""
from __future__ import annotations

import numpy as np


def relax_loop(u, free, plus, minus, inv_h2, vol, dt, eps, potential, max_steps, tol):
    """Forward-Euler flow ``u_t = eps Lap u - W_u(u) / eps`` on the nodes ``free``.

    ``u`` is the ``(N, m)`` node array, updated in place. ``plus``/``minus``
    hold the neighbour index of every node along every axis (-1 where the
    wall cuts the stencil; free nodes never see -1). Each pass records the
    discrete energy

        vol * sum_nodes (eps/2 sum_axes |u_+ - u|^2 / h^2 + W(u) / eps)

    and the max-norm residual before updating. Returns
    ``(steps, energy, residual, status)`` with status 0 = converged,
    1 = step cap reached, 2 = non-finite values (u left at the last finite
    iterate).
    """
    d = plus.shape[1]
    edge_masks = [plus[:, a] >= 0 for a in range(d)]
    edge_src = [np.nonzero(m)[0] for m in edge_masks]
    edge_dst = [plus[s, a] for a, s in enumerate(edge_src)]
    fp = [plus[free, a] for a in range(d)]
    fm = [minus[free, a] for a in range(d)]
    energy = np.empty(max_steps + 1)
    resid = np.empty(max_steps + 1)
    status = 1
    it = 0
    while True:
        e_grad = 0.0
        for a in range(d):
            diff = u[edge_dst[a]] - u[edge_src[a]]
            e_grad += inv_h2[a] * float(np.sum(diff * diff))
        e_pot = float(np.sum(potential.eval_W(u)))
        uf = u[free]
        lap = np.zeros_like(uf)
        for a in range(d):
            lap += inv_h2[a] * (u[fp[a]] + u[fm[a]] - 2.0 * uf)
        r = eps * lap - potential.eval_Wu(uf) / eps
        res = float(np.abs(r).max()) if r.size else 0.0
        energy[it] = vol * (0.5 * eps * e_grad + e_pot / eps)
        resid[it] = res
        if not (np.isfinite(res) and np.isfinite(energy[it])):
            status = 2
            break
        if res <= tol:
            status = 0
            break
        if it == max_steps:
            break
        u[free] = uf + dt * r
        it += 1
    return it, energy[: it + 1], resid[: it + 1], status


def _seg_disk(p, q, r2):
    """Signed area of triangle (origin, p, q) clipped to the disk |x|^2 <= r2."""
    d = q - p
    A = np.einsum("ij,ij->i", d, d)
    B = np.einsum("ij,ij->i", p, d)
    C = np.einsum("ij,ij->i", p, p) - r2
    disc = B * B - A * C
    with np.errstate(invalid="ignore", divide="ignore"):
        sq = np.sqrt(np.where(disc > 0, disc, 0.0))
        t1 = np.where((disc > 0) & (A > 0), (-B - sq) / A, 0.0)
        t2 = np.where((disc > 0) & (A > 0), (-B + sq) / A, 0.0)
    t1 = np.clip(t1, 0.0, 1.0)
    t2 = np.clip(t2, 0.0, 1.0)
    ts = [np.zeros_like(t1), t1, t2, np.ones_like(t1)]
    area = np.zeros_like(t1)
    for ta, tb in zip(ts[:-1], ts[1:]):
        a = p + ta[:, None] * d
        b = p + tb[:, None] * d
        mid = 0.5 * (a + b)
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        dot = a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]
        inside = np.einsum("ij,ij->i", mid, mid) <= r2
        piece = np.where(inside, 0.5 * cross, 0.5 * r2 * np.arctan2(cross, dot))
        area += np.where((tb > ta) & (A > 0), piece, 0.0)
    return area


def tri_disk_area(a, b, c, r2):
    """Area of planar triangles intersected with origin-centred disks.

    ``a``, ``b``, ``c`` are ``(k, 2)`` vertex arrays relative to the disk
    centre; ``r2`` the squared disk radii. Non-positive ``r2`` gives 0.
    """
    r2 = np.asarray(r2, float)
    s = _seg_disk(a, b, r2) + _seg_disk(b, c, r2) + _seg_disk(c, a, r2)
    return np.where(r2 > 0, np.abs(s), 0.0)
