"""Steady states of eps Lap u - W_u(u)/eps = 0 by explicit gradient-flow relaxation.

The update is forward Euler on u_t = eps Lap u - W_u(u)/eps, which is the
gradient flow of the discrete energy

    E(u) = vol * sum (eps/2 |edge differences / h|^2 + W(u)/eps).

With dt * L < 2, L the Lipschitz constant of grad E / vol, every accepted
step lowers E. The step bound is 0.9 * 2 / L where L combines the Laplacian
spectral radius and a sampled bound on the eigenvalues of W_uu.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, DivergenceError, ShapeError
from .grid import DIRICHLET, PERIODIC, Grid, GridField, interior, laplacian

log = logging.getLogger(__name__)

SAFETY = 0.9


@dataclass
class SolveConfig:
    potential: object
    grid: Grid
    boundary: str = DIRICHLET
    dt: float | None = None  # None: largest stable step
    tol: float = 1e-8
    max_iter: int = 100_000
    eps: float = 1.0
    energy_rtol: float = 1e-10
    hessian_samples: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be non-negative")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.boundary not in (DIRICHLET, PERIODIC):
            raise ConfigError(f"unknown boundary kind {self.boundary!r}")


@dataclass
class SolveResult:
    field: GridField
    residual_history: np.ndarray
    energy_history: np.ndarray
    final_residual: float
    iterations: int
    converged: bool
    dt: float
    energy_monotone: bool
    backend: str
    warnings: list[str] = field(default_factory=list)

    def metadata(self) -> dict:
        return {
            "final_residual": self.final_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "dt": self.dt,
            "energy_initial": float(self.energy_history[0]),
            "energy_final": float(self.energy_history[-1]),
            "energy_monotone": self.energy_monotone,
            "backend": self.backend,
            "warnings": list(self.warnings),
        }


def residual(f: GridField, p, eps: float | None = None, margin: int = 1) -> float:
    """Max-norm of eps Lap u - W_u(u)/eps over the interior (eps = 1 by default)."""
    e = 1.0 if eps is None else float(eps)
    r = e * laplacian(f) - p.Wu(f.values) / e
    if f.boundary == DIRICHLET:
        r = r[interior(f.grid.dim, margin)]
    return float(np.abs(r).max()) if r.size else 0.0


def hessian_bounds(p, lo: Sequence[float], hi: Sequence[float], samples: int = 2000,
                   seed: int = 0) -> tuple[float, float]:
    """Smallest and largest eigenvalue of W_uu over random points and corners of a box."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, size=(samples, lo.size))
    corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(lo.size, -1).T
    pts = np.concatenate([pts, corners, 0.5 * (lo + hi)[None]])
    lam = np.linalg.eigvalsh(p.Wuu(pts))
    return float(lam.min()), float(lam.max())


def stable_dt(grid: Grid, p, value_lo, value_hi, eps: float = 1.0, samples: int = 2000,
              seed: int = 0) -> float:
    """0.9 * 2 / L with L = eps * 4 sum 1/h^2 + max(W_uu)^+ / eps (or |min W_uu| / eps)."""
    lam_min, lam_max = hessian_bounds(p, value_lo, value_hi, samples, seed)
    lap = 4.0 * sum(1.0 / h**2 for h in grid.spacing)
    stiff = max(eps * lap + max(lam_max, 0.0) / eps, max(-lam_min, 0.0) / eps)
    return SAFETY * 2.0 / stiff


def neighbour_tables(grid: Grid, boundary: str):
    """Flattened neighbour indices and the list of nodes the flow updates."""
    shape = grid.node_shape(boundary)
    idx = np.arange(int(np.prod(shape)), dtype=np.int64).reshape(shape)
    d = grid.dim
    plus = np.full(shape + (d,), -1, dtype=np.int64)
    minus = np.full(shape + (d,), -1, dtype=np.int64)
    for a in range(d):
        if boundary == PERIODIC:
            plus[..., a] = np.roll(idx, -1, axis=a)
            minus[..., a] = np.roll(idx, 1, axis=a)
        else:
            src = [slice(None)] * d
            dst = [slice(None)] * d
            src[a], dst[a] = slice(0, -1), slice(1, None)
            plus[tuple(src) + (a,)] = idx[tuple(dst)]
            minus[tuple(dst) + (a,)] = idx[tuple(src)]
    if boundary == PERIODIC:
        free = idx.ravel()
    else:
        free = idx[interior(d, 1)].ravel()
    return (np.ascontiguousarray(free), plus.reshape(-1, d), minus.reshape(-1, d))


def relax(cfg: SolveConfig, init: GridField, backend: str | None = None) -> SolveResult:
    """Relax ``init`` towards a steady state; Dirichlet wall values stay fixed."""
    p = cfg.potential
    if init.grid != cfg.grid:
        raise ShapeError("initial field lives on a different grid than the config")
    if init.boundary != cfg.boundary:
        raise ShapeError(f"initial field has {init.boundary} boundary, config asks {cfg.boundary}")
    if init.dim_u != p.dim_u:
        raise ShapeError(f"initial field has {init.dim_u} components, potential expects {p.dim_u}")

    vals = init.values
    span = np.maximum(vals.max(axis=tuple(range(vals.ndim - 1))) - vals.min(axis=tuple(range(vals.ndim - 1))), 1e-3)
    lo = vals.min(axis=tuple(range(vals.ndim - 1))) - 0.05 * span
    hi = vals.max(axis=tuple(range(vals.ndim - 1))) + 0.05 * span
    dt_max = stable_dt(cfg.grid, p, lo, hi, cfg.eps, cfg.hessian_samples, cfg.seed)
    if cfg.dt is None:
        dt = dt_max
    elif cfg.dt > dt_max:
        raise ConfigError(f"dt = {cfg.dt:g} violates the stability bound {dt_max:g}")
    else:
        dt = float(cfg.dt)

    free, plus, minus = neighbour_tables(cfg.grid, cfg.boundary)
    u = np.array(vals.reshape(-1, init.dim_u), dtype=float, order="C")
    inv_h2 = np.array([1.0 / h**2 for h in cfg.grid.spacing])
    backend = backend or kernels.BACKEND
    steps, energy, res, status = kernels.relax_loop(
        u, free, plus, minus, inv_h2, cfg.grid.cell_volume, dt, cfg.eps, p,
        cfg.max_iter, cfg.tol, backend=backend,
    )
    if status == 2:
        last = GridField(cfg.grid, u.reshape(vals.shape), cfg.boundary) if np.all(np.isfinite(u)) else None
        raise DivergenceError(f"non-finite values after {steps} iterations", last, steps)

    warnings = []
    rise = np.diff(energy) > cfg.energy_rtol * np.maximum(np.abs(energy[:-1]), 1e-300)
    monotone = not bool(rise.any())
    if not monotone:
        k = int(np.argmax(rise))
        msg = f"discrete energy rose at step {k + 1}: {energy[k]:.16g} -> {energy[k + 1]:.16g}"
        warnings.append(msg)
        log.warning(msg)
    converged = status == 0
    if not converged:
        log.info("relaxation stopped at the iteration cap with residual %.3e", res[-1])
    return SolveResult(
        field=GridField(cfg.grid, u.reshape(vals.shape), cfg.boundary),
        residual_history=res,
        energy_history=energy,
        final_residual=float(res[-1]),
        iterations=int(steps),
        converged=converged,
        dt=dt,
        energy_monotone=monotone,
        backend=backend if p.kernel_code >= 0 else "python",
        warnings=warnings,
    )


def discrete_energy(f: GridField, p, eps: float = 1.0) -> float:
    """The energy that :func:`relax` decreases."""
    free, plus, minus = neighbour_tables(f.grid, f.boundary)
    u = f.values.reshape(-1, f.dim_u)
    e = 0.0
    for a, h in enumerate(f.grid.spacing):
        src = np.nonzero(plus[:, a] >= 0)[0]
        diff = u[plus[src, a]] - u[src]
        e += float(np.sum(diff * diff)) / h**2
    return f.grid.cell_volume * (0.5 * eps * e + float(np.sum(p.W(u))) / eps)
