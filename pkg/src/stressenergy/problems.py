"""Canonical boundary-value setups used by the CLI, the tests and the benchmark."""
from __future__ import annotations

import numpy as np

from .grid import DIRICHLET, Grid, GridField, manufactured_field, sample_manufactured
from .potential import double_well, ginzburg_landau
from .solver import SolveConfig


def wall_mask(grid: Grid) -> np.ndarray:
    """Boolean node mask of the Dirichlet walls."""
    mask = np.zeros(grid.node_shape(DIRICHLET), dtype=bool)
    for a in range(grid.dim):
        for k in (0, -1):
            sl = [slice(None)] * grid.dim
            sl[a] = k
            mask[tuple(sl)] = True
    return mask


def with_dirichlet_trace(init: GridField, trace: str, **kw) -> GridField:
    """Overwrite the wall values of ``init`` with the named field, evaluated on the walls only.

    Evaluating only there keeps fields such as x/|x| usable when a node sits
    at the origin.
    """
    mask = wall_mask(init.grid)
    vals = np.array(init.values)
    vals[mask] = sample_manufactured(trace, init.coordinates()[mask], init.dim_u, **kw)
    return init.with_values(vals)


def initial_field(grid: Grid, init: str, boundary_data: str | None = None, dim_u: int | None = None,
                  boundary: str = DIRICHLET) -> GridField:
    f = manufactured_field(init, grid, boundary, dim_u=dim_u)
    if boundary_data and boundary == DIRICHLET:
        f = with_dirichlet_trace(f, boundary_data)
    return f


def vortex_setup(half_width: float = 8.0, h: float = 0.0625, tol: float = 1e-7,
                 max_iter: int = 200_000) -> tuple[SolveConfig, GridField]:
    """Degree-one Ginzburg-Landau vortex on [-L, L]^2 with u = x/|x| on the walls."""
    grid = Grid.box(-half_width, half_width, h, 2)
    init = initial_field(grid, "vortex", "hedgehog")
    cfg = SolveConfig(ginzburg_landau(), grid, tol=tol, max_iter=max_iter)
    return cfg, init


def front_setup(dim: int = 1, half_width: float = 10.0, h: float = 0.05, tol: float = 1e-9,
                max_iter: int = 500_000) -> tuple[SolveConfig, GridField]:
    """Double-well planar front with the tanh profile as Dirichlet trace.

    The interior starts from a sharp sign profile so the solver does real work.
    """
    grid = Grid.box(-half_width, half_width, h, dim)
    x1 = grid.coordinates()[..., 0]
    vals = np.zeros(x1.shape + (dim,))
    vals[..., 0] = np.clip(x1, -1.0, 1.0)
    init = with_dirichlet_trace(GridField(grid, vals), "front")
    cfg = SolveConfig(double_well(dim), grid, tol=tol, max_iter=max_iter)
    return cfg, init
