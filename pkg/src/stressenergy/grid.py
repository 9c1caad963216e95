"""Uniform box grids, sampled vector fields and second-order finite differences."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ShapeError

DIRICHLET = "dirichlet"
PERIODIC = "periodic"


@dataclass(frozen=True)
class Grid:
    """Uniform grid on a box in R^dim.

    ``extents`` counts cells per axis. Dirichlet fields live on the
    ``extents + 1`` nodes of each axis (both walls included); periodic
    fields on ``extents`` nodes, the last wall being identified with the first.
    """

    dim: int
    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    extents: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ShapeError(f"grid dimension must be 1, 2 or 3, got {self.dim}")
        for name in ("origin", "spacing", "extents"):
            if len(getattr(self, name)) != self.dim:
                raise ShapeError(f"{name} must have {self.dim} entries")
        if any(h <= 0 for h in self.spacing):
            raise ShapeError("grid spacing must be positive")
        if any(e < 4 for e in self.extents):
            raise ShapeError("need at least 4 cells per axis for centered stencils")

    @classmethod
    def box(cls, lo, hi, h, dim: int | None = None) -> "Grid":
        """Grid on ``[lo, hi]^dim`` (or a per-axis box) with step close to ``h``.

        The step is adjusted so that an integer number of cells spans the box.
        """
        if dim is None:
            dim = len(lo) if np.ndim(lo) else 1
        lo = np.broadcast_to(np.asarray(lo, float), (dim,))
        hi = np.broadcast_to(np.asarray(hi, float), (dim,))
        h = np.broadcast_to(np.asarray(h, float), (dim,))
        if np.any(hi <= lo):
            raise ShapeError("box upper corner must exceed lower corner")
        ext = np.maximum(np.rint((hi - lo) / h).astype(int), 1)
        spacing = (hi - lo) / ext
        return cls(dim, tuple(lo.tolist()), tuple(spacing.tolist()), tuple(int(e) for e in ext))

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(o + h * e for o, h, e in zip(self.origin, self.spacing, self.extents))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def node_shape(self, boundary: str = DIRICHLET) -> tuple[int, ...]:
        extra = 0 if boundary == PERIODIC else 1
        return tuple(e + extra for e in self.extents)

    def axes(self, boundary: str = DIRICHLET) -> list[np.ndarray]:
        return [
            o + h * np.arange(m)
            for o, h, m in zip(self.origin, self.spacing, self.node_shape(boundary))
        ]

    def coordinates(self, boundary: str = DIRICHLET) -> np.ndarray:
        """Node coordinates, shape ``(*node_shape, dim)``."""
        return np.stack(np.meshgrid(*self.axes(boundary), indexing="ij"), axis=-1)

    def cell_centers(self) -> np.ndarray:
        axes = [o + h * (np.arange(e) + 0.5) for o, h, e in zip(self.origin, self.spacing, self.extents)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.dim, self.origin, tuple(h / factor for h in self.spacing),
                    tuple(e * factor for e in self.extents))


@dataclass(frozen=True)
class GridField:
    """Vector field sampled on the nodes of a grid; ``values`` is ``(*nodes, dim_u)``."""

    grid: Grid
    values: np.ndarray
    boundary: str = DIRICHLET

    def __post_init__(self):
        if self.boundary not in (DIRICHLET, PERIODIC):
            raise ShapeError(f"unknown boundary kind {self.boundary!r}")
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == self.grid.dim:
            vals = vals[..., None]
        if vals.shape[:-1] != self.grid.node_shape(self.boundary):
            raise ShapeError(
                f"values shape {vals.shape} does not match nodes {self.grid.node_shape(self.boundary)}"
            )
        if not np.all(np.isfinite(vals)):
            raise DomainError("field contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dim_u(self) -> int:
        return self.values.shape[-1]

    def coordinates(self) -> np.ndarray:
        return self.grid.coordinates(self.boundary)

    def with_values(self, values) -> "GridField":
        return GridField(self.grid, values, self.boundary)


def interior(ndim: int, margin: int = 1) -> tuple[slice, ...]:
    """Index tuple selecting nodes at least ``margin`` cells from every wall."""
    return (slice(margin, -margin if margin else None),) * ndim


# --------------------------------------------------------------------------
# finite differences


def _d1(v: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(v, -1, axis) - np.roll(v, 1, axis)) / (2.0 * h)
    return np.gradient(v, h, axis=axis, edge_order=2)


def _d2(v: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(v, -1, axis) - 2.0 * v + np.roll(v, 1, axis)) / h**2
    v = np.moveaxis(v, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
    # one-sided, second order
    out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h**2
    out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def gradient(f: GridField) -> np.ndarray:
    """Jacobian samples ``J[..., i, j] = d u_i / d x_j``, shape ``(*nodes, dim_u, dim)``."""
    periodic = f.boundary == PERIODIC
    parts = [_d1(f.values, h, a, periodic) for a, h in enumerate(f.grid.spacing)]
    return np.stack(parts, axis=-1)


def derivative(values: np.ndarray, grid: Grid, axis: int, boundary: str = DIRICHLET) -> np.ndarray:
    """First derivative of arbitrary node samples along one grid axis."""
    return _d1(values, grid.spacing[axis], axis, boundary == PERIODIC)


def laplacian(f: GridField) -> np.ndarray:
    """Componentwise (2n+1)-point Laplacian, shape ``(*nodes, dim_u)``."""
    periodic = f.boundary == PERIODIC
    out = np.zeros_like(f.values)
    for a, h in enumerate(f.grid.spacing):
        out += _d2(f.values, h, a, periodic)
    return out


def gradient_sq(jac: np.ndarray) -> np.ndarray:
    """Squared Frobenius norm of Jacobian samples."""
    return np.einsum("...ij,...ij->...", jac, jac)


def energy_density(f: GridField, p) -> np.ndarray:
    """e(u) = |grad u|^2 / 2 + W(u) at every node."""
    if f.dim_u != p.dim_u:
        raise ShapeError(f"field has {f.dim_u} components, potential expects {p.dim_u}")
    return 0.5 * gradient_sq(gradient(f)) + p.W(f.values)


# --------------------------------------------------------------------------
# manufactured fields

SQRT2 = np.sqrt(2.0)


def vortex_profile(r):
    """Smooth amplitude with f(0) = 0, f(inf) = 1 used for manufactured vortices."""
    return r / np.sqrt(r**2 + 2.0)


def _parse_vector(text: str) -> np.ndarray:
    nums = re.findall(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?", text)
    if not nums:
        raise ShapeError(f"cannot parse vector from {text!r}")
    return np.array([float(t) for t in nums])


def manufactured_field(name: str, grid: Grid, boundary: str = DIRICHLET,
                       dim_u: int | None = None, eps: float = 1.0,
                       center: Sequence[float] | None = None) -> GridField:
    """Sample a named analytic field on ``grid``.

    Names: ``constant:(a,b,...)``, ``linear`` (x_1 e_1), ``identity`` (u = x),
    ``quadratic`` (u_i = |x|^2), ``trig`` (sin x_1, cos x_2, sin x_3),
    ``front`` (tanh(x_1 / (sqrt2 eps)) e_1), ``vortex`` (f(r) x/r, n = 2),
    ``hedgehog`` (x/|x|, n = 2, undefined at the origin).
    A suffix ``:value`` on ``front`` overrides ``eps``.
    """
    x = grid.coordinates(boundary)
    if center is not None:
        x = x - np.asarray(center, float)
    return GridField(grid, sample_manufactured(name, x, dim_u, eps), boundary)


def sample_manufactured(name: str, x: np.ndarray, dim_u: int | None = None, eps: float = 1.0) -> np.ndarray:
    """Values of a named manufactured field at points ``x`` of shape ``(..., n)``."""
    n = x.shape[-1]
    m = n if dim_u is None else dim_u
    key, _, arg = name.partition(":")
    key = key.strip().lower()
    out = np.zeros(x.shape[:-1] + (m,))
    if key == "constant":
        a = _parse_vector(arg) if arg else np.zeros(m)
        if dim_u is None:
            m = a.size
            out = np.zeros(x.shape[:-1] + (m,))
        if a.size != m:
            raise ShapeError(f"constant of length {a.size} for dim_u = {m}")
        out[...] = a
    elif key == "linear":
        out[..., 0] = x[..., 0]
    elif key == "identity":
        if m != n:
            raise ShapeError("identity field needs dim_u == dim")
        out[...] = x
    elif key == "quadratic":
        out[...] = np.sum(x**2, axis=-1)[..., None]
    elif key == "trig":
        funcs = (np.sin, np.cos, np.sin)
        for i in range(min(m, n)):
            out[..., i] = funcs[i](x[..., i])
    elif key == "front":
        e = float(arg) if arg else eps
        out[..., 0] = np.tanh(x[..., 0] / (SQRT2 * e))
    elif key in ("vortex", "hedgehog"):
        if n != 2 or m != 2:
            raise ShapeError(f"{key} field is defined for n = dim_u = 2")
        r = np.hypot(x[..., 0], x[..., 1])
        if key == "hedgehog" and np.any(r == 0):
            raise DomainError("hedgehog field undefined at a node on the origin")
        amp = vortex_profile(r) if key == "vortex" else np.ones_like(r)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[..., None] > 0, x / r[..., None], 0.0)
        out[...] = amp[..., None] * unit
    else:
        raise ShapeError(f"unknown manufactured field {name!r}")
    return out
