"""Sharp-interface limit of the scaled tensor and ball-area monotonicity of surfaces.

For u^eps(x) = U(d(x, S) / eps) the scaled tensor T_eps concentrates on S:
paired with a test function phi, entry (i, j) tends to

    sigma * (d_{x_i} d_{x_j} - delta_ij) * int_S phi dS.

The second half measures H^{n-1}(S cap B(p, R)) on triangulated analytic
surfaces, clipping every flat triangle against the ball exactly.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .convergence import observed_orders
from .errors import ConfigError, DomainError, ResolutionError, ShapeError
from .grid import Grid, GridField
from .monotonicity import MonotonicityReport, _detect
from .tensor import build_T_eps

MIN_CELLS_PER_EPS = 6


# --------------------------------------------------------------------------
# interfaces


@dataclass(frozen=True)
class InterfaceSpec:
    """Analytic interface: ``plane`` {x . normal = offset} (n = 2, 3) or a
    ``catenoid`` rho = waist * cosh(z / waist) around the x_3 axis (n = 3).

    ``d > 0`` on the side the normal points to (outside the catenoid).
    """

    kind: str
    dim: int
    normal: tuple[float, ...] | None = None
    offset: float = 0.0
    waist: float = 1.0

    def __post_init__(self):
        if self.kind == "plane":
            if self.dim not in (2, 3):
                raise ShapeError("planes are supported in 2 and 3 dimensions")
            nrm = np.zeros(self.dim) if self.normal is None else np.asarray(self.normal, float)
            if self.normal is None:
                nrm[0] = 1.0
            if nrm.shape != (self.dim,) or np.linalg.norm(nrm) == 0:
                raise ShapeError("plane normal must be a non-zero vector of length dim")
            object.__setattr__(self, "normal", tuple((nrm / np.linalg.norm(nrm)).tolist()))
        elif self.kind == "catenoid":
            if self.dim != 3:
                raise ShapeError("the catenoid lives in R^3")
            if self.waist <= 0:
                raise ShapeError("catenoid waist must be positive")
        else:
            raise ConfigError(f"unknown interface kind {self.kind!r}")

    @classmethod
    def plane(cls, dim: int = 2, normal=None, offset: float = 0.0) -> "InterfaceSpec":
        return cls("plane", dim, None if normal is None else tuple(normal), float(offset))

    @classmethod
    def catenoid(cls, waist: float = 1.0) -> "InterfaceSpec":
        return cls("catenoid", 3, waist=float(waist))

    def closest_point(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Nearest point on S and the signed distance, for points ``(..., n)``."""
        x = np.asarray(x, float)
        if self.kind == "plane":
            nu = np.asarray(self.normal)
            d = x @ nu - self.offset
            return x - d[..., None] * nu, d
        return _catenoid_closest(x, self.waist)

    def signed_distance(self, x) -> np.ndarray:
        return self.closest_point(x)[1]

    def distance_gradient(self, x) -> np.ndarray:
        """grad d; equals the unit normal of the closest point of S."""
        x = np.asarray(x, float)
        if self.kind == "plane":
            return np.broadcast_to(np.asarray(self.normal), x.shape).copy()
        y, _ = self.closest_point(x)
        return catenoid_normal(y, self.waist)


def catenoid_normal(y: np.ndarray, a: float) -> np.ndarray:
    """Outward unit normal of the catenoid at surface points y."""
    rho = np.hypot(y[..., 0], y[..., 1])
    t = y[..., 2]
    # meridian tangent (sinh, 1) -> outward normal (1, -sinh) / cosh
    sh, ch = np.sinh(t / a), np.cosh(t / a)
    with np.errstate(invalid="ignore", divide="ignore"):
        cx = np.where(rho > 0, y[..., 0] / rho, 1.0)
        cy = np.where(rho > 0, y[..., 1] / rho, 0.0)
    return np.stack([cx / ch, cy / ch, -sh / ch], axis=-1)


def _catenoid_closest(x: np.ndarray, a: float, iters: int = 60):
    rho = np.hypot(x[..., 0], x[..., 1])
    z = x[..., 2]
    t = z.copy()
    for _ in range(iters):
        ch, sh = np.cosh(t / a), np.sinh(t / a)
        g1 = (a * ch - rho) * sh + (t - z)
        g2 = sh * sh + (a * ch - rho) * ch / a + 1.0
        step = g1 / np.where(g2 > 0.1, g2, 0.1)
        t = t - np.clip(step, -0.5, 0.5)
        if np.all(np.abs(step) < 1e-15 * (1 + np.abs(t))):
            break
    ch = np.cosh(t / a)
    with np.errstate(invalid="ignore", divide="ignore"):
        cx = np.where(rho > 0, x[..., 0] / rho, 1.0)
        cy = np.where(rho > 0, x[..., 1] / rho, 0.0)
    y = np.stack([a * ch * cx, a * ch * cy, t], axis=-1)
    dist = np.linalg.norm(x - y, axis=-1)
    sign = np.where(rho >= a * ch, 1.0, -1.0)
    return y, sign * dist


def eikonal_defect(spec: InterfaceSpec, points) -> float:
    """max | |grad d| - 1 | over the given points."""
    g = spec.distance_gradient(points)
    return float(np.abs(np.linalg.norm(g, axis=-1) - 1.0).max())


# --------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class TestFunction:
    """Bump phi(x) = (1 - |x - center|^2 / radius^2)_+^exponent."""

    center: tuple[float, ...]
    radius: float = 1.0
    exponent: int = 3
    name: str = "bump"

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.radius <= 0:
            raise DomainError("bump radius must be positive")
        if self.exponent < 1:
            raise DomainError("bump exponent must be >= 1 for continuity")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        q = 1.0 - np.sum((x - np.asarray(self.center)) ** 2, axis=-1) / self.radius**2
        return np.where(q > 0, q, 0.0) ** self.exponent

    def bounding_box(self, pad: float = 0.0):
        c = np.asarray(self.center)
        return c - self.radius - pad, c + self.radius + pad


def surface_integral(spec: InterfaceSpec, phi: TestFunction, order: int = 24) -> float:
    """int_S phi dS for the hyperplane, by Gauss rules on the slice of supp phi.

    Exact up to roundoff because the bump restricted to a flat slice is a
    polynomial of degree 2 * exponent.
    """
    if spec.kind != "plane":
        raise ConfigError("surface integrals of bumps are implemented for planes")
    if 2 * phi.exponent > 2 * order - 1:
        raise ConfigError("Gauss order too low for this bump exponent")
    nu = np.asarray(spec.normal)
    c = np.asarray(phi.center)
    dist = float(c @ nu - spec.offset)
    rho2 = phi.radius**2 - dist**2
    if rho2 <= 0:
        return 0.0
    rho = np.sqrt(rho2)
    foot = c - dist * nu
    t, w = np.polynomial.legendre.leggauss(order)
    tang = _tangent_basis(nu)
    if spec.dim == 2:
        pts = foot + (rho * t)[:, None] * tang[0]
        return float(rho * np.sum(w * phi(pts)))
    # disk of radius rho in the plane: polar Gauss rule (radial Gauss x angular trapezoid)
    rr = 0.5 * rho * (t + 1.0)
    wr = 0.5 * rho * w * rr
    nth = 4 * order
    th = 2 * np.pi * np.arange(nth) / nth
    pts = (foot + rr[:, None, None] * (np.cos(th)[None, :, None] * tang[0] + np.sin(th)[None, :, None] * tang[1]))
    return float(np.sum(wr[:, None] * phi(pts)) * 2 * np.pi / nth)


def _tangent_basis(nu: np.ndarray) -> np.ndarray:
    n = nu.size
    basis = []
    for e in np.eye(n):
        v = e - (e @ nu) * nu
        for b in basis:
            v = v - (v @ b) * b
        if np.linalg.norm(v) > 1e-8:
            basis.append(v / np.linalg.norm(v))
        if len(basis) == n - 1:
            break
    return np.array(basis)


# --------------------------------------------------------------------------
# diffuse fields and pairings


def profile_field(spec: InterfaceSpec, connection, eps: float, grid: Grid) -> GridField:
    """Sample u(x) = U(d(x, S) / eps); the profile is embedded in R^dim if narrower."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    if grid.dim != spec.dim:
        raise ShapeError("grid and interface dimensions differ")
    if eps / max(grid.spacing) < MIN_CELLS_PER_EPS:
        raise ResolutionError(
            f"eps = {eps:g} spans {eps / max(grid.spacing):.2f} cells; need at least {MIN_CELLS_PER_EPS}"
        )
    if connection.dim_u > grid.dim:
        raise ShapeError("connection has more components than the grid dimension")
    d = spec.signed_distance(grid.coordinates())
    U = connection(d / eps)
    if U.shape[-1] < grid.dim:
        U = np.concatenate([U, np.zeros(U.shape[:-1] + (grid.dim - U.shape[-1],))], axis=-1)
    return GridField(grid, U)


def phi_grid(phi: TestFunction, h: float) -> Grid:
    """Grid covering supp phi with a two-cell pad and an even cell count per axis."""
    lo, hi = phi.bounding_box(2.0 * h)
    ext = np.maximum(np.ceil((hi - lo) / h).astype(int), 8)
    ext += ext % 2
    return Grid(len(lo), tuple(lo.tolist()), (float(h),) * len(lo), tuple(int(e) for e in ext))


@dataclass
class Pairing:
    value: float
    quad_tol: float


def pair_tensor_with_test(f: GridField, p, eps: float, phi: TestFunction, entry: tuple[int, int],
                          tensor=None) -> Pairing:
    """int (T_eps)_ij phi dx by node quadrature; ``quad_tol`` compares with step 2h."""
    i, j = entry
    t = tensor if tensor is not None else build_T_eps(f, p, eps)
    x = f.coordinates()
    w = phi(x)
    vol = f.grid.cell_volume
    fine = vol * float(np.sum(t.values[..., i, j] * w))
    tol = float("nan")
    if all(e % 2 == 0 for e in f.grid.extents):
        sub = (slice(None, None, 2),) * f.grid.dim
        g2 = Grid(f.grid.dim, f.grid.origin, tuple(2 * h for h in f.grid.spacing),
                  tuple(e // 2 for e in f.grid.extents))
        fc = GridField(g2, f.values[sub])
        tc = build_T_eps(fc, p, eps)
        coarse = g2.cell_volume * float(np.sum(tc.values[..., i, j] * w[sub]))
        tol = abs(fine - coarse)
    return Pairing(fine, tol)


def limit_target(spec: InterfaceSpec, sigma: float, phi: TestFunction, entry: tuple[int, int]) -> float:
    """sigma (d_i d_j - delta_ij) int_S phi for the hyperplane (grad d constant)."""
    if spec.kind != "plane":
        raise ConfigError("limit targets are available for planes")
    nu = np.asarray(spec.normal)
    i, j = entry
    return sigma * (nu[i] * nu[j] - float(i == j)) * surface_integral(spec, phi)


@dataclass
class ProjectionCheck:
    tangential_idempotence: float  # |P^2 - P|, P = -T0 / sigma
    tangential_annihilation: float  # |P grad d|
    normal_idempotence: float  # |N^2 - N|, N = T0 / sigma + Id
    normal_fixes_grad: float  # |N grad d - grad d|
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.tangential_idempotence, self.tangential_annihilation,
                   self.normal_idempotence, self.normal_fixes_grad) <= self.tol

    def as_dict(self):
        out = dict(self.__dict__)
        out["passed"] = self.passed
        return out


def check_projection(spec: InterfaceSpec, points, sigma: float = 1.0, tol: float = 1e-12) -> ProjectionCheck:
    """Algebra of the limit matrix T0 = sigma (grad d x grad d - Id) at surface points."""
    nu = spec.distance_gradient(points).reshape(-1, spec.dim)
    n = spec.dim
    eye = np.eye(n)
    T0 = sigma * (nu[:, :, None] * nu[:, None, :] - eye)
    P = -T0 / sigma
    N = T0 / sigma + eye
    return ProjectionCheck(
        float(np.abs(P @ P - P).max()),
        float(np.abs(np.einsum("kij,kj->ki", P, nu)).max()),
        float(np.abs(N @ N - N).max()),
        float(np.abs(np.einsum("kij,kj->ki", N, nu) - nu).max()),
        tol,
    )


@dataclass
class LimitRow:
    eps: float
    entry: tuple[int, int]
    phi: str
    value: float
    target: float
    error: float
    quad_tol: float

    def as_dict(self):
        return {
            "eps": self.eps, "entry": f"{self.entry[0] + 1}{self.entry[1] + 1}", "phi": self.phi,
            "value": self.value, "target": self.target, "error": self.error, "quad_tol": self.quad_tol,
        }


@dataclass
class LimitReport:
    rows: list[LimitRow]
    orders: dict[tuple[str, tuple[int, int]], list[float]]
    zero_checks: dict[tuple[str, tuple[int, int]], bool]
    projection: ProjectionCheck
    order_threshold: float
    zero_factor: float
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        orders_ok = all(o and min(o) >= self.order_threshold for o in self.orders.values())
        return bool(orders_ok and all(self.zero_checks.values()) and self.projection.passed)

    def order_table(self) -> list[dict]:
        out = []
        for (name, entry), o in sorted(self.orders.items()):
            out.append({"phi": name, "entry": f"{entry[0] + 1}{entry[1] + 1}", "orders": o,
                        "min_order": min(o) if o else None})
        return out


def verify_limit_tensor(spec: InterfaceSpec, connection, p, eps_sequence: Sequence[float],
                        phi_set: Sequence[TestFunction], cells_per_eps: float = 10.0,
                        order_threshold: float = 0.8, zero_factor: float = 10.0,
                        entries=None) -> LimitReport:
    """Pair T_eps(u^eps) with each bump along an eps-halving sweep with h = eps / cells_per_eps.

    Entries with a non-zero limit must converge with observed order at least
    ``order_threshold``; entries with zero limit must stay below
    ``zero_factor`` times the quadrature tolerance at every eps.
    """
    if spec.kind != "plane":
        raise ConfigError("the limit-tensor sweep is implemented for hyperplanes")
    eps_sequence = sorted((float(e) for e in eps_sequence), reverse=True)
    if len(eps_sequence) < 2:
        raise ConfigError("need at least two eps values")
    n = spec.dim
    entries = entries or [(i, j) for i in range(n) for j in range(i, n)]
    sigma = connection.sigma
    rows: list[LimitRow] = []
    for eps in eps_sequence:
        h = eps / cells_per_eps
        for phi in phi_set:
            grid = phi_grid(phi, h)
            f = profile_field(spec, connection, eps, grid)
            t = build_T_eps(f, p, eps)
            for entry in entries:
                pr = pair_tensor_with_test(f, p, eps, phi, entry, tensor=t)
                target = limit_target(spec, sigma, phi, entry)
                rows.append(LimitRow(eps, entry, phi.name, pr.value, target, abs(pr.value - target), pr.quad_tol))
    orders, zero_checks = {}, {}
    for phi, entry in itertools.product(phi_set, entries):
        sel = [r for r in rows if r.phi == phi.name and r.entry == entry]
        if abs(sel[0].target) > 1e-14:
            o = observed_orders([r.eps for r in sel], [r.error for r in sel])
            orders[(phi.name, entry)] = [float(v) for v in o]
        else:
            zero_checks[(phi.name, entry)] = all(r.error <= zero_factor * r.quad_tol for r in sel)
    surf_pts = _plane_samples(spec, phi_set)
    proj = check_projection(spec, surf_pts, sigma)
    notes = ["the order threshold is an empirical choice; no rate is asserted for the limit"]
    return LimitReport(rows, orders, zero_checks, proj, order_threshold, zero_factor, notes)


def _plane_samples(spec: InterfaceSpec, phi_set) -> np.ndarray:
    pts = []
    for phi in phi_set:
        y, _ = spec.closest_point(np.asarray(phi.center))
        pts.append(y)
    return np.array(pts)


# --------------------------------------------------------------------------
# surfaces and ball areas


@dataclass
class SurfaceMesh:
    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray  # (F, 3)

    def area(self) -> float:
        a, b, c = (self.vertices[self.faces[:, k]] for k in range(3))
        return float(0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=-1).sum())

    def to_obj(self) -> str:
        lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in self.vertices]
        lines += [f"f {i + 1} {j + 1} {k + 1}" for i, j, k in self.faces]
        return "\n".join(lines) + "\n"


def _grid_faces(nu: int, nv: int, wrap_u: bool) -> np.ndarray:
    idx = np.arange(nu * nv).reshape(nu, nv)
    iu = np.arange(nu if wrap_u else nu - 1)
    a = idx[iu][:, :-1]
    b = idx[(iu + 1) % nu][:, :-1]
    c = idx[(iu + 1) % nu][:, 1:]
    d = idx[iu][:, 1:]
    tri1 = np.stack([a, b, c], axis=-1).reshape(-1, 3)
    tri2 = np.stack([a, c, d], axis=-1).reshape(-1, 3)
    return np.concatenate([tri1, tri2])


def surface_mesh(spec: InterfaceSpec, center, extent: float, resolution: int) -> SurfaceMesh:
    """Triangulate the part of S within ``extent`` of ``center``.

    ``resolution`` is the number of cells along the longest parameter direction.
    """
    if spec.dim != 3:
        raise ShapeError("ball areas are computed for surfaces in R^3")
    center = np.asarray(center, float)
    if spec.kind == "plane":
        nu = np.asarray(spec.normal)
        foot, _ = spec.closest_point(center)
        t1, t2 = _tangent_basis(nu)
        s = np.linspace(-extent, extent, resolution + 1)
        S1, S2 = np.meshgrid(s, s, indexing="ij")
        verts = foot + S1[..., None] * t1 + S2[..., None] * t2
        return SurfaceMesh(verts.reshape(-1, 3), _grid_faces(resolution + 1, resolution + 1, False))
    a = spec.waist
    zlo, zhi = center[2] - extent, center[2] + extent
    nz = resolution
    circumference = 2 * np.pi * a * np.cosh(max(abs(zlo), abs(zhi)) / a)
    nth = max(16, int(np.ceil(resolution * circumference / (zhi - zlo))))
    th = 2 * np.pi * np.arange(nth) / nth
    z = np.linspace(zlo, zhi, nz + 1)
    TH, Z = np.meshgrid(th, z, indexing="ij")
    R = a * np.cosh(Z / a)
    verts = np.stack([R * np.cos(TH), R * np.sin(TH), Z], axis=-1)
    return SurfaceMesh(verts.reshape(-1, 3), _grid_faces(nth, nz + 1, True))


def catenoid_area(a: float, zlo: float, zhi: float) -> float:
    """Exact area of the catenoid band zlo <= z <= zhi."""
    F = lambda z: 0.5 * z + 0.25 * a * np.sinh(2 * z / a)
    return float(2 * np.pi * a * (F(zhi) - F(zlo)))


class _ClipFrames:
    """Per-triangle plane frames relative to a ball centre, reused for every radius."""

    def __init__(self, mesh: SurfaceMesh, p):
        p = np.asarray(p, float)
        A, B, C = (mesh.vertices[mesh.faces[:, k]] - p for k in range(3))
        nrm = np.cross(B - A, C - A)
        nn = np.linalg.norm(nrm, axis=-1)
        keep = nn > 0
        A, B, C, nrm, nn = A[keep], B[keep], C[keep], nrm[keep], nn[keep]
        unit = nrm / nn[:, None]
        # signed distance from the centre to each triangle's plane
        self.off = np.einsum("ij,ij->i", A, unit)
        e1 = B - A
        e1 /= np.linalg.norm(e1, axis=-1)[:, None]
        e2 = np.cross(unit, e1)
        foot = self.off[:, None] * unit

        def proj(V):
            W = V - foot
            return np.stack([np.einsum("ij,ij->i", W, e1), np.einsum("ij,ij->i", W, e2)], axis=-1)

        self.a, self.b, self.c = proj(A), proj(B), proj(C)
        cen = (A + B + C) / 3.0
        self.rad = np.max(np.stack([np.linalg.norm(V - cen, axis=-1) for V in (A, B, C)]), axis=0)
        self.dist = np.linalg.norm(cen, axis=-1)

    def area(self, R: float, backend=None) -> float:
        near = self.dist <= R + self.rad
        if not near.any():
            return 0.0
        r2 = R * R - self.off[near] ** 2
        return float(kernels.tri_disk_area(self.a[near], self.b[near], self.c[near], r2, backend=backend).sum())


def mesh_ball_area(mesh: SurfaceMesh, p, R: float, backend: str | None = None) -> float:
    """Area of the triangulated surface inside the ball B(p, R), triangles clipped exactly."""
    return _ClipFrames(mesh, p).area(R, backend)


@dataclass
class AreaProfile:
    center: np.ndarray
    radii: np.ndarray
    area: np.ndarray
    error: np.ndarray
    dim: int
    resolution: int

    def ratios(self, exponent: float) -> np.ndarray:
        return self.area / self.radii**exponent

    def as_columns(self) -> dict[str, np.ndarray]:
        return {"R": self.radii, "area": self.area, "ratio": self.ratios(self.dim - 1), "tol": self.error}


def surface_ball_area(spec: InterfaceSpec, p, radii: Sequence[float], resolution: int = 128,
                      backend: str | None = None) -> AreaProfile:
    """H^{n-1}(S cap B(p, R)); the error is the change under halving the mesh step."""
    radii = np.asarray(radii, float)
    if np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise DomainError("radii must be positive and strictly increasing")
    extent = 1.05 * radii.max()
    fine = surface_mesh(spec, p, extent, 2 * resolution)
    coarse = surface_mesh(spec, p, extent, resolution)
    ff, fc = _ClipFrames(fine, p), _ClipFrames(coarse, p)
    af = np.array([ff.area(R, backend) for R in radii])
    ac = np.array([fc.area(R, backend) for R in radii])
    return AreaProfile(np.asarray(p, float), radii, af, np.abs(af - ac), spec.dim, 2 * resolution)


def check_surface_monotonicity(profile: AreaProfile, n: int | None = None) -> MonotonicityReport:
    """Ratio detector with exponent n - 1 applied to ball areas."""
    n = profile.dim if n is None else n
    ex = n - 1
    return _detect(profile.ratios(ex), profile.error / profile.radii**ex, ex)
