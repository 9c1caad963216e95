"""Stress-energy tensor of Delta u = W_u(u), its scaled variant and identity checks.

For u: R^n -> R^n the tensor has entries

    T_jj = (|u_{x_j}|^2 - sum_{i != j} |u_{x_i}|^2 - 2 W(u)) / 2,
    T_jk = u_{x_j} . u_{x_k}          (j != k),

and on smooth fields div T = (grad u)^T (Delta u - W_u(u)).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .convergence import ConvergenceReport
from .errors import DomainError, ShapeError
from .grid import DIRICHLET, Grid, GridField, derivative, gradient, gradient_sq, interior, laplacian


@dataclass(frozen=True)
class TensorField:
    """Symmetric n x n samples on the nodes of a grid; ``eps`` is None for T."""

    grid: Grid
    values: np.ndarray  # (*nodes, n, n)
    eps: float | None = None
    boundary: str = DIRICHLET

    def __post_init__(self):
        n = self.grid.dim
        if self.values.shape != self.grid.node_shape(self.boundary) + (n, n):
            raise ShapeError(f"tensor samples of shape {self.values.shape} do not fit the grid")
        if not np.allclose(self.values, np.swapaxes(self.values, -1, -2), rtol=0.0, atol=1e-12):
            raise ShapeError("tensor samples are not symmetric")

    def trace(self) -> np.ndarray:
        return np.trace(self.values, axis1=-2, axis2=-1)


def _check_square(f: GridField, p) -> None:
    if f.dim_u != f.grid.dim:
        raise ShapeError(f"stress-energy tensor needs dim_u == dim, got {f.dim_u} and {f.grid.dim}")
    if p.dim_u != f.dim_u:
        raise ShapeError(f"potential acts on R^{p.dim_u}, field takes values in R^{f.dim_u}")


def _assemble(jac: np.ndarray, w: np.ndarray, grad_weight: float, pot_weight: float) -> np.ndarray:
    # gram[..., j, k] = u_{x_j} . u_{x_k}
    gram = np.einsum("...ij,...ik->...jk", jac, jac)
    n = gram.shape[-1]
    sq = np.diagonal(gram, axis1=-2, axis2=-1)  # |u_{x_j}|^2
    total = sq.sum(axis=-1)
    out = grad_weight * gram
    idx = np.arange(n)
    others = total[..., None] - sq
    out[..., idx, idx] = 0.5 * (grad_weight * (sq - others) - 2.0 * pot_weight * w[..., None])
    return out


def build_T(f: GridField, p) -> TensorField:
    _check_square(f, p)
    vals = _assemble(gradient(f), p.W(f.values), 1.0, 1.0)
    return TensorField(f.grid, vals, None, f.boundary)


def build_T_eps(f: GridField, p, eps: float) -> TensorField:
    """Scaled tensor: gradient terms carry eps, potential terms 1/eps."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    _check_square(f, p)
    vals = _assemble(gradient(f), p.W(f.values), float(eps), 1.0 / float(eps))
    return TensorField(f.grid, vals, float(eps), f.boundary)


def divergence_T(t: TensorField) -> np.ndarray:
    """Row-wise divergence by differentiating the stored entries, ``(*nodes, n)``."""
    n = t.grid.dim
    out = np.zeros(t.values.shape[:-1])
    for k in range(n):
        out += derivative(t.values[..., :, k], t.grid, k, t.boundary)
    return out


def identity_residual(f: GridField, p, margin: int = 2) -> np.ndarray:
    """div T - (grad u)^T (Delta u - W_u(u)) on the interior sub-grid.

    Two layers are dropped by default: next to a Dirichlet wall the central
    divergence differences one-sided wall gradients, which costs an order.
    """
    jac = gradient(f)
    r = laplacian(f) - p.Wu(f.values)
    rhs = np.einsum("...ij,...i->...j", jac, r)
    lhs = divergence_T(build_T(f, p))
    sl = interior(f.grid.dim, margin)
    return (lhs - rhs)[sl]


def verify_divergence_identity(
    field_at: Callable[[float], GridField] | GridField,
    p,
    h_sequence: Sequence[float] | None = None,
    threshold: float = 1.8,
    margin: int = 2,
    name: str = "divergence identity",
) -> ConvergenceReport:
    """Refinement study of the divergence identity.

    ``field_at(h)`` must sample the same field on a grid of step ``h``. A
    single GridField is accepted when no ``h_sequence`` is given; the report
    then holds one error and passes only if it vanishes.
    """
    if isinstance(field_at, GridField):
        if h_sequence:
            raise ShapeError("pass a callable h -> GridField for a refinement study")
        f = field_at
        err = float(np.abs(identity_residual(f, p, margin)).max())
        return ConvergenceReport(name, [max(f.grid.spacing)], [err], threshold)
    steps, errors = [], []
    for h in h_sequence:
        f = field_at(h)
        steps.append(max(f.grid.spacing))
        errors.append(float(np.abs(identity_residual(f, p, margin)).max()))
    return ConvergenceReport(name, steps, errors, threshold)


@dataclass
class TraceReport:
    max_formula_error: float  # |tr T - ((2-n)/2 |grad u|^2 - n W)|
    max_bound_excess: float  # max(tr T + (n-2) e), must be <= tol
    max_n2_error: float | None  # |tr T + 2W| when n == 2
    tol: float
    passed: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _tol(scale: float, atol: float) -> float:
    return atol * max(1.0, scale)


def trace_T(t: TensorField, f: GridField, p, atol: float = 1e-12) -> tuple[np.ndarray, TraceReport]:
    """Trace samples plus the trace-formula, trace-bound and n = 2 checks.

    Tolerances are ``atol`` times the larger of 1 and the largest energy
    density on the grid, since all checks are pointwise algebra on the same
    samples.
    """
    n = t.grid.dim
    tr = t.trace()
    jac = gradient(f)
    g2 = gradient_sq(jac)
    w = p.W(f.values)
    e = 0.5 * g2 + w
    scale = float(np.abs(e).max()) if e.size else 0.0
    tol = _tol(scale, atol)
    if t.eps is None:
        formula = 0.5 * (2 - n) * g2 - n * w
        bound = -(n - 2) * e
    else:
        eps = t.eps
        formula = 0.5 * (2 - n) * eps * g2 - n * w / eps
        bound = -(n - 2) * (0.5 * eps * g2 + w / eps)
    err = float(np.abs(tr - formula).max())
    excess = float((tr - bound).max())
    n2 = None
    if n == 2 and t.eps is None:
        n2 = float(np.abs(tr + 2.0 * w).max())
    ok = err <= tol and excess <= tol and (n2 is None or n2 <= tol)
    return tr, TraceReport(err, excess, n2, tol, bool(ok))


@dataclass
class PSDReport:
    max_identity_error: float  # |T + e Id - (grad u)^T grad u|
    min_eigenvalue: float  # of (grad u)^T grad u
    tol: float
    passed: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def verify_psd_identity(t: TensorField, f: GridField, p, atol: float = 1e-12) -> PSDReport:
    """Check T + e(u) Id = (grad u)^T grad u and its positive semi-definiteness."""
    if t.eps is not None:
        raise DomainError("the PSD identity is stated for the unscaled tensor")
    jac = gradient(f)
    gram = np.einsum("...ij,...ik->...jk", jac, jac)
    e = 0.5 * gradient_sq(jac) + p.W(f.values)
    lhs = t.values + e[..., None, None] * np.eye(t.grid.dim)
    err = float(np.abs(lhs - gram).max())
    lam = float(np.linalg.eigvalsh(gram).min())
    tol = _tol(float(np.abs(e).max()), atol)
    return PSDReport(err, lam, tol, bool(err <= tol and lam >= -tol))


def degenerate_fraction(f: GridField, threshold: float = 1e-8) -> float:
    """Share of nodes where det(grad u) is near zero.

    At such nodes div T = 0 says nothing about the equation itself.
    """
    det = np.linalg.det(gradient(f))
    return float(np.mean(np.abs(det) < threshold))
