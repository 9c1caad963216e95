"""Non-negative C^2 potentials W: R^n -> R with gradient and Hessian.

All evaluators are vectorized over leading axes: a point array of shape
``(..., n)`` gives ``W`` of shape ``(...)``, ``Wu`` of shape ``(..., n)`` and
``Wuu`` of shape ``(..., n, n)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DomainError

# Integer tags understood by the compiled relaxation kernel.
KERNEL_NONE = -1
KERNEL_ZERO = 0
KERNEL_GL = 1
KERNEL_DOUBLE_WELL = 2
KERNEL_TRIPLE_WELL = 3


@dataclass(frozen=True)
class Potential:
    """Evaluation bundle for a potential and its global minima.

    ``continuum_minima`` marks potentials whose zero set is a manifold
    (Ginzburg-Landau); ``minima`` is then empty.
    """

    name: str
    dim_u: int
    eval_W: Callable[[np.ndarray], np.ndarray]
    eval_Wu: Callable[[np.ndarray], np.ndarray]
    eval_Wuu: Callable[[np.ndarray], np.ndarray]
    minima: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    continuum_minima: bool = False
    params: Mapping[str, object] = field(default_factory=dict)
    kernel_code: int = KERNEL_NONE
    kernel_params: tuple = ()

    def W(self, x):
        return self.eval_W(_as_points(x, self.dim_u))

    def Wu(self, x):
        return self.eval_Wu(_as_points(x, self.dim_u))

    def Wuu(self, x):
        return self.eval_Wuu(_as_points(x, self.dim_u))

    @property
    def n_minima(self) -> int:
        return 0 if self.continuum_minima else len(self.minima)


def _as_points(x, dim_u: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != dim_u:
        raise DomainError(f"expected points with last axis {dim_u}, got shape {x.shape}")
    return x


def eval_bundle(p: Potential, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate ``(W, W_u, W_uu)`` at ``x``; rejects non-finite input."""
    x = _as_points(x, p.dim_u)
    if not np.all(np.isfinite(x)):
        raise DomainError("potential evaluated at a non-finite point")
    return p.eval_W(x), p.eval_Wu(x), p.eval_Wuu(x)


# --------------------------------------------------------------------------
# built-in families


def ginzburg_landau() -> Potential:
    """W(u) = (|u|^2 - 1)^2 / 4 on R^2; zero set is the unit circle."""

    def W(x):
        s = np.einsum("...i,...i->...", x, x)
        return 0.25 * (s - 1.0) ** 2

    def Wu(x):
        s = np.einsum("...i,...i->...", x, x)
        return (s - 1.0)[..., None] * x

    def Wuu(x):
        s = np.einsum("...i,...i->...", x, x)
        eye = np.eye(x.shape[-1])
        return (s - 1.0)[..., None, None] * eye + 2.0 * x[..., :, None] * x[..., None, :]

    return Potential(
        name="ginzburg_landau",
        dim_u=2,
        eval_W=W,
        eval_Wu=Wu,
        eval_Wuu=Wuu,
        minima=np.zeros((0, 2)),
        continuum_minima=True,
        kernel_code=KERNEL_GL,
    )


def double_well(dim_u: int = 1) -> Potential:
    """Scalar double well acting on the first component.

    W(u) = (1 - u_1^2)^2 / 4 + sum_{k>=2} u_k^2 / 2, minima (+-1, 0, ..., 0).
    """
    if dim_u < 1:
        raise ConfigError("dim_u must be >= 1")

    def W(x):
        u1 = x[..., 0]
        return 0.25 * (1.0 - u1**2) ** 2 + 0.5 * np.sum(x[..., 1:] ** 2, axis=-1)

    def Wu(x):
        out = x.copy()
        u1 = x[..., 0]
        out[..., 0] = (u1**2 - 1.0) * u1
        return out

    def Wuu(x):
        out = np.zeros(x.shape + (x.shape[-1],))
        idx = np.arange(x.shape[-1])
        out[..., idx, idx] = 1.0
        out[..., 0, 0] = 3.0 * x[..., 0] ** 2 - 1.0
        return out

    minima = np.zeros((2, dim_u))
    minima[0, 0] = -1.0
    minima[1, 0] = 1.0
    return Potential(
        name="double_well",
        dim_u=dim_u,
        eval_W=W,
        eval_Wu=Wu,
        eval_Wuu=Wuu,
        minima=minima,
        kernel_code=KERNEL_DOUBLE_WELL,
    )


def cube_roots_of_unity() -> np.ndarray:
    ang = 2.0 * np.pi * np.arange(3) / 3.0
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1)


def triple_well(points: Sequence[Sequence[float]] | None = None) -> Potential:
    """W(u) = |u - a_1|^2 |u - a_2|^2 |u - a_3|^2 on R^2.

    Defaults to the cube roots of unity; any three distinct points give a
    non-negative potential with exactly those three zeros.
    """
    a = cube_roots_of_unity() if points is None else np.asarray(points, dtype=float)
    if a.shape != (3, 2):
        raise ConfigError(f"triple_well needs 3 points in R^2, got shape {a.shape}")
    if min(np.linalg.norm(a[i] - a[j]) for i, j in itertools.combinations(range(3), 2)) == 0:
        raise ConfigError("triple_well minima must be distinct")

    def _parts(x):
        d = x[..., None, :] - a  # (..., 3, 2)
        q = np.einsum("...ki,...ki->...k", d, d)
        return d, q

    def W(x):
        _, q = _parts(x)
        return q[..., 0] * q[..., 1] * q[..., 2]

    def Wu(x):
        d, q = _parts(x)
        out = np.zeros_like(x)
        for k in range(3):
            l, m = (k + 1) % 3, (k + 2) % 3
            out += 2.0 * d[..., k, :] * (q[..., l] * q[..., m])[..., None]
        return out

    def Wuu(x):
        d, q = _parts(x)
        eye = np.eye(2)
        out = np.zeros(x.shape + (2,))
        for k in range(3):
            l, m = (k + 1) % 3, (k + 2) % 3
            out += 2.0 * (q[..., l] * q[..., m])[..., None, None] * eye
        for k, l in itertools.permutations(range(3), 2):
            m = 3 - k - l
            out += 4.0 * q[..., m][..., None, None] * (d[..., k, :, None] * d[..., l, None, :])
        return out

    return Potential(
        name="triple_well",
        dim_u=2,
        eval_W=W,
        eval_Wu=Wu,
        eval_Wuu=Wuu,
        minima=a.copy(),
        params={"points": a.tolist()},
        kernel_code=KERNEL_TRIPLE_WELL,
        kernel_params=tuple(a.ravel()),
    )


def zero(dim_u: int = 2) -> Potential:
    """W == 0; every point is a minimum, so ``minima`` is left empty."""

    def W(x):
        return np.zeros(x.shape[:-1])

    def Wu(x):
        return np.zeros_like(x)

    def Wuu(x):
        return np.zeros(x.shape + (x.shape[-1],))

    return Potential(
        name="zero",
        dim_u=dim_u,
        eval_W=W,
        eval_Wu=Wu,
        eval_Wuu=Wuu,
        minima=np.zeros((0, dim_u)),
        continuum_minima=True,
        kernel_code=KERNEL_ZERO,
    )


def polynomial(
    coefficients: Mapping[tuple[int, ...], float],
    minima: Sequence[Sequence[float]] = (),
    name: str = "polynomial",
    check_samples: int = 10_000,
    seed: int = 0,
) -> Potential:
    """Polynomial potential from a table ``{exponent tuple: coefficient}``.

    Derivatives are exact. Non-negativity is checked on a random sample of
    ``[-3, 3]^n`` and the listed minima must be zeros of W and of W_u.
    """
    if not coefficients:
        raise ConfigError("empty coefficient table")
    exps = np.array([tuple(k) for k in coefficients], dtype=int)
    if exps.ndim != 2 or np.any(exps < 0):
        raise ConfigError("exponents must be tuples of non-negative integers of equal length")
    coef = np.array([float(coefficients[k]) for k in coefficients])
    n = exps.shape[1]

    def _monomials(x, e):
        # x: (..., n), e: (m, n) -> (..., m)
        return np.prod(x[..., None, :] ** e, axis=-1)

    def W(x):
        return _monomials(x, exps) @ coef

    def Wu(x):
        out = np.zeros_like(x)
        for i in range(n):
            mask = exps[:, i] > 0
            if not mask.any():
                continue
            e = exps[mask].copy()
            c = coef[mask] * e[:, i]
            e[:, i] -= 1
            out[..., i] = _monomials(x, e) @ c
        return out

    def Wuu(x):
        out = np.zeros(x.shape + (n,))
        for i in range(n):
            for j in range(i, n):
                e = exps.copy()
                c = coef * e[:, i]
                e[:, i] -= 1
                c = c * np.where(e[:, i] >= 0, e[:, j], 0)
                e[:, j] -= 1
                mask = (c != 0) & np.all(e >= 0, axis=1)
                if not mask.any():
                    continue
                val = _monomials(x, e[mask]) @ c[mask]
                out[..., i, j] = val
                out[..., j, i] = val
        return out

    mins = np.asarray(minima, dtype=float).reshape(-1, n) if len(minima) else np.zeros((0, n))
    p = Potential(
        name=name,
        dim_u=n,
        eval_W=W,
        eval_Wu=Wu,
        eval_Wuu=Wuu,
        minima=mins,
        params={"coefficients": {",".join(map(str, k)): float(v) for k, v in coefficients.items()}},
    )
    if check_samples:
        pts = np.random.default_rng(seed).uniform(-3.0, 3.0, size=(check_samples, n))
        if np.min(p.W(pts)) < -1e-12:
            raise ConfigError(f"polynomial potential {name!r} takes negative values")
    for a in mins:
        if abs(p.W(a)) > 1e-12 or np.linalg.norm(p.Wu(a)) > 1e-12:
            raise ConfigError(f"listed minimum {a.tolist()} is not a critical zero of W")
    return p


_BUILTINS = {
    "ginzburg_landau": ginzburg_landau,
    "gl": ginzburg_landau,
    "double_well": double_well,
    "triple_well": triple_well,
    "zero": zero,
}


def from_spec(name: str, params: Mapping[str, object] | None = None) -> Potential:
    """Build a potential from a config name and keyword parameters."""
    params = dict(params or {})
    if name == "polynomial":
        table = params.pop("coefficients", None)
        if not isinstance(table, Mapping):
            raise ConfigError("polynomial potential needs a 'coefficients' table")
        coeffs = {tuple(int(t) for t in str(k).split(",")): float(v) for k, v in table.items()}
        return polynomial(coeffs, **params)
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ConfigError(f"unknown potential {name!r}; choose from {sorted(_BUILTINS)} or 'polynomial'")
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for potential {name!r}: {exc}") from None


# --------------------------------------------------------------------------
# consistency checks


@dataclass
class GradientReport:
    h: np.ndarray
    errors: np.ndarray  # (n_points, n_h)
    orders: np.ndarray  # (n_points,), inf where the error is at roundoff
    median_order: float
    threshold: float
    passed: bool


def _central_gradient(p: Potential, x: np.ndarray, h: float) -> np.ndarray:
    n = p.dim_u
    g = np.zeros_like(x)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        g[..., i] = (p.W(x + e) - p.W(x - e)) / (2.0 * h)
    return g


def check_gradient_consistency(
    p: Potential, sample_points, h_sequence: Sequence[float], threshold: float = 1.8
) -> GradientReport:
    """Measure the order of |W_u - central FD(W)| under the given step sizes."""
    hs = np.asarray(h_sequence, dtype=float)
    if hs.ndim != 1 or hs.size < 2:
        raise ConfigError("need at least two step sizes")
    if np.any(np.diff(hs) >= 0) or np.any(hs <= 0):
        raise ConfigError("step sizes must be positive and strictly decreasing")
    x = _as_points(sample_points, p.dim_u).reshape(-1, p.dim_u)
    exact = p.Wu(x)
    scale = 1.0 + np.abs(exact).max(axis=-1)
    errs = np.stack(
        [np.abs(_central_gradient(p, x, h) - exact).max(axis=-1) for h in hs], axis=-1
    )
    # errors already at roundoff level carry no order information
    floor = 1e-10 * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        rates = np.log(errs[:, :-1] / errs[:, 1:]) / np.log(hs[:-1] / hs[1:])
    exact_pts = errs[:, 0] <= floor
    orders = np.where(exact_pts, np.inf, rates.min(axis=-1) if rates.shape[1] else np.inf)
    med = float(np.median(orders)) if orders.size else float("inf")
    return GradientReport(hs, errs, orders, med, threshold, bool(med >= threshold))
