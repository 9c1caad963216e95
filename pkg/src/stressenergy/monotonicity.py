"""Ball energies E_{B_R}(u), monotonicity ratio detectors and growth diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, ShapeError
from .grid import PERIODIC, Grid, GridField, gradient, gradient_sq, interior

MARGIN_FRACTION = 0.1


@dataclass
class BallEnergyProfile:
    """E_k = E_{B(x0, R_k)}(u) with per-radius quadrature error estimates.

    ``potential_energy`` holds int_{B_R} W(u) from the same quadrature.
    """

    center: np.ndarray
    radii: np.ndarray
    energy: np.ndarray
    error: np.ndarray
    dim: int
    potential_energy: np.ndarray | None = None
    potential_error: np.ndarray | None = None

    def __post_init__(self):
        self.radii = np.asarray(self.radii, float)
        self.energy = np.asarray(self.energy, float)
        self.error = np.asarray(self.error, float)
        if np.any(np.diff(self.radii) <= 0):
            raise ShapeError("radii must be strictly increasing")
        if self.radii.shape != self.energy.shape or self.energy.shape != self.error.shape:
            raise ShapeError("radii, energies and errors must have equal length")

    def ratios(self, exponent: float) -> np.ndarray:
        return self.energy / self.radii**exponent

    def as_columns(self) -> dict[str, np.ndarray]:
        n = self.dim
        return {
            "R": self.radii,
            "E": self.energy,
            "ratio_weak": self.ratios(n - 2),
            "ratio_strong": self.ratios(n - 1),
            "tol": self.error,
        }


@dataclass
class MonotonicityReport:
    exponent: float
    ratios: np.ndarray
    tolerances: np.ndarray
    violations: list[tuple[int, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def as_dict(self) -> dict:
        return {
            "exponent": float(self.exponent),
            "ratios": [float(r) for r in self.ratios],
            "tolerances": [float(t) for t in self.tolerances],
            "violations": [{"k": int(k), "magnitude": float(m)} for k, m in self.violations],
            "verdict": self.verdict,
        }


def geometric_radii(r_min: float, r_max: float, ratio: float = 2.0 ** 0.125) -> np.ndarray:
    """Radii r_min * ratio^k up to r_max (inclusive within rounding)."""
    if not 0 < r_min < r_max:
        raise DomainError("need 0 < r_min < r_max")
    k = int(np.floor(np.log(r_max / r_min) / np.log(ratio) + 1e-9))
    return r_min * ratio ** np.arange(k + 1)


def default_radii(grid: Grid, x0) -> np.ndarray:
    """Geometric radii from 4h up to the margin-limited largest ball around x0."""
    return geometric_radii(4.0 * max(grid.spacing), max_radius(grid, x0))


def max_radius(grid: Grid, x0) -> float:
    lo = np.asarray(grid.origin)
    hi = np.asarray(grid.upper)
    half = 0.5 * (hi - lo)
    x0 = np.asarray(x0, float)
    room = np.minimum(x0 - (lo + MARGIN_FRACTION * half), (hi - MARGIN_FRACTION * half) - x0)
    return float(room.min())


def _node_values(f: GridField) -> np.ndarray:
    v = f.values
    if f.boundary == PERIODIC:
        for a in range(f.grid.dim):
            v = np.concatenate([v, np.take(v, [0], axis=a)], axis=a)
    return v


def _corner_slices(dim: int):
    for bits in np.ndindex(*(2,) * dim):
        yield bits, tuple(slice(b, None if b else -1) for b in bits)


def cell_center_density(f: GridField, p) -> tuple[np.ndarray, np.ndarray]:
    """e(u) and W(u) at cell centres from corner averages and edge differences."""
    v = _node_values(f)
    n = f.grid.dim
    mean = np.zeros(tuple(e for e in f.grid.extents) + (v.shape[-1],))
    for _, sl in _corner_slices(n):
        mean += v[sl]
    mean /= 2**n
    g2 = np.zeros(mean.shape[:-1])
    for a, h in enumerate(f.grid.spacing):
        d = np.zeros_like(mean)
        for bits, sl in _corner_slices(n):
            d += (1.0 if bits[a] else -1.0) * v[sl]
        d /= 2 ** (n - 1) * h
        g2 += np.sum(d * d, axis=-1)
    w = p.W(mean)
    return 0.5 * g2 + w, w


def _fractions(grid: Grid, x0: np.ndarray, R: float) -> tuple[np.ndarray, np.ndarray]:
    """Cell volume fractions inside the ball: vertex count and one subdivision."""
    n = grid.dim
    half = [o + 0.5 * h * np.arange(2 * e + 1) for o, h, e in zip(grid.origin, grid.spacing, grid.extents)]
    d2 = np.zeros(tuple(len(a) for a in half))
    for a, ax in enumerate(half):
        shape = [1] * n
        shape[a] = -1
        d2 = d2 + ((ax - x0[a]) ** 2).reshape(shape)
    inside = (d2 < R * R).astype(float)
    # one-subdivision weights: (1/4, 1/2, 1/4) per axis over the 3^n half-lattice points
    frac1 = inside
    frac0 = inside
    for a in range(n):
        m = frac1.shape[a]
        take = lambda arr, s: np.take(arr, np.arange(s, s + m - 2, 2), axis=a)
        frac1 = 0.25 * take(frac1, 0) + 0.5 * take(frac1, 1) + 0.25 * take(frac1, 2)
        frac0 = 0.5 * take(frac0, 0) + 0.5 * take(frac0, 2)
    return frac0, frac1


def ball_energy(f: GridField, p, x0, radii: Sequence[float] | None = None,
                check_margin: bool = True) -> BallEnergyProfile:
    """Fractional-cell quadrature of e(u) over the balls B(x0, R).

    A cell contributes (volume fraction inside) x cell volume x e(u) at the
    cell centre. Fractions come from vertex counting refined by one
    subdivision level; the difference between the two levels is the error
    estimate.
    """
    x0 = np.asarray(x0, float).reshape(-1)
    if x0.size != f.grid.dim:
        raise ShapeError("center dimension does not match the grid")
    radii = default_radii(f.grid, x0) if radii is None else np.asarray(radii, float)
    if check_margin:
        limit = max_radius(f.grid, x0)
        if np.any(radii > limit * (1 + 1e-12)):
            raise DomainError(f"ball of radius {radii.max():g} leaves the domain (limit {limit:g} with margin)")
    e, w = cell_center_density(f, p)
    vol = f.grid.cell_volume
    E, err, Wb, Werr = [], [], [], []
    for R in radii:
        fr0, fr1 = _fractions(f.grid, x0, float(R))
        E.append(vol * float(np.sum(fr1 * e)))
        err.append(vol * float(np.sum(np.abs(fr1 - fr0) * e)))
        Wb.append(vol * float(np.sum(fr1 * w)))
        Werr.append(vol * float(np.sum(np.abs(fr1 - fr0) * w)))
    return BallEnergyProfile(x0, radii, np.array(E), np.array(err), f.grid.dim,
                             np.array(Wb), np.array(Werr))


# drops this small relative to the ratios are roundoff, e.g. in equality cases
ROUNDOFF_FLOOR = 64 * np.finfo(float).eps


def _detect(ratios: np.ndarray, tol: np.ndarray, exponent: float) -> MonotonicityReport:
    viol = []
    for k in range(len(ratios) - 1):
        drop = ratios[k] - ratios[k + 1]
        floor = ROUNDOFF_FLOOR * max(abs(ratios[k]), abs(ratios[k + 1]))
        if drop > tol[k] + tol[k + 1] + floor:
            viol.append((k, float(drop)))
    return MonotonicityReport(exponent, ratios, tol, viol)


def check_ratio_monotonicity(profile: BallEnergyProfile, exponent: float) -> MonotonicityReport:
    """Flag every k with r_{k+1} < r_k - (tol_k + tol_{k+1}), r_k = E_k / R_k^exponent."""
    ratios = profile.ratios(exponent)
    tol = profile.error / profile.radii**exponent
    return _detect(ratios, tol, exponent)


def check_weak_monotonicity(profile: BallEnergyProfile, n: int | None = None) -> MonotonicityReport:
    n = profile.dim if n is None else n
    return check_ratio_monotonicity(profile, n - 2)


def check_strong_monotonicity(profile: BallEnergyProfile, n: int | None = None) -> MonotonicityReport:
    n = profile.dim if n is None else n
    return check_ratio_monotonicity(profile, n - 1)


# --------------------------------------------------------------------------
# Modica gradient estimate


@dataclass
class ModicaReport:
    slack: np.ndarray  # 2W - |grad u|^2 on the interior sub-grid
    coords: np.ndarray  # matching node coordinates
    min_slack: float
    violation_fraction: float
    max_trace_excess: float  # max of tr T + (n-1) e where slack >= 0
    trace_tol: float
    trace_bound_holds: bool

    def violation_fraction_where(self, mask: np.ndarray) -> float:
        sel = self.slack[mask]
        return float(np.mean(sel < 0)) if sel.size else 0.0

    def as_dict(self) -> dict:
        return {
            "min_slack": self.min_slack,
            "violation_fraction": self.violation_fraction,
            "max_trace_excess": self.max_trace_excess,
            "trace_tol": self.trace_tol,
            "trace_bound_holds": self.trace_bound_holds,
        }


def check_modica_estimate(f: GridField, p, margin: int = 1, trace_tol: float = 1e-10) -> ModicaReport:
    """Slack s = 2W(u) - |grad u|^2 at interior nodes.

    Where s >= 0 the strengthened trace bound tr T <= -(n-1) e(u) must hold;
    its largest excess is reported.
    """
    from .tensor import build_T

    n = f.grid.dim
    jac = gradient(f)
    g2 = gradient_sq(jac)
    w = p.W(f.values)
    s = 2.0 * w - g2
    e = 0.5 * g2 + w
    if f.dim_u == n:
        tr = build_T(f, p).trace()
    else:
        tr = -n * e + g2
    excess = tr + (n - 1) * e
    sl = interior(n, margin) if f.boundary != PERIODIC else (slice(None),) * n
    s_i, ex_i = s[sl], excess[sl]
    ok_nodes = s_i >= 0
    max_ex = float(ex_i[ok_nodes].max()) if ok_nodes.any() else float("-inf")
    return ModicaReport(
        slack=s_i,
        coords=f.coordinates()[sl],
        min_slack=float(s_i.min()),
        violation_fraction=float(np.mean(s_i < 0)),
        max_trace_excess=max_ex,
        trace_tol=trace_tol,
        trace_bound_holds=bool(max_ex <= trace_tol),
    )


# --------------------------------------------------------------------------
# growth and Liouville diagnostics


@dataclass
class GrowthFit:
    model: str
    rate: float  # power-law exponent or log coefficient
    intercept: float
    residual: float
    radii_used: np.ndarray
    verdict: str  # "fitted" or "identically zero"

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "rate": self.rate,
            "intercept": self.intercept,
            "residual": self.residual,
            "r_min": float(self.radii_used.min()) if self.radii_used.size else None,
            "r_max": float(self.radii_used.max()) if self.radii_used.size else None,
            "verdict": self.verdict,
        }


def growth_rate(profile: BallEnergyProfile, model: str = "power", zero_tol: float = 1e-14) -> GrowthFit:
    """Least-squares growth fit over the largest decade of radii.

    ``power``: log E = rate * log R + c.  ``log``: E = rate * log R + c.
    """
    if model not in ("power", "log"):
        raise DomainError(f"unknown growth model {model!r}")
    R, E = profile.radii, profile.energy
    if np.all(np.abs(E) <= zero_tol):
        return GrowthFit(model, 0.0, 0.0, 0.0, np.array([]), "identically zero")
    sel = R >= R.max() / 10.0
    R, E = R[sel], E[sel]
    if model == "power":
        if np.any(E <= 0):
            raise DomainError("power-law fit needs positive energies")
        y = np.log(E)
    else:
        y = E
    A = np.stack([np.log(R), np.ones_like(R)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return GrowthFit(model, float(coef[0]), float(coef[1]), res, R, "fitted")


@dataclass
class LiouvilleReport:
    dim: int
    pairs_checked: int
    worst_margin: float  # min over pairs of lhs - rhs + tol (>= 0 means pass)
    worst_pair: tuple[float, float] | None
    bound_holds: bool
    growth: GrowthFit | None
    nonconstant: bool
    unbounded_growth: bool | None

    @property
    def passed(self) -> bool:
        if not self.bound_holds:
            return False
        return (not self.nonconstant) or bool(self.unbounded_growth)

    def as_dict(self) -> dict:
        return {
            "dim": self.dim,
            "pairs_checked": self.pairs_checked,
            "worst_margin": self.worst_margin,
            "worst_pair": list(self.worst_pair) if self.worst_pair else None,
            "bound_holds": self.bound_holds,
            "growth": self.growth.as_dict() if self.growth else None,
            "nonconstant": self.nonconstant,
            "unbounded_growth": self.unbounded_growth,
            "passed": self.passed,
        }


def log_lower_bound_margins(profile: BallEnergyProfile):
    """For all R0 < R: E(R) - E(R0) - 2 log(R/R0) int_{B_R0} W + summed errors."""
    R, E, err = profile.radii, profile.energy, profile.error
    Wb, Werr = profile.potential_energy, profile.potential_error
    if Wb is None:
        raise DomainError("profile lacks potential-energy integrals")
    out = []
    for a in range(len(R)):
        for b in range(a + 1, len(R)):
            lg = 2.0 * np.log(R[b] / R[a])
            lhs = E[b]
            rhs = E[a] + lg * Wb[a]
            tol = err[a] + err[b] + lg * Werr[a]
            out.append((R[a], R[b], lhs - rhs + tol))
    return out


def liouville_consistency(f: GridField, p, x0=None, radii=None, n: int | None = None,
                          const_tol: float = 1e-12, profile: BallEnergyProfile | None = None) -> LiouvilleReport:
    """Consistency of computed profiles with the Liouville argument.

    In two dimensions the lower bound
    E(R) >= E(R0) + 2 log(R/R0) int_{B_R0} W is checked at every radius pair;
    in higher dimensions weak monotonicity plays that role. A nonconstant
    field must also show a positive fitted growth rate.
    """
    n = f.grid.dim if n is None else n
    if x0 is None:
        x0 = 0.5 * (np.asarray(f.grid.origin) + np.asarray(f.grid.upper))
    prof = profile if profile is not None else ball_energy(f, p, x0, radii)
    spread = np.abs(f.values - f.values.reshape(-1, f.dim_u)[0]).max()
    nonconstant = bool(spread > const_tol)
    if n == 2:
        margins = log_lower_bound_margins(prof)
        worst = min(margins, key=lambda t: t[2]) if margins else None
        worst_margin = float(worst[2]) if worst else 0.0
        holds = worst_margin >= 0.0
        worst_pair = (float(worst[0]), float(worst[1])) if worst else None
        count = len(margins)
    else:
        rep = check_weak_monotonicity(prof, n)
        worst_margin = -max((m for _, m in rep.violations), default=0.0)
        holds = rep.passed
        worst_pair = None
        count = len(prof.radii) - 1
    growth = None
    unbounded = None
    if nonconstant:
        growth = growth_rate(prof, "log" if n == 2 else "power")
        unbounded = bool(growth.verdict == "fitted" and growth.rate > 0)
    return LiouvilleReport(n, count, worst_margin, worst_pair, bool(holds), growth, nonconstant, unbounded)
