"""Heteroclinic connections U'' = W_u(U) between isolated minima, and surface tension.

A connection is computed on [-L, L] with U(-L) = a_i and U(L) = a_j clamped,
by a linearly implicit gradient flow of the 1D action

    S(U) = int (|U'|^2 / 2 + W(U)) d eta,

    (I - dt D2) U^{k+1} = U^k - dt W_u(U^k),

which lowers the discrete action for dt < 2 / max|eig W_uu|. Its fixed points
solve the discrete Euler-Lagrange equation D2 U = W_u(U).
"""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded

from .convergence import ConvergenceReport
from .errors import ConfigError, ConvergenceError, UnsupportedError

log = logging.getLogger(__name__)


@dataclass
class ConnectionProfile:
    """Samples of a connection on the symmetric grid ``eta = -L + k h``.

    ``anchor_offset`` is the (sub-grid) position of the energy-density peak;
    ``phase_anchor`` the node closest to it. Interpolation through ``__call__``
    measures eta from the peak, so the profile is centred there.
    """

    eta: np.ndarray
    U: np.ndarray  # (N + 1, m)
    a_i: np.ndarray
    a_j: np.ndarray
    h: float
    L: float
    i: int = 0
    j: int = 1
    anchor_offset: float = 0.0
    phase_anchor: int = 0
    sigma: float = float("nan")
    sigma_error: float = float("nan")
    residual: float = float("nan")
    iterations: int = 0
    tail_deviation: float = 0.0
    notes: list[str] = field(default_factory=list)
    _interp: object = field(default=None, repr=False, compare=False)

    @property
    def dim_u(self) -> int:
        return self.U.shape[1]

    def __call__(self, s) -> np.ndarray:
        """U(s) with s measured from the anchor; clamped to the end states beyond the grid."""
        if self._interp is None:
            self._interp = PchipInterpolator(self.eta - self.anchor_offset, self.U, axis=0, extrapolate=False)
        s = np.asarray(s, float)
        out = self._interp(np.clip(s, self.eta[0] - self.anchor_offset, self.eta[-1] - self.anchor_offset))
        out = np.where((s < self.eta[0] - self.anchor_offset)[..., None], self.a_i, out)
        out = np.where((s > self.eta[-1] - self.anchor_offset)[..., None], self.a_j, out)
        return out

    @classmethod
    def from_function(cls, func, a_i, a_j, L: float, h: float, p=None) -> "ConnectionProfile":
        """Sample a known profile, e.g. tanh(eta / sqrt 2), on the standard grid."""
        eta = _eta_grid(L, h)
        U = np.asarray(func(eta), float)
        if U.ndim == 1:
            U = U[:, None]
        prof = cls(eta, U, np.atleast_1d(np.asarray(a_i, float)), np.atleast_1d(np.asarray(a_j, float)),
                   float(eta[1] - eta[0]), float(L))
        if p is not None:
            _anchor(prof, p)
            prof.sigma, prof.sigma_error = sigma_with_error(prof, p)
        return prof

    def as_columns(self, p) -> dict[str, np.ndarray]:
        """Columns for CSV export: eta, U components, |U'|^2/2 and W(U)."""
        cols = {"eta": self.eta - self.anchor_offset}
        for c in range(self.dim_u):
            cols[f"U{c + 1}"] = self.U[:, c]
        cols["kinetic"] = 0.5 * np.sum(_central(self.U, self.h) ** 2, axis=-1)
        cols["potential"] = p.W(self.U)
        return cols


def _eta_grid(L: float, h: float) -> np.ndarray:
    if L <= 0 or h <= 0:
        raise ConfigError("L and h must be positive")
    n = int(round(2 * L / h))
    if n < 8:
        raise ConfigError("too few cells on [-L, L]")
    return np.linspace(-L, L, n + 1)


def _central(U: np.ndarray, h: float) -> np.ndarray:
    return np.gradient(U, h, axis=0, edge_order=2)


def decay_rate(p, a) -> float:
    """sqrt of the smallest Hessian eigenvalue at a minimum (linearized decay rate)."""
    lam = np.linalg.eigvalsh(p.Wuu(np.asarray(a, float)))
    return float(np.sqrt(max(lam.min(), 0.0)))


def discrete_residual(U: np.ndarray, h: float, p) -> float:
    """Max-norm of D2 U - W_u(U) over the interior nodes."""
    d2 = (U[2:] - 2.0 * U[1:-1] + U[:-2]) / h**2
    return float(np.abs(d2 - p.Wu(U[1:-1])).max())


def _anchor(prof: ConnectionProfile, p) -> None:
    e = 0.5 * np.sum(_central(prof.U, prof.h) ** 2, axis=-1) + p.W(prof.U)
    k = int(np.argmax(e[1:-1])) + 1
    em, e0, ep = e[k - 1], e[k], e[k + 1]
    denom = em - 2.0 * e0 + ep
    shift = 0.5 * (em - ep) / denom if denom < 0 else 0.0
    prof.anchor_offset = float(prof.eta[k] + shift * prof.h)
    prof.phase_anchor = k


def solve_connection(p, i: int, j: int, L: float = 12.0, h: float = 0.01, tol: float = 1e-8,
                     max_iter: int = 200_000, dt: float | None = None) -> ConnectionProfile:
    """Connection from minimum ``i`` to minimum ``j`` of ``p`` (0-based indices)."""
    if p.continuum_minima:
        raise UnsupportedError(f"potential {p.name!r} has a continuum of minima; connections need isolated wells")
    if i == j:
        raise ConfigError("a connection needs two distinct minima")
    if not (0 <= i < p.n_minima and 0 <= j < p.n_minima):
        raise ConfigError(f"minimum index out of range for {p.n_minima} minima")
    a_i, a_j = p.minima[i].astype(float), p.minima[j].astype(float)
    eta = _eta_grid(L, h)
    h = float(eta[1] - eta[0])
    mu = min(decay_rate(p, a_i), decay_rate(p, a_j))
    if mu <= 0:
        raise UnsupportedError("degenerate minimum: W_uu is singular there")

    s = 0.5 * (1.0 + np.tanh(0.5 * mu * eta))
    U = a_i + s[:, None] * (a_j - a_i)
    U[0], U[-1] = a_i, a_j  # clamped ends

    if dt is None:
        lo = np.minimum(a_i, a_j) - 0.25 * np.abs(a_j - a_i).max() - 0.1
        hi = np.maximum(a_i, a_j) + 0.25 * np.abs(a_j - a_i).max() + 0.1
        from .solver import hessian_bounds

        lam_lo, lam_hi = hessian_bounds(p, lo, hi)
        dt = 1.0 / max(abs(lam_lo), abs(lam_hi), 1e-12)

    n_int = eta.size - 2
    r = dt / h**2
    ab = np.zeros((3, n_int))
    ab[0, 1:] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :-1] = -r
    res = discrete_residual(U, h, p)
    it = 0
    while res > tol and it < max_iter:
        rhs = U[1:-1] - dt * p.Wu(U[1:-1])
        rhs[0] += r * U[0]
        rhs[-1] += r * U[-1]
        U[1:-1] = solve_banded((1, 1), ab, rhs)
        it += 1
        res = discrete_residual(U, h, p)
        if not np.isfinite(res):
            raise ConvergenceError(f"connection iteration blew up after {it} steps", {"residual": res})
    if res > tol:
        raise ConvergenceError(
            f"connection {i}->{j} not converged: residual {res:.3e} > {tol:.1e} after {it} steps",
            {"residual": res, "iterations": it},
        )
    prof = ConnectionProfile(eta, U, a_i, a_j, h, float(L), i, j, residual=res, iterations=it)
    _anchor(prof, p)
    # project |U - a| from |eta| = L/2 to the ends with the decay rate seen
    # between L/4 and L/2 (never slower than the slowest linearized rate)
    dev = 0.0
    for a, sgn in ((a_i, -1.0), (a_j, 1.0)):
        k2, k4 = (int(np.argmin(np.abs(eta - sgn * f * L))) for f in (0.5, 0.25))
        d2, d4 = np.linalg.norm(U[k2] - a), np.linalg.norm(U[k4] - a)
        rate = mu
        if d2 > 0 and d4 > d2:
            rate = max(mu, np.log(d4 / d2) / abs(eta[k2] - eta[k4]))
        dev = max(dev, d2 * np.exp(-rate * (L - abs(eta[k2]))))
    prof.tail_deviation = float(dev)
    if prof.tail_deviation > 1e-6:
        msg = f"L = {L} may truncate the tails: projected |U(+-L) - a| = {prof.tail_deviation:.1e}"
        prof.notes.append(msg)
        log.warning(msg)
    prof.sigma, prof.sigma_error = sigma_with_error(prof, p)
    return prof


# --------------------------------------------------------------------------
# surface tension


def _midpoint_energy(U: np.ndarray, h: float, p) -> float:
    mid = 0.5 * (U[1:] + U[:-1])
    du = (U[1:] - U[:-1]) / h
    return float(h * np.sum(0.5 * np.sum(du * du, axis=-1) + p.W(mid)))


def _tail(prof: ConnectionProfile, p) -> float:
    total = 0.0
    e = 0.5 * np.sum(_central(prof.U, prof.h) ** 2, axis=-1) + p.W(prof.U)
    for a, k in ((prof.a_i, int(np.searchsorted(prof.eta, -0.5 * prof.L))),
                 (prof.a_j, int(np.searchsorted(prof.eta, 0.5 * prof.L)))):
        mu = decay_rate(p, a)
        if mu <= 0:
            continue
        # e ~ exp(-2 mu |eta|); extrapolate from |eta| = L/2 to the truncation point
        total += e[k] * np.exp(-2.0 * mu * (prof.L - abs(prof.eta[k]))) / (2.0 * mu)
    return float(total)


def sigma_with_error(prof: ConnectionProfile, p) -> tuple[float, float]:
    """Composite midpoint energy plus exponential tail, with an error bar.

    The bar is the tail size plus a Richardson estimate from the profile
    subsampled to step 2h.
    """
    if np.allclose(prof.a_i, prof.a_j) and np.allclose(prof.U, prof.a_i):
        return 0.0, 0.0
    fine = _midpoint_energy(prof.U, prof.h, p)
    tail = _tail(prof, p)
    err = tail
    if (prof.U.shape[0] - 1) % 2 == 0:
        coarse = _midpoint_energy(prof.U[::2], 2 * prof.h, p)
        err += abs(fine - coarse) / 3.0
    return fine + tail, float(err)


def sigma(prof: ConnectionProfile, p) -> float:
    return sigma_with_error(prof, p)[0]


def sigma_from_potential(prof: ConnectionProfile, p) -> float:
    """int 2 W(U) d eta, equal to sigma when equipartition holds."""
    mid = 0.5 * (prof.U[1:] + prof.U[:-1])
    return float(prof.h * np.sum(2.0 * p.W(mid)))


@dataclass
class EquipartitionReport:
    max_discrepancy: float
    at_eta: float
    h: float

    def as_dict(self):
        return dict(self.__dict__)


def check_equipartition(prof: ConnectionProfile, p) -> EquipartitionReport:
    """max over interior nodes of | |U'|^2/2 - W(U) | with central differences."""
    du = (prof.U[2:] - prof.U[:-2]) / (2.0 * prof.h)
    gap = np.abs(0.5 * np.sum(du * du, axis=-1) - p.W(prof.U[1:-1]))
    k = int(np.argmax(gap)) if gap.size else 0
    return EquipartitionReport(float(gap.max()) if gap.size else 0.0, float(prof.eta[k + 1]), prof.h)


def equipartition_study(p, i: int, j: int, L: float, h_sequence, threshold: float = 1.8,
                        profile_at=None) -> ConvergenceReport:
    """Equipartition discrepancy across a refinement sequence.

    ``profile_at(h)`` overrides the solver (e.g. to sample a closed form).
    """
    steps, errs = [], []
    for h in h_sequence:
        prof = profile_at(h) if profile_at else solve_connection(p, i, j, L, h)
        rep = check_equipartition(prof, p)
        steps.append(prof.h)
        errs.append(rep.max_discrepancy)
    return ConvergenceReport("equipartition", steps, errs, threshold, vanish_tol=1e-13)


# --------------------------------------------------------------------------
# sigma tables


@dataclass
class TriangleReport:
    sigma: dict[tuple[int, int], float]
    sigma_error: dict[tuple[int, int], float]
    slack: dict[tuple[int, int, int], float]  # sigma_ij + sigma_jk - sigma_ik
    tol: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "sigma": {f"{i}-{j}": v for (i, j), v in sorted(self.sigma.items())},
            "sigma_error": {f"{i}-{j}": v for (i, j), v in sorted(self.sigma_error.items())},
            "slack": {f"{i}-{j}-{k}": v for (i, j, k), v in sorted(self.slack.items())},
            "tol": self.tol,
            "passed": self.passed,
        }


def sigma_table(p, L: float = 8.0, h: float = 0.01, jobs: int = 1, **kw) -> dict[tuple[int, int], ConnectionProfile]:
    """Connections for every unordered pair of minima, keyed by (i, j) with i < j."""
    pairs = list(itertools.combinations(range(p.n_minima), 2))
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            profs = list(pool.map(lambda ij: solve_connection(p, ij[0], ij[1], L, h, **kw), pairs))
    else:
        profs = [solve_connection(p, i, j, L, h, **kw) for i, j in pairs]
    return dict(zip(pairs, profs))


def check_triangle_inequality(p, L: float = 8.0, h: float = 0.01, tol: float = 1e-8,
                              jobs: int = 1, table=None) -> TriangleReport:
    """sigma_ij + sigma_jk >= sigma_ik - tol over all ordered triples of distinct minima."""
    if p.continuum_minima:
        raise UnsupportedError(f"potential {p.name!r} has no isolated minima")
    table = table if table is not None else sigma_table(p, L, h, jobs)
    sig = {k: v.sigma for k, v in table.items()}
    err = {k: v.sigma_error for k, v in table.items()}

    def s(a, b):
        return sig[(min(a, b), max(a, b))]

    slack = {}
    for i, j, k in itertools.permutations(range(p.n_minima), 3):
        slack[(i, j, k)] = s(i, j) + s(j, k) - s(i, k)
    ok = all(v >= -tol for v in slack.values())
    return TriangleReport(sig, err, slack, tol, bool(ok))
