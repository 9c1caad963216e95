"""Observed-order bookkeeping for refinement studies."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def observed_orders(steps, errors) -> np.ndarray:
    """Pairwise orders log(e_k / e_{k+1}) / log(h_k / h_{k+1})."""
    h = np.asarray(steps, float)
    e = np.asarray(errors, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


@dataclass
class ConvergenceReport:
    """Errors across a refinement sequence and the verdict drawn from them.

    ``passed`` holds when every pairwise order reaches ``threshold`` or,
    failing that, when every error is below ``vanish_tol`` (both sides of an
    identity vanish identically).
    """

    name: str
    steps: list[float]
    errors: list[float]
    threshold: float
    vanish_tol: float = 1e-10
    orders: list[float] = field(init=False)
    passed: bool = field(init=False)
    vanished: bool = field(init=False)

    def __post_init__(self):
        self.orders = [float(o) for o in observed_orders(self.steps, self.errors)]
        self.vanished = bool(max(self.errors) <= self.vanish_tol)
        ok = len(self.orders) > 0 and all(np.isfinite(o) and o >= self.threshold for o in self.orders)
        self.passed = bool(self.vanished or ok)

    @property
    def min_order(self) -> float:
        return min(self.orders) if self.orders else float("nan")

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "steps": list(map(float, self.steps)),
            "errors": list(map(float, self.errors)),
            "orders": self.orders,
            "threshold": self.threshold,
            "vanish_tol": self.vanish_tol,
            "vanished": self.vanished,
            "passed": self.passed,
        }
