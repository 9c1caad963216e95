"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``STRESSENERGY_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import logging
import os

import numpy as np

from . import _fallback
from .errors import ShapeError

log = logging.getLogger(__name__)

try:
    if os.environ.get("STRESSENERGY_BACKEND", "").lower() == "python":
        raise ImportError("fallback requested")
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

HAVE_EXTENSION = _compiled is not None
BACKEND = "cython" if HAVE_EXTENSION else "python"
BACKENDS = ("cython", "python")


def _choose(backend):
    use = backend or BACKEND
    if use not in BACKENDS:
        raise ValueError(f"unknown backend {use!r}; choose from {BACKENDS}")
    return use


def relax_loop(u, free, plus, minus, inv_h2, vol, dt, eps, potential, max_steps, tol,
               backend: str | None = None):
    """Dispatch the flow loop; potentials without a kernel tag use numpy."""
    use = _choose(backend)
    if use == "cython" and _compiled is not None and potential.kernel_code >= 0 and u.shape[1] <= 8:
        params = np.ascontiguousarray(potential.kernel_params or (0.0,), dtype=float)
        return _compiled.relax_loop(
            u, free, plus, minus, inv_h2, float(vol), float(dt), float(eps),
            int(potential.kernel_code), params, int(max_steps), float(tol),
        )
    if use == "cython" and _compiled is None:
        log.debug("compiled kernels unavailable, using numpy")
    return _fallback.relax_loop(u, free, plus, minus, inv_h2, vol, dt, eps, potential, max_steps, tol)


def tri_disk_area(a, b, c, r2, backend: str | None = None):
    """Areas of triangles (vertices relative to the disk centre) inside disks of squared radius r2."""
    use = _choose(backend)
    a, b, c = (np.ascontiguousarray(v, dtype=float) for v in (a, b, c))
    if a.ndim != 2 or a.shape[1] != 2 or b.shape != a.shape or c.shape != a.shape:
        raise ShapeError(f"triangle vertices must be (k, 2) in-plane coordinates, got {a.shape}")
    r2 = np.ascontiguousarray(np.broadcast_to(np.asarray(r2, dtype=float), (a.shape[0],)))
    if use == "cython" and _compiled is not None:
        return _compiled.tri_disk_area(a, b, c, r2)
    return _fallback.tri_disk_area(a, b, c, r2)
