"""Compare the compiled kernels with the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--steps 2000] [--repeat 3]

Times a fixed number of flow steps on the vortex grid and the triangle/disk
clipping used by the surface area profiles, for every available backend.
Both backends must agree; the script exits non-zero if they do not.
"""
import argparse
import sys
import time

import numpy as np

from stressenergy import kernels
from stressenergy.problems import vortex_setup
from stressenergy.sharp_interface import InterfaceSpec, _ClipFrames, surface_mesh
from stressenergy.solver import SolveConfig, relax


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_relax(backend, steps, repeat):
    cfg, init = vortex_setup()
    # a tiny tol keeps the loop running for exactly ``steps`` passes
    capped = SolveConfig(cfg.potential, cfg.grid, tol=1e-300, max_iter=steps)
    return best_of(lambda: relax(capped, init, backend=backend).field.values, repeat)


def bench_clip(backend, repeat):
    mesh = surface_mesh(InterfaceSpec.catenoid(1.0), [1.0, 0.0, 0.0], 1.5, 128)
    frames = _ClipFrames(mesh, [1.0, 0.0, 0.0])
    radii = np.geomspace(0.25, 1.5, 15)
    return best_of(lambda: np.array([frames.area(r, backend=backend) for r in radii]), repeat)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = ["python"] + (["cython"] if kernels.HAVE_EXTENSION else [])
    if not kernels.HAVE_EXTENSION:
        print("compiled extension not built; timing the numpy fallback only")

    rows = []
    results = {}
    for name, run in (("relax_loop (vortex grid, %d steps)" % args.steps,
                       lambda be: bench_relax(be, args.steps, args.repeat)),
                      ("tri_disk_area (catenoid mesh, 15 radii)", lambda be: bench_clip(be, args.repeat))):
        for be in backends:
            t, out = run(be)
            results[(name, be)] = out
            rows.append((name, be, t))

    print(f"{'kernel':42s} {'backend':8s} {'seconds':>10s} {'speedup':>8s}")
    ok = True
    for name, be, t in rows:
        base = next(t2 for n2, b2, t2 in rows if n2 == name and b2 == "python")
        print(f"{name:42s} {be:8s} {t:10.4f} {base / t:8.1f}")
        if be != "python":
            diff = np.abs(results[(name, be)] - results[(name, "python")]).max()
            print(f"{'':42s} max difference from numpy: {diff:.2e}")
            ok &= diff <= 1e-10
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
