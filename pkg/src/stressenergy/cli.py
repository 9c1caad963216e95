"""Command-line driver.

Every subcommand reads one TOML run file, writes CSV/JSON artefacts into the
output directory and exits with

    0  all checks passed
    2  a check failed
    3  configuration or input error
    4  numerical divergence

Reports carry the sha256 of the parsed config, the seed, the tolerances
used and the package version; wall-clock timestamps go only to ``run.log`` so
that repeated runs produce byte-identical reports.
"""
from __future__ import annotations

import argparse
import datetime
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import __version__, io
from .connection import check_equipartition, check_triangle_inequality, sigma_table, solve_connection
from .errors import (
    ConfigError,
    ConvergenceError,
    DivergenceError,
    DomainError,
    ShapeError,
    StressEnergyError,
    UnsupportedError,
)
from .grid import DIRICHLET, Grid, manufactured_field
from .monotonicity import (
    ball_energy,
    check_modica_estimate,
    check_strong_monotonicity,
    check_weak_monotonicity,
    default_radii,
    geometric_radii,
    growth_rate,
    liouville_consistency,
)
from .potential import from_spec
from .problems import initial_field
from .sharp_interface import (
    InterfaceSpec,
    TestFunction,
    check_surface_monotonicity,
    surface_ball_area,
    surface_mesh,
    verify_limit_tensor,
)
from .solver import SolveConfig, relax, residual
from .tensor import build_T, trace_T, verify_divergence_identity, verify_psd_identity

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3, 4
COMMANDS = ("solve", "verify-tensor", "monotonicity", "modica", "connection", "limit", "surface", "report-all")

log = logging.getLogger("stressenergy")


class Run:
    """Parsed config plus output location shared by the subcommands."""

    def __init__(self, config: dict, out: Path, jobs: int = 1, seed: int = 0, snapshot: str | None = None):
        self.config = config
        self.out = Path(out)
        self.jobs = max(1, int(jobs))
        self.seed = int(seed)
        self.snapshot = snapshot
        self.hash = io.config_hash({"config": config, "seed": self.seed})
        self._potential = None

    def section(self, name: str, required: bool = False) -> dict:
        sec = self.config.get(name)
        if sec is None:
            if required:
                raise ConfigError(f"config needs a [{name}] table")
            return {}
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a table")
        return sec

    @property
    def potential(self):
        if self._potential is None:
            sec = self.section("potential", required=True)
            if "name" not in sec:
                raise ConfigError("[potential] needs a name")
            params = dict(sec.get("params", {}))
            if sec["name"] == "polynomial":
                params.setdefault("seed", self.seed)
            self._potential = from_spec(sec["name"], params)
        return self._potential

    def grid(self, h: float | None = None) -> Grid:
        sec = self.section("grid", required=True)
        try:
            return Grid.box(sec["lo"], sec["hi"], h if h is not None else sec["h"], sec.get("dim"))
        except KeyError as exc:
            raise ConfigError(f"[grid] is missing {exc.args[0]!r}") from None

    def field(self):
        """Field under test: a snapshot if given, else the [field] initial data."""
        sec = self.section("field")
        snap = self.snapshot or sec.get("snapshot")
        if snap:
            return io.read_snapshot(snap)
        if "init" not in sec:
            raise ConfigError("need --snapshot, [field].snapshot or [field].init")
        return initial_field(self.grid(), sec["init"], sec.get("boundary_data"), sec.get("dim_u"),
                             sec.get("boundary", DIRICHLET))

    def report(self, name: str, body: dict, passed: bool, tolerances: dict) -> dict:
        rep = {
            "command": name,
            "passed": bool(passed),
            "tolerances": tolerances,
            "provenance": {"config_hash": self.hash, "seed": self.seed, "version": __version__},
            **body,
        }
        io.write_json(self.out / f"{name.replace('-', '_')}_report.json", rep)
        return rep


# --------------------------------------------------------------------------
# subcommands


def cmd_solve(run: Run) -> dict:
    sec = run.section("solver")
    fsec = run.section("field")
    p = run.potential
    init = run.field()
    try:
        cfg = SolveConfig(
            p, init.grid, boundary=init.boundary, dt=sec.get("dt"), tol=sec.get("tol", 1e-8),
            max_iter=sec.get("max_iter", 100_000), eps=sec.get("eps", 1.0), seed=run.seed,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, StressEnergyError):
            raise
        raise ConfigError(str(exc)) from None
    res = relax(cfg, init, backend=sec.get("backend"))
    meta = res.metadata()
    meta["potential"] = p.name
    meta["init"] = fsec.get("init")
    meta["config_hash"] = run.hash
    io.write_field(run.out / "solution", res.field, meta)
    io.write_csv(run.out / "residual_history.csv", {
        "iteration": np.arange(len(res.residual_history)),
        "residual": res.residual_history,
        "energy": res.energy_history,
    })
    body = {"solve": meta, "snapshot": "solution.bin"}
    return run.report("solve", body, res.converged, {"tol": cfg.tol, "energy_rtol": cfg.energy_rtol})


def cmd_verify_tensor(run: Run) -> dict:
    sec = run.section("verify")
    p = run.potential
    atol = float(sec.get("atol", 1e-12))
    threshold = float(sec.get("threshold", 1.8))
    fsec = run.section("field")
    hs = sec.get("h")
    checks = {}
    if hs and not (run.snapshot or fsec.get("snapshot")):
        if "init" not in fsec:
            raise ConfigError("a refinement study needs [field].init")
        boundary = fsec.get("boundary", DIRICHLET)

        def field_at(h):
            return manufactured_field(fsec["init"], run.grid(h), boundary, dim_u=fsec.get("dim_u"))

        conv = verify_divergence_identity(field_at, p, hs, threshold=threshold)
        checks["divergence"] = conv.as_dict()
        fields = [field_at(h) for h in hs]
    else:
        f = run.field()
        if not hasattr(f, "dim_u"):
            raise ConfigError("verify-tensor needs a vector-field snapshot")
        conv = verify_divergence_identity(f, p)
        # Without refinement the identity error is an O(h^2) truncation
        # figure, so it is reported but does not decide the verdict.
        checks["divergence"] = conv.as_dict()
        checks["divergence"]["equation_residual"] = residual(f, p)
        checks["divergence"]["informational"] = True
        checks["divergence"]["passed"] = True
        fields = [f]
    trace_ok = psd_ok = True
    checks["trace"], checks["psd"] = [], []
    for f in fields:
        t = build_T(f, p)
        _, tr = trace_T(t, f, p, atol)
        ps = verify_psd_identity(t, f, p, atol)
        checks["trace"].append(tr.as_dict())
        checks["psd"].append(ps.as_dict())
        trace_ok &= tr.passed
        psd_ok &= ps.passed
    passed = bool(checks["divergence"]["passed"] and trace_ok and psd_ok)
    return run.report("verify-tensor", {"checks": checks}, passed, {"atol": atol, "order_threshold": threshold})


def _radii(run: Run, grid: Grid, x0) -> np.ndarray:
    sec = run.section("monotonicity")
    r = sec.get("radii")
    if r is None:
        return default_radii(grid, x0)
    if isinstance(r, dict):
        return geometric_radii(r["min"], r["max"], r.get("ratio", 2.0 ** 0.125))
    return np.asarray(r, float)


def _center(sec: dict, grid: Grid):
    c = sec.get("center")
    if c is None:
        return 0.5 * (np.asarray(grid.origin) + np.asarray(grid.upper))
    c = np.asarray(c, float)
    if c.shape != (grid.dim,):
        raise ConfigError(f"center must have {grid.dim} coordinates")
    return c


def cmd_monotonicity(run: Run) -> dict:
    sec = run.section("monotonicity")
    p = run.potential
    f = run.field()
    x0 = _center(sec, f.grid)
    radii = _radii(run, f.grid, x0)
    prof = ball_energy(f, p, x0, radii)
    n = f.grid.dim
    weak = check_weak_monotonicity(prof)
    strong = check_strong_monotonicity(prof)
    liou = liouville_consistency(f, p, x0, n=n, profile=prof)
    fits = {}
    if np.any(prof.energy > 0):
        fits["power"] = growth_rate(prof, "power").as_dict()
        fits["log"] = growth_rate(prof, "log").as_dict()
    io.write_csv(run.out / "ball_energy.csv", prof.as_columns())
    expect = sec.get("expect_strong")
    strong_ok = True if expect is None else (strong.passed == bool(expect))
    passed = weak.passed and strong_ok and liou.passed
    body = {
        "center": x0, "dim": n,
        "weak": weak.as_dict(), "strong": strong.as_dict(), "expect_strong": expect,
        "liouville": liou.as_dict(), "growth": fits,
    }
    return run.report("monotonicity", body, passed, {"quadrature": "per-radius refinement estimate"})


def cmd_modica(run: Run) -> dict:
    sec = run.section("modica")
    p = run.potential
    f = run.field()
    rep = check_modica_estimate(f, p, trace_tol=float(sec.get("trace_tol", 1e-10)))
    x0 = _center(sec, f.grid)
    r = np.linalg.norm(rep.coords - x0, axis=-1)
    body = {"modica": rep.as_dict()}
    shells = sec.get("r_min", [])
    body["violation_fraction_beyond"] = {str(float(s)): rep.violation_fraction_where(r >= s) for s in shells}
    if f.grid.dim <= 2:
        io.write_csv(run.out / "modica_slack.csv", {
            **{f"x{a + 1}": rep.coords[..., a].ravel() for a in range(f.grid.dim)},
            "slack": rep.slack.ravel(),
        })
    return run.report("modica", body, rep.trace_bound_holds, {"trace_tol": rep.trace_tol})


def _pairs(sec: dict, p) -> list[tuple[int, int]]:
    pairs = sec.get("pairs", "all")
    if pairs == "all":
        m = p.n_minima
        return [(i, j) for i in range(m) for j in range(i + 1, m)]
    return [tuple(int(v) for v in q) for q in pairs]


def cmd_connection(run: Run) -> dict:
    sec = run.section("connection")
    p = run.potential
    if p.continuum_minima:
        raise UnsupportedError(f"{p.name} has a continuum of minima; connections need isolated wells")
    L, h, tol = float(sec.get("L", 12.0)), float(sec.get("h", 0.01)), float(sec.get("tol", 1e-8))
    eq_tol = float(sec.get("equipartition_tol", 1e-4))
    tri_tol = float(sec.get("triangle_tol", 1e-8))
    pairs = _pairs(sec, p)

    def one(pair):
        return pair, solve_connection(p, pair[0], pair[1], L=L, h=h, tol=tol)

    if run.jobs > 1:
        with ThreadPoolExecutor(run.jobs) as pool:
            profiles = dict(pool.map(one, pairs))
    else:
        profiles = dict(map(one, pairs))
    rows, ok = [], True
    for (i, j) in pairs:
        prof = profiles[(i, j)]
        eq = check_equipartition(prof, p)
        ok &= eq.max_discrepancy <= eq_tol
        io.write_csv(run.out / f"connection_{i}_{j}.csv", prof.as_columns(p))
        rows.append({"i": i, "j": j, "sigma": prof.sigma, "sigma_error": prof.sigma_error,
                     "equipartition": eq.max_discrepancy, "residual": prof.residual,
                     "iterations": prof.iterations})
    io.write_rows(run.out / "sigma_table.csv", rows)
    body = {"connections": rows}
    if p.n_minima >= 3:
        combos = [(i, j) for i in range(p.n_minima) for j in range(i + 1, p.n_minima)]
        table = profiles if all(q in profiles for q in combos) else sigma_table(p, L=L, h=h, jobs=run.jobs, tol=tol)
        tri = check_triangle_inequality(p, L=L, h=h, tol=tri_tol, table=table)
        body["triangle"] = tri.as_dict()
        ok &= tri.passed
    return run.report("connection", body, ok, {"equipartition": eq_tol, "triangle": tri_tol, "solver_tol": tol})


def _interface(sec: dict) -> InterfaceSpec:
    kind = sec.get("interface", sec.get("kind", "plane"))
    if kind == "plane":
        return InterfaceSpec.plane(int(sec.get("dim", 2)), sec.get("normal"), float(sec.get("offset", 0.0)))
    if kind == "catenoid":
        return InterfaceSpec.catenoid(float(sec.get("waist", 1.0)))
    raise ConfigError(f"unknown interface kind {kind!r}")


def cmd_limit(run: Run) -> dict:
    sec = run.section("limit", required=True)
    p = run.potential
    spec = _interface(sec)
    pair = sec.get("pair", [0, 1])
    if p.continuum_minima:
        raise UnsupportedError(f"{p.name} has no isolated minima to connect")
    conn = solve_connection(p, int(pair[0]), int(pair[1]), L=float(sec.get("L", 12.0)), h=float(sec.get("h", 0.01)))
    phis = [
        TestFunction(tuple(float(c) for c in b.get("center", [0.0] * spec.dim)), float(b.get("radius", 1.0)),
                     int(b.get("exponent", 3)), b.get("name", f"phi{k}"))
        for k, b in enumerate(sec.get("phi", [{}]))
    ]
    threshold = float(sec.get("order_threshold", 0.8))
    zero_factor = float(sec.get("zero_factor", 10.0))
    rep = verify_limit_tensor(spec, conn, p, sec.get("eps", [0.4, 0.2, 0.1]), phis,
                              cells_per_eps=float(sec.get("cells_per_eps", 10.0)),
                              order_threshold=threshold, zero_factor=zero_factor)
    io.write_rows(run.out / "limit.csv", [r.as_dict() for r in rep.rows])
    table = rep.order_table()
    io.write_rows(run.out / "limit_orders.csv", [
        {"phi": t["phi"], "entry": t["entry"], "step": k, "order": o}
        for t in table for k, o in enumerate(t["orders"])
    ])
    body = {
        "sigma": conn.sigma, "orders": table,
        "zero_checks": {f"{k[0]}:{k[1][0] + 1}{k[1][1] + 1}": v for k, v in sorted(rep.zero_checks.items())},
        "projection": rep.projection.as_dict(), "notes": rep.notes,
    }
    return run.report("limit", body, rep.passed,
                      {"order_threshold": threshold, "zero_factor": zero_factor, "projection": rep.projection.tol})


def cmd_surface(run: Run) -> dict:
    sec = run.section("surface", required=True)
    spec = _interface({"dim": 3, **sec})
    center = np.asarray(sec.get("center", [0.0] * spec.dim), float)
    r = sec.get("radii", {"min": 0.25, "max": 2.0})
    radii = geometric_radii(r["min"], r["max"], r.get("ratio", 2.0 ** 0.25)) if isinstance(r, dict) else np.asarray(r, float)
    res = int(sec.get("resolution", 64))
    prof = surface_ball_area(spec, center, radii, resolution=res)
    mono = check_surface_monotonicity(prof)
    io.write_csv(run.out / "surface_area.csv", prof.as_columns())
    if sec.get("write_mesh", False):
        io.atomic_write(run.out / "surface.obj", surface_mesh(spec, center, 1.05 * radii.max(), res).to_obj())
    body = {"kind": spec.kind, "center": center, "monotonicity": mono.as_dict(),
            "max_refinement_change": float(np.max(prof.error / prof.area))}
    return run.report("surface", body, mono.passed, {"quadrature": "fine minus coarse mesh area"})


HANDLERS = {
    "solve": cmd_solve,
    "verify-tensor": cmd_verify_tensor,
    "monotonicity": cmd_monotonicity,
    "modica": cmd_modica,
    "connection": cmd_connection,
    "limit": cmd_limit,
    "surface": cmd_surface,
}
SECTION_OF = {"verify-tensor": "verify", "monotonicity": "monotonicity", "modica": "modica",
              "connection": "connection", "limit": "limit", "surface": "surface"}


def cmd_report_all(run: Run) -> dict:
    """Solve (if [solver] is present) and run every check whose table is present."""
    results = {}
    if "solver" in run.config:
        sub = Run(run.config, run.out / "solve", run.jobs, run.seed, run.snapshot)
        results["solve"] = _status(cmd_solve, sub)
        if results["solve"]["exit"] == EXIT_OK:
            run.snapshot = str(run.out / "solve" / "solution.bin")
    todo = [c for c, s in SECTION_OF.items() if s in run.config]

    def go(name):
        sub = Run(run.config, run.out / name.replace("-", "_"), 1, run.seed, run.snapshot)
        return name, _status(HANDLERS[name], sub)

    if run.jobs > 1:
        with ThreadPoolExecutor(run.jobs) as pool:
            results.update(dict(pool.map(go, todo)))
    else:
        results.update(dict(map(go, todo)))
    codes = [r["exit"] for r in results.values()]
    worst = max(codes, default=EXIT_OK)
    body = {"checks": {k: results[k] for k in sorted(results)}, "exit": worst}
    return run.report("report-all", body, worst == EXIT_OK, {})


def _status(handler, run: Run) -> dict:
    try:
        rep = handler(run)
        return {"exit": EXIT_OK if rep["passed"] else EXIT_FAIL}
    except Exception as exc:  # noqa: BLE001 - mapped to an exit code below
        return {"exit": exit_code_for(exc), "error": f"{type(exc).__name__}: {exc}"}


HANDLERS["report-all"] = cmd_report_all


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, DivergenceError):
        return EXIT_DIVERGED
    if isinstance(exc, ConvergenceError):
        return EXIT_FAIL
    if isinstance(exc, (ConfigError, UnsupportedError, DomainError, ShapeError, tomllib.TOMLDecodeError,
                        FileNotFoundError, KeyError)):
        return EXIT_CONFIG
    raise exc


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stressenergy", description="Stress-energy tensor verification toolkit.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="TOML run file")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--jobs", type=int, default=1, help="worker threads for independent checks")
        sp.add_argument("--seed", type=int, default=0, help="seed for randomized sampling")
        sp.add_argument("--snapshot", default=None, help="field snapshot (.bin with .json sidecar)")
    return ap


def _setup_log(out: Path) -> logging.Handler:
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    return handler


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    handler = _setup_log(out)
    try:
        log.info("start %s config=%s at %s", args.command, args.config, datetime.datetime.now().isoformat())
        try:
            run = Run(load_config(args.config), out, args.jobs, args.seed, args.snapshot)
            rep = HANDLERS[args.command](run)
            code = EXIT_OK if rep["passed"] else EXIT_FAIL
            print(f"{args.command}: {'pass' if code == EXIT_OK else 'fail'}")
        except Exception as exc:  # noqa: BLE001
            code = exit_code_for(exc)
            print(f"{args.command}: error: {exc}", file=sys.stderr)
            log.error("%s: %s", type(exc).__name__, exc)
        log.info("exit %d", code)
        return code
    finally:
        log.removeHandler(handler)
        handler.close()


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
