"""Acceptance criteria for the package, one test per criterion.

Each test records a ``PASS`` or ``FAIL`` line with the measured quantity and
its wall time. The lines are printed directly and repeated in the terminal
summary under "acceptance criteria".
"""
import time

import numpy as np
import pytest

from stressenergy.connection import (
    check_triangle_inequality,
    equipartition_study,
    sigma_table,
    solve_connection,
)
from stressenergy.grid import Grid, GridField, manufactured_field
from stressenergy.monotonicity import (
    BallEnergyProfile,
    ball_energy,
    check_modica_estimate,
    check_ratio_monotonicity,
    check_strong_monotonicity,
    check_weak_monotonicity,
    geometric_radii,
    growth_rate,
    log_lower_bound_margins,
)
from stressenergy.potential import double_well, ginzburg_landau, triple_well, zero
from stressenergy.sharp_interface import (
    InterfaceSpec,
    TestFunction,
    check_surface_monotonicity,
    surface_ball_area,
    verify_limit_tensor,
)
from stressenergy.tensor import build_T, trace_T, verify_divergence_identity, verify_psd_identity

SIGMA_DW = 2.0 * np.sqrt(2.0) / 3.0


def record(log, number, ok, detail, seconds, limit):
    """Print and keep one verdict line; the wall-time limit is part of the verdict."""
    ok = bool(ok) and seconds < limit
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail} [{seconds:.2f} s, limit {limit:g} s]"
    print(line)
    log.append(line)
    return ok


def test_criterion_01_divergence_identity(acceptance_log):
    t0 = time.perf_counter()
    orders = {}
    for pname, p in (("GL", ginzburg_landau()), ("double well", double_well(2))):
        rep = verify_divergence_identity(lambda h: manufactured_field("trig", Grid.box(-1, 1, h, 2)),
                                         p, [0.04, 0.02, 0.01])
        orders[pname] = rep.min_order
    dt = time.perf_counter() - t0
    ok = min(orders.values()) >= 1.8
    detail = ", ".join(f"{k} order {v:.3f}" for k, v in orders.items()) + " (need >= 1.8)"
    assert record(acceptance_log, 1, ok, detail, dt, 30)


def _test_fields():
    g2 = Grid.box(-1, 1, 0.05, 2)
    # shifted so no node sits on the origin, where x/|x| is undefined
    g2s = Grid(2, (-1.025, -1.025), (0.05, 0.05), (41, 41))
    g3 = Grid.box(-1, 1, 0.1, 3)
    fields = [manufactured_field(name, g2) for name in
              ("constant:(1,0)", "linear", "identity", "quadratic", "trig", "front", "vortex")]
    fields.append(manufactured_field("hedgehog", g2s))
    fields += [manufactured_field(name, g3) for name in ("constant:(1,0,0)", "linear", "identity", "trig", "front")]
    rng = np.random.default_rng(7)
    fields.append(GridField(g2, rng.normal(size=g2.node_shape() + (2,))))
    return fields


def test_criterion_02_algebraic_identities(acceptance_log, vortex):
    t0 = time.perf_counter()
    fields = _test_fields() + [vortex.field]
    worst_trace = worst_psd = worst_n2 = 0.0
    ok = True
    count = 0
    for f in fields:
        n = f.grid.dim
        pots = [double_well(n), zero(n)] + ([ginzburg_landau(), triple_well()] if n == 2 else [])
        for p in pots:
            t = build_T(f, p)
            tr, trep = trace_T(t, f, p)
            prep = verify_psd_identity(t, f, p)
            ok &= trep.passed and prep.passed
            worst_trace = max(worst_trace, trep.max_formula_error / trep.tol)
            worst_psd = max(worst_psd, prep.max_identity_error / prep.tol)
            if n == 2:
                n2 = np.abs(tr + 2.0 * p.W(f.values)).max()
                worst_n2 = max(worst_n2, n2 / trep.tol)
                ok &= n2 <= trep.tol
            count += 1
    dt = time.perf_counter() - t0
    # tolerances are 1e-12 times max(1, largest energy density) of each field
    detail = (f"{count} field/potential pairs; worst error/tolerance: trace {worst_trace:.1e}, "
              f"PSD {worst_psd:.1e}, tr T + 2W {worst_n2:.1e} (need <= 1, tolerance 1e-12 relative)")
    assert record(acceptance_log, 2, ok, detail, dt, 10)


def test_criterion_03_connection_oracle(acceptance_log):
    t0 = time.perf_counter()
    p = double_well(1)
    conn = solve_connection(p, 0, 1, L=12.0, h=0.01)
    err = abs(conn.sigma - SIGMA_DW)
    rep = equipartition_study(p, 0, 1, 10.0, [0.04, 0.02, 0.01])
    dt = time.perf_counter() - t0
    ok = err <= 1e-4 and rep.passed and rep.min_order >= 1.8
    detail = (f"sigma {conn.sigma:.7f} vs {SIGMA_DW:.7f} (error {err:.1e}, need <= 1e-4); "
              f"equipartition order {rep.min_order:.3f} (need >= 1.8)")
    assert record(acceptance_log, 3, ok, detail, dt, 20)


def test_criterion_04_triangle_inequality(acceptance_log):
    t0 = time.perf_counter()
    p = triple_well()
    table = sigma_table(p, L=8.0, h=0.01)
    rep = check_triangle_inequality(p, table=table, tol=1e-8)
    s = np.array([v.sigma for v in table.values()])
    spread = s.max() - s.min()
    dt = time.perf_counter() - t0
    ok = rep.passed and min(rep.slack.values()) >= -1e-8 and spread <= 1e-6
    detail = (f"min slack {min(rep.slack.values()):.6f} (need >= -1e-8); "
              f"sigma spread {spread:.1e} (need <= 1e-6)")
    assert record(acceptance_log, 4, ok, detail, dt, 60)


@pytest.fixture(scope="module")
def vortex_profile(vortex_timed, gl):
    res, solve_seconds = vortex_timed
    t0 = time.perf_counter()
    prof = ball_energy(res.field, gl, [0.0, 0.0], geometric_radii(0.5, 6.0))
    return prof, solve_seconds + time.perf_counter() - t0


def test_criterion_05_weak_monotonicity_vortex(acceptance_log, vortex_profile):
    prof, shared = vortex_profile
    t0 = time.perf_counter()
    rep = check_weak_monotonicity(prof)
    dt = shared + time.perf_counter() - t0
    worst = min((np.diff(rep.ratios) + rep.tolerances[:-1] + rep.tolerances[1:]).min(), np.inf)
    detail = (f"{len(prof.radii)} radii in [{prof.radii[0]:.2f}, {prof.radii[-1]:.2f}], "
              f"{len(rep.violations)} violations, worst step less tolerance {worst:.2e} (need >= 0)")
    assert record(acceptance_log, 5, rep.passed, detail, dt, 300)


def test_criterion_06_strong_failure_vortex(acceptance_log, vortex_profile, vortex, gl):
    prof, shared = vortex_profile
    t0 = time.perf_counter()
    strong = check_strong_monotonicity(prof)
    mod = check_modica_estimate(vortex.field, gl)
    r = np.hypot(mod.coords[..., 0], mod.coords[..., 1])
    frac = mod.violation_fraction_where(r >= 4.0)
    dt = shared + time.perf_counter() - t0
    biggest = max((v[1] for v in strong.violations), default=0.0)
    ok = (not strong.passed) and frac >= 0.1
    detail = (f"{len(strong.violations)} strong violations (largest {biggest:.2e}, need at least one); "
              f"negative slack on {100 * frac:.1f}% of nodes with r >= 4 (need >= 10%)")
    assert record(acceptance_log, 6, ok, detail, dt, 300)


def test_criterion_07_front_strong_and_modica(acceptance_log):
    t0 = time.perf_counter()
    p = double_well(2)
    f = manufactured_field("front", Grid.box(-6, 6, 0.05, 2))
    prof = ball_energy(f, p, [0.0, 0.0])
    strong = check_strong_monotonicity(prof)
    hs = [0.1, 0.05, 0.025]
    errs = np.array([np.abs(check_modica_estimate(manufactured_field("front", Grid.box(-4, 4, h, 2)), p).slack).max()
                     for h in hs])
    order = np.log2(errs[:-1] / errs[1:]).min()
    dt = time.perf_counter() - t0
    ok = strong.passed and order >= 1.8
    detail = (f"strong ratio {len(strong.violations)} violations; max |slack| {errs[-1]:.2e} at h = 0.025, "
              f"order {order:.3f} (need >= 1.8)")
    assert record(acceptance_log, 7, ok, detail, dt, 60)


def test_criterion_08_vortex_growth_law(acceptance_log, vortex_profile):
    prof, shared = vortex_profile
    t0 = time.perf_counter()
    fit = growth_rate(prof, "log")
    margins = log_lower_bound_margins(prof)
    worst = min(m for _, _, m in margins)
    dt = shared + time.perf_counter() - t0
    rel = abs(fit.rate - np.pi) / np.pi
    ok = rel <= 0.15 and worst >= 0
    detail = (f"log coefficient {fit.rate:.4f} vs pi ({100 * rel:.1f}% off, need <= 15%); "
              f"{len(margins)} radius pairs, worst margin {worst:.3e} (need >= 0)")
    assert record(acceptance_log, 8, ok, detail, dt, 300)


def test_criterion_09_limit_tensor(acceptance_log):
    t0 = time.perf_counter()
    p = double_well(2)
    conn = solve_connection(p, 0, 1, L=12.0, h=0.01)
    phi = TestFunction((0.0, 0.0), 1.0, 3, "bump")
    rep = verify_limit_tensor(InterfaceSpec.plane(2), conn, p, [0.4, 0.2, 0.1], [phi], cells_per_eps=10,
                              order_threshold=0.8, zero_factor=10)
    dt = time.perf_counter() - t0
    order = min(rep.orders[("bump", (1, 1))])
    errs = [r.error for r in rep.rows if r.entry == (1, 1)]
    zero_ok = all(rep.zero_checks.values())
    pr = rep.projection
    proj = max(pr.tangential_idempotence, pr.tangential_annihilation, pr.normal_idempotence, pr.normal_fixes_grad)
    ok = order >= 0.8 and zero_ok and pr.passed and proj <= 1e-12
    detail = (f"(2,2) errors {', '.join(f'{e:.2e}' for e in errs)}, order {order:.3f} (need >= 0.8); "
              f"zero entries {'within' if zero_ok else 'outside'} 10x quadrature tolerance; "
              f"projection defect {proj:.1e} (need <= 1e-12)")
    assert record(acceptance_log, 9, ok, detail, dt, 180)


def test_criterion_10_surface_monotonicity(acceptance_log):
    t0 = time.perf_counter()
    R = np.geomspace(0.35, 2.0, 10)
    plane = surface_ball_area(InterfaceSpec.plane(3, [0, 0, 1]), [0.0, 0.0, 0.0], R, resolution=16)
    plane_err = np.abs(plane.ratios(2) / np.pi - 1).max()
    q = 0.3
    off = surface_ball_area(InterfaceSpec.plane(3, [0, 0, 1], q), [0.0, 0.0, 0.0], R, resolution=16)
    off_err = np.abs(off.ratios(2) / (np.pi * (1 - q**2 / R**2)) - 1).max()
    cat = surface_ball_area(InterfaceSpec.catenoid(1.0), [1.0, 0.0, 0.0], np.geomspace(0.25, 1.5, 10),
                            resolution=32)
    cat_mono = check_surface_monotonicity(cat).passed
    cat_ref = (cat.error / cat.area).max()
    dt = time.perf_counter() - t0
    ok = plane_err <= 1e-6 and off_err <= 1e-3 and cat_mono and cat_ref <= 1e-3
    detail = (f"plane rel error {plane_err:.1e} (need <= 1e-6); offset plane {off_err:.1e} (need <= 1e-3); "
              f"catenoid {'monotone' if cat_mono else 'not monotone'}, refinement change {cat_ref:.1e} "
              f"(need <= 1e-3)")
    assert record(acceptance_log, 10, ok, detail, dt, 60)


def _decreasing_case(rng):
    k = int(rng.integers(4, 30))
    R = np.unique(rng.uniform(0.1, 10.0, k))
    tol = rng.uniform(0.0, 1e-3, R.size)
    ratio = np.cumsum(rng.uniform(0, 1, R.size))
    j = int(rng.integers(0, R.size - 1))
    ratio[j + 1:] -= ratio[j + 1] - ratio[j] + tol[j] + tol[j + 1] + rng.uniform(1e-6, 1.0)
    return R, ratio, tol


def _nondecreasing_case(rng):
    k = int(rng.integers(4, 30))
    R = np.unique(rng.uniform(0.1, 10.0, k))
    tol = rng.uniform(0.0, 1e-3, R.size)
    steps = rng.uniform(-1, 1, R.size - 1)
    steps = np.where(steps < 0, steps * 0.99 * (tol[:-1] + tol[1:]), steps)
    return R, np.concatenate([[1.0], 1.0 + np.cumsum(steps)]), tol


def test_criterion_11_detector_soundness(acceptance_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    missed = false_alarms = 0
    for _ in range(100):
        for make, want in ((_decreasing_case, False), (_nondecreasing_case, True)):
            R, ratio, tol = make(rng)
            ex = float(rng.uniform(0, 2))
            prof = BallEnergyProfile(np.zeros(2), R, ratio * R**ex, tol * R**ex, 2)
            got = check_ratio_monotonicity(prof, ex).passed
            if got != want:
                if want:
                    false_alarms += 1
                else:
                    missed += 1
    dt = time.perf_counter() - t0
    ok = missed == 0 and false_alarms == 0
    detail = f"100 decreasing cases, {missed} missed; 100 non-decreasing cases, {false_alarms} false alarms"
    assert record(acceptance_log, 11, ok, detail, dt, 5)
