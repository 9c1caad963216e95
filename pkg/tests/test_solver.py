import numpy as np
import pytest

from stressenergy import solver
from stressenergy.errors import ConfigError, DivergenceError, ShapeError
from stressenergy.grid import PERIODIC, Grid, GridField, manufactured_field
from stressenergy.kernels import BACKEND
from stressenergy.potential import double_well, ginzburg_landau, zero
from stressenergy.problems import front_setup, initial_field
from stressenergy.solver import SolveConfig, discrete_energy, relax, residual, stable_dt


def test_constant_minimum_is_fixed_point(dw2):
    g = Grid.box(-1, 1, 0.1, 2)
    f = manufactured_field("constant:(1,0)", g)
    res = relax(SolveConfig(dw2, g, tol=1e-12), f)
    assert res.converged
    assert res.iterations <= 1
    assert res.final_residual <= 1e-12
    assert residual(res.field, dw2) <= 1e-12


def test_residual_examples(dw2):
    g = Grid.box(-1, 1, 0.1, 2)
    assert residual(manufactured_field("linear", g), zero(2)) <= 1e-12
    errs = []
    for h in (0.1, 0.05, 0.025):
        f = manufactured_field("front", Grid.box(-4, 4, h, 2))
        errs.append(residual(f, dw2))
    errs = np.array(errs)
    assert np.log2(errs[:-1] / errs[1:]).min() >= 1.8


def test_scaled_residual(dw2):
    eps = 0.5
    f = manufactured_field("front", Grid.box(-3, 3, 0.01, 2), eps=eps)
    assert residual(f, dw2, eps=eps) < 1e-3
    assert residual(f, dw2) > 0.1


def test_front_1d_matches_tanh():
    cfg, init = front_setup(1, 10.0, 0.05)
    res = relax(cfg, init)
    assert res.converged
    assert res.energy_monotone
    x = res.field.coordinates()[..., 0]
    near = np.abs(x) <= 5.0
    err = np.abs(res.field.values[near, 0] - np.tanh(x[near] / np.sqrt(2))).max()
    assert err <= 1e-3


def test_energy_decreases_monotonically():
    cfg, init = front_setup(1, 10.0, 0.1, tol=1e-6)
    res = relax(cfg, init)
    dE = np.diff(res.energy_history)
    assert np.all(dE <= 1e-10 * np.abs(res.energy_history[:-1]))
    assert res.energy_history[-1] < res.energy_history[0]
    assert discrete_energy(res.field, cfg.potential) == pytest.approx(res.energy_history[-1], rel=1e-6)


def test_relax_is_deterministic():
    cfg, init = front_setup(1, 5.0, 0.1, tol=1e-6)
    a = relax(cfg, init)
    b = relax(cfg, init)
    assert np.array_equal(a.field.values, b.field.values)
    assert np.array_equal(a.residual_history, b.residual_history)


def test_periodic_relaxation_flattens(dw1):
    n = 32
    g = Grid(1, (0.0,), (2 * np.pi / n,), (n,))
    x = g.coordinates(PERIODIC)[..., 0]
    init = GridField(g, (0.8 + 0.1 * np.sin(x))[:, None], PERIODIC)
    res = relax(SolveConfig(dw1, g, boundary=PERIODIC, tol=1e-10), init)
    assert res.converged
    assert np.allclose(res.field.values, 1.0, atol=1e-9)


def test_unstable_dt_is_config_error(gl):
    g = Grid.box(-1, 1, 0.1, 2)
    init = manufactured_field("vortex", g)
    with pytest.raises(ConfigError, match="stability"):
        relax(SolveConfig(gl, g, dt=1.0), init)


def test_bad_config_values(gl):
    g = Grid.box(-1, 1, 0.1, 2)
    for kw in ({"tol": 0.0}, {"dt": -1.0}, {"eps": 0.0}, {"boundary": "neumann"}):
        with pytest.raises(ConfigError):
            SolveConfig(gl, g, **kw)


def test_mismatched_init(gl):
    g = Grid.box(-1, 1, 0.1, 2)
    other = Grid.box(-1, 1, 0.05, 2)
    with pytest.raises(ShapeError):
        relax(SolveConfig(gl, g), manufactured_field("vortex", other))
    with pytest.raises(ShapeError):
        relax(SolveConfig(gl, g), manufactured_field("linear", g, dim_u=3))


def test_divergence_reports_last_stable_iterate(gl, monkeypatch):
    g = Grid.box(-1, 1, 0.1, 2)
    init = manufactured_field("vortex", g)
    monkeypatch.setattr(solver, "stable_dt", lambda *a, **k: 10.0)
    with pytest.raises(DivergenceError) as info:
        relax(SolveConfig(gl, g, max_iter=10_000), init)
    assert info.value.iteration < 10_000


def test_iteration_cap_reports_unconverged(gl):
    g = Grid.box(-2, 2, 0.1, 2)
    init = manufactured_field("vortex", g)
    res = relax(SolveConfig(gl, g, max_iter=5, tol=1e-12), init)
    assert not res.converged
    assert res.iterations == 5


def test_stable_dt_formula(dw1):
    g = Grid.box(-1, 1, 0.1, 1)
    # W'' of the double well on [-1, 1] ranges over [-1, 2]
    dt = stable_dt(g, dw1, [-1.0], [1.0])
    assert dt == pytest.approx(0.9 * 2.0 / (4.0 / 0.01 + 2.0), rel=1e-12)


def test_vortex_symmetry_zero(vortex):
    f = vortex.field
    x = f.coordinates()
    k = np.unravel_index(np.argmin(np.hypot(x[..., 0], x[..., 1])), x.shape[:-1])
    assert np.allclose(x[k], 0.0)
    assert np.linalg.norm(f.values[k]) <= 1e-2
    assert vortex.energy_monotone
    assert vortex.final_residual <= 1e-7


def test_backend_recorded(vortex):
    assert vortex.backend == BACKEND
