import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stressenergy.errors import DomainError, ShapeError
from stressenergy.grid import (
    PERIODIC,
    Grid,
    GridField,
    energy_density,
    gradient,
    gradient_sq,
    interior,
    laplacian,
    manufactured_field,
    vortex_profile,
)
from stressenergy.potential import double_well, ginzburg_landau, triple_well, zero


def box(h=0.1, dim=2, lo=-1.0, hi=1.0):
    return Grid.box(lo, hi, h, dim)


def test_grid_validation():
    with pytest.raises(ShapeError):
        Grid(2, (0.0, 0.0), (0.1, 0.1), (3, 10))
    with pytest.raises(ShapeError):
        Grid(4, (0.0,) * 4, (0.1,) * 4, (4,) * 4)
    with pytest.raises((ShapeError, DomainError)):
        Grid(1, (0.0,), (-0.1,), (10,))


def test_field_rejects_nonfinite():
    g = box()
    v = np.zeros(g.node_shape() + (2,))
    v[3, 3, 0] = np.nan
    with pytest.raises(DomainError):
        GridField(g, v)


def test_gradient_constant_and_linear():
    g = box()
    c = manufactured_field("constant:(1,0)", g)
    assert np.all(c.values == [1.0, 0.0])
    assert np.abs(gradient(c)).max() == 0.0
    J = gradient(manufactured_field("linear", g))
    assert np.allclose(J[interior(2)], [[1.0, 0.0], [0.0, 0.0]], atol=1e-12, rtol=0)
    # second-order one-sided closures are exact on linears too
    assert np.allclose(J, [[1.0, 0.0], [0.0, 0.0]], atol=1e-12, rtol=0)


def test_laplacian_exact_on_quadratics():
    for dim in (1, 2, 3):
        g = box(0.125, dim)
        f = manufactured_field("quadratic", g)
        L = laplacian(f)
        assert np.allclose(L, 2.0 * dim, atol=1e-9, rtol=0)
        assert np.abs(laplacian(manufactured_field("linear", g))).max() <= 1e-9


def _trig_errors(hs, periodic=False):
    gerr, lerr = [], []
    for h in hs:
        if periodic:
            n = int(round(2 * np.pi / h))
            g = Grid(2, (0.0, 0.0), (2 * np.pi / n,) * 2, (n, n))
            f = manufactured_field("trig", g, PERIODIC)
        else:
            g = box(h, 2)
            f = manufactured_field("trig", g)
        x = f.coordinates()
        J = gradient(f)
        Jex = np.zeros_like(J)
        Jex[..., 0, 0] = np.cos(x[..., 0])
        Jex[..., 1, 1] = -np.sin(x[..., 1])
        gerr.append(np.abs(J - Jex).max())
        Lex = np.stack([-np.sin(x[..., 0]), -np.cos(x[..., 1])], axis=-1)
        lerr.append(np.abs(laplacian(f) - Lex).max())
    return np.array(gerr), np.array(lerr)


@pytest.mark.parametrize("periodic", [False, True])
def test_trig_derivative_orders(periodic):
    hs = [0.08, 0.04, 0.02] if not periodic else [2 * np.pi / 64, 2 * np.pi / 128, 2 * np.pi / 256]
    ge, le = _trig_errors(hs, periodic)
    go = np.log2(ge[:-1] / ge[1:])
    lo = np.log2(le[:-1] / le[1:])
    assert go.min() >= 1.8
    assert lo.min() >= 1.8


def test_periodic_wraps():
    n = 16
    g = Grid(1, (0.0,), (2 * np.pi / n,), (n,))
    f = manufactured_field("trig", g, PERIODIC)
    assert f.values.shape == (n, 1)
    J = gradient(f)
    # centered difference of sin at x=0 uses the wrapped node
    assert J[0, 0, 0] == pytest.approx(np.sin(g.spacing[0]) / g.spacing[0], rel=1e-12)


def test_energy_density_cases():
    g = box()
    assert np.abs(energy_density(manufactured_field("constant:(1,0)", g), double_well(2))).max() == 0.0
    assert np.allclose(energy_density(manufactured_field("linear", g), zero(2)), 0.5, atol=1e-12)


def test_energy_density_front_equipartition():
    errs = []
    for h in (0.1, 0.05, 0.025):
        f = manufactured_field("front", Grid.box(-4, 4, h, 2))
        x1 = f.coordinates()[..., 0]
        e = energy_density(f, double_well(2))
        exact = 0.5 / np.cosh(x1 / np.sqrt(2)) ** 4
        errs.append(np.abs(e - exact).max())
    errs = np.array(errs)
    assert np.log2(errs[:-1] / errs[1:]).min() >= 1.8


def test_manufactured_examples():
    g = Grid.box(-2, 2, 0.1, 2)
    f = manufactured_field("front", g)
    mid = np.isclose(f.coordinates()[..., 0], 0.0)
    assert np.all(f.values[mid] == 0.0)
    assert vortex_profile(np.sqrt(2.0)) == pytest.approx(np.sqrt(2) / 2, rel=1e-15)
    v = manufactured_field("vortex", g)
    x = v.coordinates()
    r = np.hypot(x[..., 0], x[..., 1])
    assert np.allclose(np.linalg.norm(v.values, axis=-1), r / np.sqrt(r**2 + 2), atol=1e-14)
    with pytest.raises(ShapeError):
        manufactured_field("nope", g)
    with pytest.raises(DomainError):
        manufactured_field("hedgehog", g)


def test_values_are_read_only():
    f = manufactured_field("linear", box())
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 3.0


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_derivatives_commute_with_constant_shift(a, b):
    f = manufactured_field("trig", box(0.2))
    shifted = f.with_values(f.values + np.array([a, b]))
    assert np.allclose(gradient(shifted), gradient(f), atol=1e-11)
    assert np.allclose(laplacian(shifted), laplacian(f), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_energy_density_nonnegative(seed):
    rng = np.random.default_rng(seed)
    g = box(0.25)
    v = rng.normal(size=g.node_shape() + (2,))
    f = GridField(g, v)
    for p in (ginzburg_landau(), triple_well(), double_well(2)):
        assert energy_density(f, p).min() >= 0.0
    assert np.all(gradient_sq(gradient(f)) >= 0)
