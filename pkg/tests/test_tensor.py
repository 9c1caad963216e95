import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stressenergy.errors import DomainError, ShapeError
from stressenergy.grid import Grid, GridField, interior, manufactured_field
from stressenergy.potential import double_well, ginzburg_landau, triple_well, zero
from stressenergy.tensor import (
    TensorField,
    build_T,
    build_T_eps,
    degenerate_fraction,
    divergence_T,
    identity_residual,
    trace_T,
    verify_divergence_identity,
    verify_psd_identity,
)


def g2d(h=0.1):
    return Grid.box(-1, 1, h, 2)


def explicit_T(J, w):
    """Entries written out term by term, independently of the library assembly."""
    n = J.shape[-1]
    T = np.zeros(J.shape[:-2] + (n, n))
    col = [J[..., :, j] for j in range(n)]  # u_{x_j}
    for j in range(n):
        others = sum(np.sum(col[i] ** 2, axis=-1) for i in range(n) if i != j)
        T[..., j, j] = 0.5 * (np.sum(col[j] ** 2, axis=-1) - others - 2.0 * w)
        for k in range(n):
            if k != j:
                T[..., j, k] = np.sum(col[j] * col[k], axis=-1)
    return T


def test_constant_minimum_gives_zero(dw2):
    f = manufactured_field("constant:(1,0)", g2d())
    assert np.abs(build_T(f, dw2).values).max() == 0.0
    assert np.abs(build_T_eps(f, dw2, 0.3).values).max() == 0.0
    assert np.abs(divergence_T(build_T(f, dw2))).max() == 0.0


def test_linear_field_tensor():
    f = manufactured_field("linear", g2d())
    T = build_T(f, zero(2)).values
    assert np.allclose(T[interior(2)], [[0.5, 0.0], [0.0, -0.5]], atol=1e-12)


def test_identity_map_tensor_vanishes():
    f = manufactured_field("identity", g2d())
    assert np.abs(build_T(f, zero(2)).values).max() <= 1e-12


def test_matches_explicit_formula(rng):
    g = Grid.box(-1, 1, 0.2, 3)
    f = GridField(g, rng.normal(size=g.node_shape() + (3,)))
    from stressenergy.grid import gradient

    p = double_well(3)
    T = build_T(f, p).values
    assert np.allclose(T, explicit_T(gradient(f), p.W(f.values)), atol=1e-12)


def test_eps_one_reduces_and_weights(gl):
    f = manufactured_field("trig", g2d())
    T = build_T(f, gl).values
    assert np.array_equal(build_T_eps(f, gl, 1.0).values, T)
    eps = 0.25
    Te = build_T_eps(f, gl, eps).values
    from stressenergy.grid import gradient

    J = gradient(f)
    w = gl.W(f.values)
    grad_part = explicit_T(J, np.zeros_like(w))
    expected = eps * grad_part
    for j in range(2):
        expected[..., j, j] -= w / eps
    assert np.allclose(Te, expected, atol=1e-12)


def test_eps_front_first_entry_cancels(dw2):
    eps = 0.1
    g = Grid.box(-1, 1, eps / 40, 2)
    f = manufactured_field("front", g, eps=eps)
    Te = build_T_eps(f, dw2, eps).values
    scale = np.abs(Te[..., 1, 1]).max()
    assert np.abs(Te[interior(2)][..., 0, 0]).max() <= 1e-3 * scale


def test_eps_must_be_positive(gl):
    f = manufactured_field("trig", g2d())
    with pytest.raises(DomainError):
        build_T_eps(f, gl, 0.0)
    with pytest.raises(DomainError):
        build_T_eps(f, gl, -1.0)


def test_shape_mismatch():
    g = Grid.box(-1, 1, 0.1, 1)
    with pytest.raises(ShapeError):
        build_T(manufactured_field("trig", g, dim_u=2), zero(2))
    with pytest.raises(ShapeError):
        build_T(manufactured_field("trig", g2d()), double_well(3))


def test_asymmetric_tensor_rejected():
    g = g2d()
    v = np.zeros(g.node_shape() + (2, 2))
    v[..., 0, 1] = 1.0
    with pytest.raises(ShapeError):
        TensorField(g, v)


def test_divergence_trig_point_value():
    # node exactly at (pi/4, pi/4); (grad u)^T Lap u = (-1/2, 1/2) there
    errs = []
    for N in (32, 64, 128):
        h = 2.0 / N
        c = np.pi / 4
        g = Grid(2, (c - 1.0, c - 1.0), (h, h), (N, N))
        f = manufactured_field("trig", g)
        d = divergence_T(build_T(f, zero(2)))
        k = N // 2
        assert np.allclose(f.coordinates()[k, k], [c, c], atol=1e-14)
        errs.append(np.abs(d[k, k] - [-0.5, 0.5]).max())
    errs = np.array(errs)
    assert np.log2(errs[:-1] / errs[1:]).min() >= 1.8


def test_divergence_identity_linear_vanishes():
    rep = verify_divergence_identity(lambda h: manufactured_field("linear", Grid.box(-1, 1, h, 2)),
                                     zero(2), [0.1, 0.05])
    assert rep.vanished and rep.passed


@pytest.mark.parametrize("pot,name", [(ginzburg_landau(), "trig"), (double_well(2), "trig"),
                                      (double_well(2), "front")])
def test_divergence_identity_orders(pot, name):
    rep = verify_divergence_identity(lambda h: manufactured_field(name, Grid.box(-1, 1, h, 2)),
                                     pot, [0.04, 0.02, 0.01])
    assert rep.passed, rep.as_dict()
    assert rep.min_order >= 1.8


def test_divergence_identity_on_periodic_field(gl):
    def at(h):
        n = int(round(2 * np.pi / h))
        g = Grid(2, (0.0, 0.0), (2 * np.pi / n,) * 2, (n, n))
        return manufactured_field("trig", g, "periodic")

    rep = verify_divergence_identity(at, gl, [2 * np.pi / 32, 2 * np.pi / 64, 2 * np.pi / 128])
    assert rep.passed


def test_single_field_without_refinement(gl):
    f = manufactured_field("trig", g2d(0.05))
    rep = verify_divergence_identity(f, gl)
    assert len(rep.errors) == 1
    assert not rep.passed
    with pytest.raises(ShapeError):
        verify_divergence_identity(f, gl, [0.1, 0.05])


def test_trace_linear_and_3d_constant():
    f = manufactured_field("linear", g2d())
    tr, rep = trace_T(build_T(f, zero(2)), f, zero(2))
    assert rep.passed
    assert np.abs(tr).max() <= 1e-12
    g3 = Grid.box(-1, 1, 0.25, 3)
    c = manufactured_field("constant:(1,0,0)", g3)
    p = double_well(3)
    tr, rep = trace_T(build_T(c, p), c, p)
    assert rep.passed and np.abs(tr).max() == 0.0


def test_psd_linear_field():
    f = manufactured_field("linear", g2d())
    t = build_T(f, zero(2))
    rep = verify_psd_identity(t, f, zero(2))
    assert rep.passed
    M = t.values[5, 5] + 0.5 * np.eye(2)
    assert np.allclose(M, [[1, 0], [0, 0]], atol=1e-12)
    assert np.allclose(np.linalg.eigvalsh(M), [0, 1], atol=1e-12)


def test_psd_rejects_scaled_tensor(gl):
    f = manufactured_field("trig", g2d())
    with pytest.raises(DomainError):
        verify_psd_identity(build_T_eps(f, gl, 0.5), f, gl)


def test_degenerate_fraction():
    assert degenerate_fraction(manufactured_field("identity", g2d())) == 0.0
    assert degenerate_fraction(manufactured_field("linear", g2d())) == 1.0


def test_identity_residual_shape(gl):
    f = manufactured_field("trig", g2d())
    r = identity_residual(f, gl)
    assert r.shape == (17, 17, 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([2, 3]))
def test_algebraic_identities_random_fields(seed, dim):
    rng = np.random.default_rng(seed)
    g = Grid.box(-1, 1, 0.4, dim)
    f = GridField(g, rng.normal(scale=2.0, size=g.node_shape() + (dim,)))
    pots = [double_well(dim), zero(dim)] + ([ginzburg_landau(), triple_well()] if dim == 2 else [])
    for p in pots:
        t = build_T(f, p)
        assert np.array_equal(t.values, np.swapaxes(t.values, -1, -2))
        _, rep = trace_T(t, f, p)
        assert rep.passed
        assert verify_psd_identity(t, f, p).passed
