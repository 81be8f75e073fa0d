import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from curvatura.errors import InvalidParameter, NoConvergence, OutOfChart
from curvatura.field4 import (
    CHARTS,
    COORDS,
    chart_phi,
    grad_pair,
    hexagon_boundary_lift,
    hexagon_boundary_radius,
    hexagon_contains,
    make_double_torus,
    normal_gram,
    project_batch,
    project_to_surface,
    radicands,
    sample_surface_points,
    surface_point,
)
from curvatura.symmetry import GAMMA1, GAMMA2, GAMMA3

unit = st.floats(-1.0, 1.0, allow_nan=False)


def test_double_torus_values():
    s = make_double_torus(1.0)
    assert s.f([1, 1, 1, 1]) == -2
    assert s.g([0, 0, 0, 1]) == 0


def test_general_exponents_expand_real_part():
    s = make_double_torus(1.0, 3, 3)
    x, y, u, v = COORDS
    assert sp.expand(s.f.expr - (x**3 - 3 * x * y**2 + u**3 - 3 * u * v**2)) == 0
    assert s.f([1, 0, 1, 0]) == 2


def test_double_torus_expression_is_exact():
    x, y, u, v = COORDS
    assert sp.expand(make_double_torus(0.5).f.expr - (x**2 - y**2 + u**3 - 3 * u * v**2)) == 0


@pytest.mark.parametrize("args", [(0.0,), (-1.0,), (1.0, 1, 3), (1.0, 2, 1), (1.0, 2.5, 3)])
def test_invalid_parameters(args):
    with pytest.raises(InvalidParameter):
        make_double_torus(*args)


def test_grad_pair_examples(torus1):
    nu, mu = grad_pair(torus1, np.array([1.0, 1, 1, 1]))
    assert_allclose(nu, [2, -2, 0, -6])
    assert_allclose(mu, [2, 2, 2, 2])
    nu, mu = grad_pair(torus1, np.zeros(4))
    assert_allclose(nu, 0)
    assert_allclose(mu, 0)
    assert_allclose(grad_pair(torus1, np.array([0.0, 0, 1, 0]))[0], [0, 0, 3, 0])


@given(st.tuples(unit, unit, unit, unit))
def test_gradient_formula_exact(x):
    s = make_double_torus(1.0)
    x, y, u, v = (2 * c for c in x)
    nu = s.f.gradient(np.array([x, y, u, v]))
    assert_allclose(nu, [2 * x, -2 * y, 3 * u * u - 3 * v * v, -6 * u * v], rtol=1e-15, atol=1e-15)


@given(st.tuples(unit, unit, unit, unit), st.sampled_from([(2, 3), (3, 3), (2, 5)]))
def test_gradient_matches_central_differences(x, pq):
    s = make_double_torus(1.0, *pq)
    X = 2 * np.array(x)
    h = 1e-5
    for fld in (s.f, s.g):
        fd = np.array([(fld(X + h * e) - fld(X - h * e)) / (2 * h) for e in np.eye(4)])
        assert_allclose(fld.gradient(X), fd, rtol=1e-6, atol=1e-6)


@given(st.tuples(unit, unit, unit, unit))
def test_hessian_symmetric(x):
    H = make_double_torus(1.0, 3, 5).f.hessian(np.array(x))
    assert np.array_equal(H, H.T)


def test_projection_examples(torus1):
    c = 1 / np.sqrt(2)
    p = project_to_surface(torus1, [c + 1e-3, c, 0, 0])
    assert_allclose(p.position, [c, c, 0, 0], atol=1e-10)
    on = chart_phi(torus1, "++", [0.1, -0.2])
    assert_allclose(project_to_surface(torus1, on).position, on, atol=1e-12)
    q = project_to_surface(torus1, [0.9, 0.1, 0.3, 0.2])
    assert np.all(np.abs(torus1.residuals(q.position)) <= 1e-12)


def test_projection_failure_is_reported(torus1):
    X, _, ok = project_batch(torus1, np.zeros((1, 4)) + 1e-30, max_iter=3)
    assert not ok.all()
    with pytest.raises(NoConvergence):
        project_to_surface(torus1, np.zeros(4))


@pytest.mark.parametrize("r", [0.1, 1 / np.sqrt(10), 1.0, 3.0])
def test_surface_point_frame(r):
    s = make_double_torus(r)
    for X in sample_surface_points(s, 50, 7, margin=1e-3 * r * r):
        p = surface_point(s, X)
        t1, t2 = p.tangent_basis
        n, m = p.nu / np.linalg.norm(p.nu), p.mu / np.linalg.norm(p.mu)
        assert max(abs(t @ n) for t in (t1, t2)) <= 1e-10
        assert max(abs(t @ m) for t in (t1, t2)) <= 1e-10
        assert abs(t1 @ t2) <= 1e-12 and abs(t1 @ t1 - 1) <= 1e-12 and abs(t2 @ t2 - 1) <= 1e-12


@pytest.mark.parametrize("r", [0.1, 1 / np.sqrt(10), 1.0])
def test_transversality(r):
    s = make_double_torus(r)
    X = sample_surface_points(s, 1000, 3)
    assert np.all(normal_gram(*grad_pair(s, X)) > 1e-8)


def test_chart_examples(torus1):
    c = 1 / np.sqrt(2)
    assert_allclose(chart_phi(torus1, "++", [0, 0]), [c, c, 0, 0])
    assert_allclose(chart_phi(torus1, "-+", [0, 0]), [-c, c, 0, 0])
    P = hexagon_boundary_lift(torus1, [0.1])[0]
    assert P[0] == 0.0
    assert torus1.on_surface(P)


def test_chart_rejects_points_outside(torus1):
    with pytest.raises(OutOfChart):
        chart_phi(torus1, "++", [10.0, 0.0])
    with pytest.raises(InvalidParameter):
        chart_phi(torus1, "+x", [0.0, 0.0])


@given(unit, unit, st.sampled_from(CHARTS), st.sampled_from([0.1, 1 / np.sqrt(10), 1.0]))
def test_chart_points_lie_on_surface(a, b, signs, r):
    s = make_double_torus(r)
    uv = np.array([a, b]) * r
    A, B = radicands(r, *uv)
    if A < 0 or B < 0:
        return
    P = chart_phi(s, signs, uv)
    assert np.all(np.abs(s.residuals(P)) <= 1e-10)


def test_hexagon_contains_examples():
    r = 1.0
    assert hexagon_contains(r, [0, 0]) == "inside"
    t0 = hexagon_boundary_radius(r, 0.0)
    loc = hexagon_contains(r, [t0, 0.0])
    assert loc == "boundary" and "X1" in loc.arcs
    assert hexagon_contains(r, [10 * r, 0]) == "outside"


@given(st.floats(0, 2 * np.pi), st.sampled_from([0.1, 1.0, 2.0]))
def test_boundary_radius_is_on_boundary(theta, r):
    rho = hexagon_boundary_radius(r, theta)
    a, b = radicands(r, rho * np.cos(theta), rho * np.sin(theta))
    assert min(abs(a), abs(b)) <= 1e-12 * max(1, r * r)
    assert min(a, b) >= -1e-12 * max(1, r * r)


@given(st.tuples(unit, unit, unit, unit))
def test_group_preserves_fields(x):
    s = make_double_torus(0.7)
    X = 2 * np.array(x)
    for g in (GAMMA1, GAMMA2, GAMMA3):
        assert abs(s.f(g @ X) - s.f(X)) <= 1e-12
        assert abs(s.g(g @ X) - s.g(X)) <= 1e-12


def test_rescaled_surface(torus):
    big = torus.rescaled(3.0)
    X = sample_surface_points(torus, 20, 1)
    assert np.all(np.abs(big.residuals(3 * X)) <= 1e-11)
    assert big.r == pytest.approx(3 * torus.r)
