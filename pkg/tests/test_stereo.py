import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.spatial import cKDTree

from curvatura.curvature import line_angle, principal_frames
from curvatura.errors import InvalidParameter, RadialParallel, TooCloseToPole, WeldFailure
from curvatura.field4 import make_double_torus, sample_surface_points, tangent_frame
from curvatura.stereo import (
    check_transfer,
    default_pole,
    fit_shape_operator,
    make_stereo_map,
    mesh_double_torus,
    projected_normal,
    stereo_inverse,
    stereo_jacobian,
    stereo_project,
    stereo_push,
)
from curvatura.tracer import e2_seeds, trace_line
from curvatura.umbilic import known_umbilics

from .conftest import R_DEFAULT


def sphere_points(rng, n, r):
    X = rng.normal(size=(n, 4))
    return r * X / np.linalg.norm(X, axis=1, keepdims=True)


def sphere_tangents(X):
    """Orthonormal bases of the tangent spaces of S^3 at X, shape (n, 3, 4)."""
    out = []
    for x in X:
        _, _, Vt = np.linalg.svd(x[None])
        out.append(Vt[1:])
    return np.array(out)


@pytest.mark.parametrize("r", [R_DEFAULT, 1.0])
def test_antipode_and_equator(r, rng):
    m = make_stereo_map(r)
    assert_allclose(stereo_project(m, -m.pole), 0, atol=1e-15)
    P = m.pole_hat
    X = sphere_points(rng, 200, r)
    X = X - np.outer(X @ P, P)
    X = r * X / np.linalg.norm(X, axis=1, keepdims=True)
    assert_allclose(np.linalg.norm(stereo_project(m, X), axis=1), r, rtol=1e-12)


@pytest.mark.parametrize("r", [0.1, R_DEFAULT, 1.0, 3.0])
def test_round_trip(r, rng):
    m = make_stereo_map(r)
    X = sphere_points(rng, 1000, r)
    X = X[np.linalg.norm(X - m.pole, axis=1) > 1e-2 * r]
    assert np.max(np.abs(stereo_inverse(m, stereo_project(m, X)) - X)) <= 1e-12 * max(1, r)


def test_conformal(rng):
    r = 1.0
    m = make_stereo_map(r)
    X = sphere_points(rng, 500, r)
    X = X[np.linalg.norm(X - m.pole, axis=1) > 0.2]
    h = 1e-5
    for x, T in zip(X, sphere_tangents(X)):
        # Central differences along great circles through x.
        pushed = []
        for t in T:
            fwd = np.cos(h) * x + r * np.sin(h) * t
            bwd = np.cos(h) * x - r * np.sin(h) * t
            pushed.append((stereo_project(m, fwd) - stereo_project(m, bwd)) / (2 * h * r))
        G = np.array(pushed) @ np.array(pushed).T
        lam = np.trace(G) / 3
        assert np.max(np.abs(G - lam * np.eye(3))) <= 1e-8 * lam


def test_jacobian_matches_differences(rng):
    m = make_stereo_map(R_DEFAULT)
    X = sphere_points(rng, 20, R_DEFAULT)
    h = 1e-6
    J = stereo_jacobian(m, X)
    assert J.shape == (20, 3, 4)
    for x, j in zip(X, J):
        fd = np.array([(stereo_project(m, x + h * e) - stereo_project(m, x - h * e)) / (2 * h) for e in np.eye(4)]).T
        assert_allclose(j, fd, rtol=1e-7, atol=1e-7)
    V = rng.normal(size=(20, 4))
    assert_allclose(stereo_push(m, X, V), np.einsum("nij,nj->ni", J, V))


def test_projected_normal_examples(torus1):
    c = 1 / np.sqrt(2)
    assert_allclose(projected_normal(torus1, np.array([c, c, 0, 0])), [np.sqrt(2), -np.sqrt(2), 0, 0])
    X = np.array([1.0, 0, 0.5, 0])
    nu = torus1.f.gradient(X)
    mu = torus1.g.gradient(X)
    assert_allclose(projected_normal(torus1, X), nu - (nu @ mu) / (mu @ mu) * mu)
    with pytest.raises(RadialParallel):
        projected_normal(torus1, np.array([1.0, 0, 0, 0]))


@pytest.mark.parametrize("r", [0.1, R_DEFAULT, 1.0])
def test_projected_normal_is_tangent_to_sphere(r):
    s = make_double_torus(r)
    X = sample_surface_points(s, 1000, 21)
    nh = projected_normal(s, X)
    mu = s.g.gradient(X)
    nu = s.f.gradient(X)
    scale = np.linalg.norm(nh, axis=1) * np.linalg.norm(mu, axis=1)
    assert np.max(np.abs(np.sum(nh * mu, axis=1)) / scale) <= 1e-12
    assert np.all(np.sum(nh * nu, axis=1) > 0)


@pytest.mark.parametrize("r", [R_DEFAULT, 1.0])
def test_spherical_normal_gives_same_principal_lines(r):
    """Principal lines from the shape operator of nu-hat inside S^3 agree with the R^4 ones.

    d(nu-hat) = Hess F - lambda Hess G on tangent vectors, modulo mu.
    """
    s = make_double_torus(r)
    X = sample_surface_points(s, 500, 5, margin=1e-3 * r * r)
    dmax, dmin, _, _, gap = principal_frames(s, X)
    for x, a, b, g in zip(X, dmax, dmin, gap):
        if g < 1e-6:
            continue
        nu, mu = s.f.gradient(x), s.g.gradient(x)
        lam = (nu @ mu) / (mu @ mu)
        T = np.array(tangent_frame(nu, mu))
        S = T @ (s.f.hessian(x) - lam * s.g.hessian(x)) @ T.T
        w, V = np.linalg.eigh(S)
        lines = V.T @ T
        err = min(line_angle(lines[0], a) + line_angle(lines[1], b), line_angle(lines[0], b) + line_angle(lines[1], a))
        assert err <= 1e-8


def test_pole_validation(torus1):
    with pytest.raises(InvalidParameter):
        make_stereo_map(torus1, pole=[0, 0, 0, 1.0])  # on the surface
    with pytest.raises(InvalidParameter):
        make_stereo_map(1.0, pole=[0, 0, 2.0, 0])
    with pytest.raises(InvalidParameter):
        make_stereo_map(1.0, pole=[0, 0, 1.0])
    with pytest.raises(InvalidParameter):
        make_stereo_map(-1.0)
    assert_allclose(default_pole(2.0), [0, 0, 2.0, 0])
    m = make_stereo_map(1.0)
    with pytest.raises(TooCloseToPole):
        stereo_project(m, m.pole)


def test_pole_is_off_surface(torus):
    assert abs(torus.f(default_pole(torus.r))) > 1e-6


@pytest.mark.parametrize("r", [1.0, R_DEFAULT])
@pytest.mark.parametrize("n", [8, 16, 32])
def test_mesh_topology(r, n):
    s = make_double_torus(r)
    mesh = mesh_double_torus(s, n)
    assert len(mesh.vertices) == mesh.counts["expected_vertices"]
    assert mesh.is_closed() and mesh.is_orientable()
    assert mesh.euler_characteristic == -2
    assert np.max(np.abs(s.residuals(mesh.vertices))) <= 1e-12
    assert set(np.unique(mesh.chart)) == {"++", "+-", "-+", "--"}
    assert np.all(np.abs(np.prod(mesh.vertices[mesh.seam, :2], axis=1)) <= 1e-12)


def test_mesh_vertices_distinct():
    mesh = mesh_double_torus(make_double_torus(1.0), 16)
    assert not cKDTree(mesh.vertices).query_pairs(1e-9)


def test_mesh_rejects_bad_input():
    with pytest.raises(InvalidParameter):
        mesh_double_torus(make_double_torus(1.0), 7)
    with pytest.raises(InvalidParameter):
        mesh_double_torus(make_double_torus(1.0, 3, 3), 16)
    with pytest.raises(WeldFailure):
        mesh_double_torus(make_double_torus(1.0), 16, weld_tol=1e-2)


def test_mesh_projection_avoids_pole():
    s = make_double_torus(R_DEFAULT)
    mesh = mesh_double_torus(s, 16)
    Y = mesh.project(make_stereo_map(s))
    assert np.all(np.isfinite(Y))


def test_fit_on_sphere_and_cylinder(rng):
    P = rng.normal(size=(20000, 3))
    P = 2 * P / np.linalg.norm(P, axis=1, keepdims=True)
    p = np.array([0, 0, 2.0])
    fc = fit_shape_operator(P, cKDTree(P), p, normal_hint=[0, 0, 1])
    assert_allclose(np.abs(fc.kappa), 0.5, atol=1e-4)
    th, z = rng.uniform(0, 2 * np.pi, 20000), rng.uniform(-1, 1, 20000)
    C = np.column_stack([np.cos(th), np.sin(th), z])
    fc = fit_shape_operator(C, cKDTree(C), np.array([1.0, 0, 0]))
    assert_allclose(sorted(np.abs(fc.kappa)), [0, 1], atol=1e-3)
    i = int(np.argmax(np.abs(fc.kappa)))
    assert line_angle(fc.directions[i], [0, 1, 0]) <= 1e-3
    assert line_angle(fc.normal, [1, 0, 0]) <= 1e-3


def test_transfer_smoke(torus1):
    """A moderate mesh already agrees to a few degrees."""
    mesh = mesh_double_torus(torus1, 64)
    seed = e2_seeds(torus1, 1)[0]
    traces = [trace_line(torus1, seed, fol, h=2e-3) for fol in ("max", "min")]
    rep = check_transfer(torus1, mesh, traces, known_umbilics(1.0), samples_per_trace=10)
    assert len(rep.angles) + rep.excluded == 20
    assert rep.max_angle <= 0.05
    assert len(rep.umbilic_gaps) == 4
