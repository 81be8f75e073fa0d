import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.spatial import cKDTree

from curvatura.curvature import line_angle, principal_frames
from curvatura.errors import InvalidParameter, UmbilicGuard, UnsupportedExponents
from curvatura.field4 import hexagon_boundary_lift, hexagon_contains, make_double_torus
from curvatura.symmetry import GAMMA1, GAMMA2, GAMMA3, IDENTITY, REFLECT_V, AffineMap, SymmetryGroup
from curvatura.tracer import (
    apply_symmetry,
    axis_extent,
    build_cw_complex,
    e2_seeds,
    explicit_separatrices,
    foliation_atlas,
    omega_residuals,
    reversed_trace,
    s2_direct,
    s3_conjugated,
    s3_direct,
    separatrix_residuals,
    trace_batch,
    trace_line,
)
from curvatura.umbilic import known_umbilics

R = 1.0
H = 1e-3


@pytest.fixture(scope="module")
def mid_traces(torus1):
    seed = e2_seeds(torus1, 1)
    return {fol: trace_line(torus1, seed[0], fol, h=H) for fol in ("max", "min")}


def test_group_structure(torus1, rng):
    G = SymmetryGroup()
    assert G.order == 12
    assert_allclose(np.linalg.matrix_power(GAMMA3, 3), np.eye(4), atol=1e-14)
    assert_allclose(GAMMA1 @ GAMMA1, np.eye(4))
    assert_allclose(GAMMA2 @ GAMMA2, np.eye(4))
    X = rng.normal(size=(1000, 4))
    for g in [*G.generators.values(), AffineMap(REFLECT_V)]:
        assert np.max(np.abs(torus1.f(g(X)) - torus1.f(X))) <= 1e-12
        assert np.max(np.abs(torus1.g(g(X)) - torus1.g(X))) <= 1e-12


def test_conjugated_rotation_fixes_umbilic():
    G = SymmetryGroup()
    U3 = known_umbilics(R)[0]
    g = G.conjugated_rotation(4 * np.pi / 3, U3)
    assert_allclose(g(U3), U3, atol=1e-15)
    assert len(G.orbit(U3)) == 4


def test_trace_invariants(torus1, mid_traces):
    for fol, t in mid_traces.items():
        assert t.closed and t.status == "closed"
        assert t.closure_distance <= 10 * H
        steps = np.linalg.norm(np.diff(t.vertices, axis=0), axis=1)
        assert steps.max() <= H * (1 + 1e-9)
        assert np.max(np.abs(torus1.residuals(t.vertices))) <= 1e-10
        assert line_angle(t.tangents[0], t.tangents[-1]) <= 1e-4 or t.closure_distance <= 1e-9
        dmax, dmin, *_ = principal_frames(torus1, t.vertices)
        d = dmax if fol == "max" else dmin
        assert line_angle(t.tangents, d).max() <= 1e-4
        assert omega_residuals(torus1, t).max() <= 1e-8


def test_traces_stay_in_hexagon(mid_traces):
    for t in mid_traces.values():
        for v in t.vertices[::50]:
            assert hexagon_contains(R, v[2:], tol=1e-10) != "outside"


def test_foliations_orthogonal_at_seed(mid_traces):
    a, b = mid_traces["max"].tangents[0], mid_traces["min"].tangents[0]
    assert abs(a @ b) <= 1e-6


def test_chart_pairs(mid_traces):
    """Each closed line crosses the seam twice and visits one neighbouring chart."""
    visited = {fol: set(t.chart_tags) for fol, t in mid_traces.items()}
    assert {frozenset(v) for v in visited.values()} == {frozenset({"++", "+-"}), frozenset({"++", "-+"})}
    for t in mid_traces.values():
        tags = t.chart_tags
        switches = sum(1 for a, b in zip(tags, tags[1:] + tags[:1]) if a != b)
        assert switches == 2


def test_reversed_trace(torus1, mid_traces):
    t = mid_traces["max"]
    back = trace_line(torus1, t.vertices[0], "max", h=H, initial_ref=-t.tangents[0])
    assert back.closed
    tree = cKDTree(t.vertices)
    d, _ = tree.query(back.vertices)
    assert d.max() <= 2 * H
    rt = reversed_trace(t)
    assert_allclose(rt.vertices[0], t.vertices[-1])
    assert rt.tangents[0] @ t.tangents[-1] < 0


def test_step_halving_consistency(torus1):
    seed = e2_seeds(torus1, 3)[1]
    a = trace_line(torus1, seed, "max", h=H)
    b = trace_line(torus1, seed, "max", h=H / 2)
    assert a.closed and b.closed
    assert b.closure_distance <= 10 * H / 2
    assert abs(a.arc_length - b.arc_length) <= 1e-5 * a.arc_length


def test_trace_follows_axis_separatrix(torus1):
    S13 = explicit_separatrices(R)[0].branches[2]
    X = S13(np.array([R / 2]))[0]
    tangent = explicit_separatrices(R)[0].tangents[2](np.array([R / 2]))[0]
    dmax, dmin, *_ = principal_frames(torus1, X[None])
    fol = "max" if line_angle(tangent, dmax[0]) < line_angle(tangent, dmin[0]) else "min"
    t = trace_line(torus1, X, fol, h=H, initial_ref=-tangent)
    assert t.status == "umbilic"
    assert np.max(np.abs(t.vertices[:, 3])) <= 1e-6


def test_umbilic_seed_rejected(torus1):
    with pytest.raises(UmbilicGuard):
        trace_line(torus1, known_umbilics(R)[0], "max")


def test_bad_foliation(torus1):
    with pytest.raises(InvalidParameter):
        trace_batch(torus1, e2_seeds(torus1, 1), "sideways")


def test_apply_symmetry(torus1, mid_traces):
    t = mid_traces["max"]
    same = apply_symmetry(IDENTITY, t)
    assert np.array_equal(same.vertices, t.vertices)
    img = apply_symmetry(GAMMA3, t)
    assert img.foliation == t.foliation
    assert np.max(np.abs(torus1.residuals(img.vertices))) <= 1e-10
    dmax, *_ = principal_frames(torus1, img.vertices)
    assert line_angle(img.tangents, dmax).max() <= 1e-4


def test_separatrix_examples():
    r = R
    S1, S2, S3 = explicit_separatrices(r)
    c = r / np.sqrt(2)
    assert_allclose(S1.branches[2](np.array([0.0]))[0], [c, c, 0, 0], atol=1e-15)
    t0 = axis_extent(r)
    # Branches sharing the sign of y meet on x = 0 at t0; those sharing x meet on y = 0 at -t0.
    p13, p14 = S1.branches[2](np.array([t0]))[0], S1.branches[3](np.array([t0]))[0]
    assert_allclose(p13, p14, atol=1e-7)  # sqrt of a rounding-level radicand
    assert abs(p13[0]) <= 1e-7 and p13[1] > 0
    q12, q13 = S1.branches[1](np.array([-t0]))[0], S1.branches[2](np.array([-t0]))[0]
    assert_allclose(q12, q13, atol=1e-7)
    assert abs(q13[1]) <= 1e-7 and q13[0] > 0
    t = np.linspace(-t0, t0, 101)
    P = s2_direct(r, 1, t)
    assert_allclose(P[:, 2], -t / 2)
    assert_allclose(P[:, 3], np.sqrt(3) / 2 * t)


@pytest.mark.parametrize("r", [0.1, 1 / np.sqrt(10), 1.0])
def test_separatrix_residuals_and_symmetry(r):
    s = make_double_torus(r)
    seps = explicit_separatrices(r)
    for sep in seps:
        surf, quad = separatrix_residuals(s, sep, 1000)
        assert surf <= 1e-12 and quad <= 1e-10
    t = np.linspace(*seps[0].domain, 1000)
    for i in range(4):
        assert_allclose(seps[1].branches[i](t), seps[0].branches[i](t) @ GAMMA3.T, atol=1e-12)
        assert_allclose(seps[1].branches[i](t), s2_direct(r, i + 1, t), atol=1e-12)
        assert_allclose(s3_direct(r, i + 1, t), s3_conjugated(r, i + 1, t), atol=1e-12)
    # Gamma1 exchanges branches 4 and 1.
    assert_allclose(seps[0].branches[3](t) @ GAMMA1.T, seps[0].branches[0](t), atol=1e-12)


def test_separatrix_set_is_invariant():
    seps = explicit_separatrices(R)
    t = np.linspace(*seps[0].domain, 400)
    pts = np.concatenate([b(t) for s in seps for b in s.branches])
    tree = cKDTree(pts)
    for g in (GAMMA1, GAMMA2, GAMMA3):
        d, _ = tree.query(pts @ g.T)
        assert d.max() <= 1e-10


def test_separatrix_loops_close():
    for sep in explicit_separatrices(R):
        loop = sep.loop()
        steps = np.linalg.norm(np.diff(np.vstack([loop, loop[:1]]), axis=0), axis=1)
        assert steps.max() < 0.1
        umb = known_umbilics(R)
        assert all(np.min(np.linalg.norm(loop - u, axis=1)) <= 1e-12 for u in umb)


@pytest.mark.parametrize("r", [1.0, 1 / np.sqrt(10), 0.1, 3.0])
def test_cw_complex(r):
    cw = build_cw_complex(make_double_torus(r))
    assert cw.counts == (16, 30, 12)
    assert cw.euler_characteristic == -2
    assert cw.betti_z2() == (1, 4, 1)
    assert sum(cw.is_separatrix) == 12 and all(cw.is_curvature_line)
    umb = cw.cells0[cw.umbilic_cells]
    assert len(umb) == 4
    assert_allclose(np.sort(np.abs(umb), axis=0), np.tile([r / np.sqrt(2)] * 2 + [0, 0], (4, 1)), atol=1e-12)


def test_cw_requires_double_torus():
    with pytest.raises(UnsupportedExponents):
        build_cw_complex(make_double_torus(1.0, 3, 3))


def test_atlas_single_line(torus1):
    (t,) = foliation_atlas(torus1, 1, "min")
    assert t.closed
    assert set(t.chart_tags) <= {"++", "-+"}


def test_general_exponents_trace():
    s = make_double_torus(1.0, 3, 3)
    t = trace_line(s, np.array([0.6, 0.1, -0.5, 0.4]), "max", h=1e-2, max_len=0.5)
    assert np.max(np.abs(s.residuals(t.vertices))) <= 1e-10
    assert t.arc_length >= 0.5 or t.closed


def test_e2_edge_is_a_max_line(torus1):
    """The lifted edge x = 0 is fixed by x -> -x, so it is itself a curvature line."""
    th = np.linspace(0.05, 0.45, 4001)
    P = hexagon_boundary_lift(torus1, th)
    D = np.gradient(P, axis=0)[1:-1:500]
    dmax, *_ = principal_frames(torus1, P[1:-1:500])
    assert line_angle(D, dmax).max() <= 1e-5


def test_max_lines_seeded_across_a_min_line(torus1):
    m = trace_line(torus1, e2_seeds(torus1, 1)[0], "min", h=2e-3)
    idx = np.flatnonzero(np.array(m.chart_tags) == "++")
    seeds = m.vertices[idx[np.linspace(0, len(idx) - 1, 6).astype(int)[1:-1]]]
    traces = trace_batch(torus1, seeds, "max", h=2e-3)
    assert all(t.closed for t in traces)
    lengths = np.array([t.arc_length for t in traces])
    assert np.ptp(lengths) > 1e-2  # genuinely different lines
