"""Stereographic projection to R^3, meshing of the genus-two link, and R^3 curvature fits."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .curvature import principal_frames
from .errors import InvalidParameter, RadialParallel, TooCloseToPole, WeldFailure
from .field4 import (
    CHARTS,
    LinkSurface,
    SurfacePoint,
    chart_phi,
    hexagon_boundary_lift,
    hexagon_boundary_radius,
    parse_signs,
    tangent_frame,
)


def default_pole(r: float) -> np.ndarray:
    """``(0, 0, r, 0)``: on the sphere, with ``F = r^3`` so off the link."""
    return np.array([0.0, 0.0, float(r), 0.0])


def _complement_basis(P_hat: np.ndarray) -> np.ndarray:
    """4x3 matrix whose columns are an orthonormal basis of ``P_hat^perp``."""
    M = np.column_stack([P_hat, np.eye(4)])
    Q, _ = np.linalg.qr(M)
    B = Q[:, 1:4]
    # Fix signs so the basis is deterministic and right-handed with P_hat.
    if np.linalg.det(np.column_stack([B, P_hat])) < 0:
        B[:, 2] = -B[:, 2]
    return B


@dataclass(frozen=True)
class StereoMap:
    r: float
    pole: np.ndarray
    basis: np.ndarray = field(repr=False)

    @property
    def pole_hat(self) -> np.ndarray:
        return self.pole / self.r


def make_stereo_map(s: LinkSurface | float, pole=None) -> StereoMap:
    """Projection from ``pole``; with a surface given the pole is checked to be off it."""
    surface = s if isinstance(s, LinkSurface) else None
    r = surface.r if surface is not None else float(s)
    if not r > 0:
        raise InvalidParameter("radius must be positive")
    P = default_pole(r) if pole is None else np.asarray(pole, float)
    if P.shape != (4,):
        raise InvalidParameter("pole must be a point of R^4")
    if abs(P @ P - r * r) > 1e-10 * max(1.0, r * r):
        raise InvalidParameter("pole must lie on the sphere of radius r")
    if surface is not None and abs(surface.f(P)) <= 1e-6:
        raise InvalidParameter("pole lies on the surface")
    return StereoMap(r, P, _complement_basis(P / r))


def stereo_project(m: StereoMap, X) -> np.ndarray:
    """Projection from the pole onto the equatorial 3-plane, in the basis ``m.basis``."""
    X = np.asarray(X, float)
    dist = np.linalg.norm(X - m.pole, axis=-1)
    if np.any(dist < 1e-6 * m.r):
        raise TooCloseToPole("point within 1e-6 r of the pole")
    denom = m.r - X @ m.pole_hat
    return m.r * (X @ m.basis) / denom[..., None]


def stereo_inverse(m: StereoMap, Y) -> np.ndarray:
    Y = np.asarray(Y, float)
    n2 = np.sum(Y * Y, axis=-1)[..., None]
    r2 = m.r * m.r
    return (2 * r2 * (Y @ m.basis.T) + (n2 - r2) * m.pole) / (n2 + r2)


def stereo_jacobian(m: StereoMap, X) -> np.ndarray:
    """Differential of the projection, shape ``(..., 3, 4)``."""
    X = np.asarray(X, float)
    denom = (m.r - X @ m.pole_hat)[..., None, None]
    BX = (X @ m.basis)[..., :, None]
    return m.r * m.basis.T / denom + m.r * BX * m.pole_hat[None, :] / denom**2


def stereo_push(m: StereoMap, X, V) -> np.ndarray:
    """Push tangent vectors V at points X forward to R^3."""
    return np.einsum("...ij,...j->...i", stereo_jacobian(m, X), V)


def projected_normal(s: LinkSurface, p: SurfacePoint | np.ndarray) -> np.ndarray:
    """``nu - (<nu, mu>/<mu, mu>) mu``: the part of nu tangent to the sphere."""
    if isinstance(p, SurfacePoint):
        nu, mu = p.nu, p.mu
    else:
        X = np.asarray(p, float)
        nu, mu = s.f.gradient(X), s.g.gradient(X)
    mm = np.sum(mu * mu, axis=-1, keepdims=True)
    if np.any(mm == 0):
        raise RadialParallel("radial field vanishes")
    out = nu - np.sum(nu * mu, axis=-1, keepdims=True) / mm * mu
    if np.any(np.linalg.norm(out, axis=-1) < 1e-8):
        raise RadialParallel("nu is parallel to the radial field")
    return out


# ---------------------------------------------------------------------------
# Mesh


@dataclass
class SurfaceMesh:
    """Triangulated surface in R^4 with chart provenance for every vertex.

    ``chart`` holds the sign label of the first chart a vertex came from;
    ``seam`` flags vertices on ``xy = 0``.
    """

    vertices: np.ndarray
    faces: np.ndarray
    chart: np.ndarray
    seam: np.ndarray
    counts: dict = field(default_factory=dict)

    def edges(self) -> np.ndarray:
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edges()) + len(self.faces)

    def edge_face_counts(self) -> np.ndarray:
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        _, counts = np.unique(np.sort(e, axis=1), axis=0, return_counts=True)
        return counts

    def is_closed(self) -> bool:
        return bool(np.all(self.edge_face_counts() == 2))

    def is_orientable(self) -> bool:
        """Consistently oriented: every directed edge occurs exactly once."""
        d = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        _, counts = np.unique(d, axis=0, return_counts=True)
        return bool(np.all(counts == 1))

    def project(self, m: StereoMap) -> np.ndarray:
        return stereo_project(m, self.vertices)


def _hexagon_grid(s: LinkSurface, n: int):
    """Polar grid over the hexagon: centre, ``n`` graded rings of ``6n`` nodes.

    Returns ``(uv, boundary_points_4d, faces)`` where the last ring lies on
    the boundary and its lifted (+,+) points have exact zero coordinates.
    """
    M = 6 * n
    theta = np.pi / 6 + 2 * np.pi * np.arange(M) / M
    rho_b = np.array([hexagon_boundary_radius(s.r, t, s.q) for t in theta])
    uv = [np.zeros((1, 2))]
    for k in range(1, n + 1):
        sk = k / n
        rho = rho_b * sk * (2 - sk)
        uv.append(np.column_stack([rho * np.cos(theta), rho * np.sin(theta)]))
    uv = np.concatenate(uv)
    ring = lambda k, j: 1 + (k - 1) * M + (j % M)
    faces = [(0, ring(1, j), ring(1, j + 1)) for j in range(M)]
    for k in range(1, n):
        for j in range(M):
            a, b = ring(k, j), ring(k, j + 1)
            c, d = ring(k + 1, j), ring(k + 1, j + 1)
            faces.append((a, c, d))
            faces.append((a, d, b))
    return uv, theta, np.array(faces, dtype=np.int64)


def mesh_double_torus(s: LinkSurface, n: int = 32, weld_tol: float = 1e-9) -> SurfaceMesh:
    """Closed triangulation from the four graph charts, welded along the seams."""
    if n < 8:
        raise InvalidParameter("mesh resolution must be at least 8")
    if s.p != 2:
        raise InvalidParameter("graph charts need p = 2")
    uv, theta, faces = _hexagon_grid(s, n)
    nb = len(theta)
    n_int = len(uv) - nb
    verts, charts, seams, all_faces = [], [], [], []
    for c_idx, label in enumerate(CHARTS):
        sx, sy = parse_signs(label)
        P = np.empty((len(uv), 4))
        P[:n_int] = chart_phi(s, label, uv[:n_int])
        P[n_int:] = hexagon_boundary_lift(s, theta, label)
        offset = c_idx * len(uv)
        f = faces + offset
        if sx * sy < 0:
            f = f[:, [0, 2, 1]]
        verts.append(P)
        charts.extend([label] * len(uv))
        seams.append(np.r_[np.zeros(n_int, bool), np.ones(nb, bool)])
        all_faces.append(f)
    V = np.concatenate(verts)
    F = np.concatenate(all_faces)
    seam = np.concatenate(seams)
    charts = np.array(charts)
    tol = weld_tol * max(1.0, s.r)
    tree = cKDTree(V)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    if len(pairs) and not np.all(seam[pairs[:, 0]] & seam[pairs[:, 1]]):
        raise WeldFailure("interior vertices collided during welding")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(V), len(V)))
    _, roots = connected_components(graph, directed=False)
    # Representative of each class: its lowest vertex index, so output order follows the charts.
    first = np.full(roots.max() + 1, len(V))
    np.minimum.at(first, roots, np.arange(len(V)))
    roots = first[roots]
    uniq, inv = np.unique(roots, return_inverse=True)
    # Every seam vertex must have found its partner in another chart.
    group_size = np.bincount(inv)
    if np.any(group_size[inv][seam] < 2):
        raise WeldFailure("seam vertex without a partner within tolerance")
    F = inv[F]
    counts = {
        "interior": n_int,
        "seam": int(nb - 6),
        "corners": 6,
        "expected_vertices": 4 * n_int + 2 * (nb - 6) + 6,
    }
    return SurfaceMesh(V[uniq], F, charts[uniq], seam[uniq], counts)


# ---------------------------------------------------------------------------
# Curvature of a meshed surface in R^3


def _monomials(a, b, degree):
    cols, exps = [], []
    for total in range(degree + 1):
        for i in range(total, -1, -1):
            j = total - i
            cols.append(a**i * b**j)
            exps.append((i, j))
    return np.column_stack(cols), exps


@dataclass(frozen=True)
class FittedCurvature:
    kappa: tuple[float, float]
    directions: np.ndarray  # 2x3, rows are principal directions in R^3
    normal: np.ndarray


def fit_shape_operator(
    points: np.ndarray,
    tree: cKDTree,
    p,
    normal_hint=None,
    k: int = 60,
    degree: int = 4,
    grow: float = 1.5,
    isotropy: float = 0.4,
    weight: float = 1.0,
) -> FittedCurvature:
    """Principal curvatures at a point p of a sampled surface in R^3.

    Neighbours are taken from a ball around p whose radius starts at
    ``grow`` times the distance to the k-th nearest sample and is enlarged
    until the tangential spread is roughly isotropic (graded meshes give
    elongated kNN sets).  The samples are written as heights over the plane
    normal to ``normal_hint`` (or a PCA normal), a polynomial without
    constant term is fitted by Gaussian-weighted least squares, and the
    principal data come from the generalised eigenproblem of the second and
    first fundamental forms at p.  p itself is assumed to lie on the surface.
    """
    p = np.asarray(p, float)
    dist, idx = tree.query(p, k=k)
    R = dist[-1] * grow
    if normal_hint is None:
        Q = points[idx] - p
        _, _, Vt = np.linalg.svd(Q - Q.mean(axis=0))
        nrm = Vt[2]
    else:
        nrm = np.asarray(normal_hint, float)
        nrm = nrm / np.linalg.norm(nrm)
    e1 = np.cross(nrm, [1.0, 0, 0] if abs(nrm[0]) < 0.9 else [0, 1.0, 0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(nrm, e1)
    for _ in range(20):
        Q = points[tree.query_ball_point(p, R)] - p
        a, b, h = Q @ e1, Q @ e2, Q @ nrm
        sv = np.linalg.svd(np.column_stack([a, b]), compute_uv=False)
        if sv[1] > isotropy * sv[0]:
            break
        R *= 1.3
    A, exps = _monomials(a / R, b / R, degree)
    A, exps = A[:, 1:], exps[1:]
    w = np.exp(-weight * (a * a + b * b) / R**2)
    coef, *_ = np.linalg.lstsq(A * w[:, None], h * w, rcond=None)
    c = dict(zip(exps, coef))

    def d(i, j, fact):
        return c.get((i, j), 0.0) * fact / R ** (i + j)

    ha, hb = d(1, 0, 1), d(0, 1, 1)
    haa, hab, hbb = d(2, 0, 2), d(1, 1, 1), d(0, 2, 2)
    I = np.array([[1 + ha * ha, ha * hb], [ha * hb, 1 + hb * hb]])
    II = np.array([[haa, hab], [hab, hbb]]) / np.sqrt(1 + ha * ha + hb * hb)
    vals, vecs = eigh(II, I)
    dirs = np.array([vecs[0, i] * (e1 + ha * nrm) + vecs[1, i] * (e2 + hb * nrm) for i in (1, 0)])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    n_surf = nrm - ha * e1 - hb * e2
    return FittedCurvature((float(vals[1]), float(vals[0])), dirs, n_surf / np.linalg.norm(n_surf))


def direction_error(fc: FittedCurvature, d) -> float:
    """Angle between the line of d and the nearest fitted principal line."""
    d = np.asarray(d, float) / np.linalg.norm(d)
    c = np.max(np.abs(fc.directions @ d))
    return float(np.arccos(min(1.0, c)))


def stereo_normal(m: StereoMap, s: LinkSurface, X) -> np.ndarray:
    """Unit normal of the projected surface at ``sigma(X)``.

    The image of the plane spanned by the two surface tangents; used as a
    fitting hint.
    """
    X = np.asarray(X, float)
    t1, t2 = tangent_frame(s.f.gradient(X), s.g.gradient(X))
    a = stereo_push(m, X, t1)
    b = stereo_push(m, X, t2)
    n = np.cross(a, b)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


@dataclass(frozen=True)
class TransferReport:
    """Agreement between R^4 principal lines and the projected surface's curvature lines."""

    max_angle: float
    angles: np.ndarray
    umbilic_gaps: np.ndarray
    excluded: int


def check_transfer(
    s: LinkSurface,
    mesh: SurfaceMesh,
    traces,
    umbilics,
    stereo: StereoMap | None = None,
    samples_per_trace: int = 40,
    min_gap: float = 1e-2,
) -> TransferReport:
    """Compare pushed-forward trace tangents with fitted principal directions.

    Sample points whose principal gap in R^4 is below ``min_gap / r`` are
    skipped, since principal lines there are too ill-conditioned to fit.
    """
    m = stereo or make_stereo_map(s)
    Y = mesh.project(m)
    tree = cKDTree(Y)
    angles, excluded = [], 0
    for t in traces:
        idx = np.unique(np.linspace(0, len(t.vertices) - 1, samples_per_trace).astype(int))
        X, T = t.vertices[idx], t.tangents[idx]
        gap = principal_frames(s, X)[4]
        keep = gap >= min_gap / s.r
        excluded += int(np.sum(~keep))
        hints = stereo_normal(m, s, X[keep])
        for x, tan, nh in zip(X[keep], T[keep], hints):
            fc = fit_shape_operator(Y, tree, stereo_project(m, x), normal_hint=nh)
            angles.append(direction_error(fc, stereo_push(m, x, tan)))
    gaps = []
    for u in np.atleast_2d(umbilics):
        fc = fit_shape_operator(Y, tree, stereo_project(m, u), normal_hint=stereo_normal(m, s, u))
        gaps.append(fc.kappa[0] - fc.kappa[1])
    angles = np.array(angles)
    return TransferReport(float(angles.max()) if len(angles) else 0.0, angles, np.array(gaps), excluded)
