"""Integration of the principal foliations, explicit separatrices and the CW structure."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .curvature import omega_matrix, principal_frames
from .errors import InvalidParameter, NoConvergence, UmbilicGuard, UnsupportedExponents
from .field4 import (
    LinkSurface,
    SurfacePoint,
    chart_label,
    chart_phi,
    hexagon_boundary_lift,
    hexagon_boundary_radius,
    project_batch,
    surface_point,
)
from .symmetry import (
    GAMMA3,
    IDENTITY,
    AffineMap,
    SymmetryGroup,
    conjugated,
    uv_rotation,
)

FOLIATIONS = ("max", "min")
MAX_TURN = np.deg2rad(5.0)
MAX_PROJ_ITERS = 5
UMBILIC_GUARD = 1e-5


@dataclass(frozen=True)
class Trace:
    """A polyline along one principal foliation.

    ``status`` is ``"closed"``, ``"max_length"`` or ``"umbilic"`` (the trace
    ran into the guard disk of an umbilic, i.e. it follows a separatrix).
    ``tangents`` holds the unit field direction at every vertex.
    """

    vertices: np.ndarray
    foliation: str
    closed: bool
    start: SurfacePoint
    arc_length: float
    chart_tags: tuple[str, ...]
    tangents: np.ndarray
    status: str = "max_length"
    h: float = 0.0

    def __len__(self):
        return len(self.vertices)

    @property
    def closure_distance(self) -> float:
        return float(np.linalg.norm(self.vertices[-1] - self.vertices[0]))


def _orient(d, ref):
    sgn = np.sign(np.einsum("ni,ni->n", d, ref))
    sgn[sgn == 0] = 1.0
    return d * sgn[:, None]


def _turn(a, b):
    c = np.einsum("ni,ni->n", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
    return np.arccos(np.clip(c, -1, 1))


def default_reference(d) -> np.ndarray:
    """Initial orientation: toward +x, or toward +v when the line is nearly orthogonal to x."""
    d = np.atleast_2d(d)
    ref = np.zeros_like(d)
    use_x = np.abs(d[:, 0]) > 0.5
    ref[use_x, 0] = 1.0
    ref[~use_x, 3] = 1.0
    fallback = (~use_x) & (np.abs(d[:, 3]) < 1e-12)
    ref[fallback, 2] = 1.0
    return ref


def trace_batch(
    s: LinkSurface,
    starts,
    foliation: str | Sequence[str] = "max",
    h=None,
    max_len: float | None = None,
    eps_close=None,
    initial_ref=None,
    umbilic_guard: float = UMBILIC_GUARD,
    max_steps: int = 2_000_000,
) -> list[Trace]:
    """Trace many lines at once; each line has its own adaptive step.

    ``starts`` are projected onto the surface first.  ``foliation``, ``h``
    and ``eps_close`` may be given per start.  ``initial_ref`` fixes the
    initial orientation by the sign of a dot product.
    """
    starts = np.atleast_2d(np.asarray(starts, float))
    n = len(starts)
    fol = np.array([foliation] * n if isinstance(foliation, str) else list(foliation))
    if len(fol) != n or any(f not in FOLIATIONS for f in fol):
        raise InvalidParameter("foliation must be 'max' or 'min'")
    r = s.r
    h_max = np.broadcast_to(np.asarray(1e-3 * r if h is None else h, float), (n,)).copy()
    if np.any(h_max <= 0):
        raise InvalidParameter("step must be positive")
    eps = 10 * h_max if eps_close is None else np.broadcast_to(np.asarray(eps_close, float), (n,)).copy()
    max_len = 100.0 * r if max_len is None else float(max_len)
    X0, _, ok = project_batch(s, starts)
    if not np.all(ok):
        raise NoConvergence("could not project every start onto the surface")
    dmax, dmin, _, _, gap0 = principal_frames(s, X0)
    if np.any(gap0 < umbilic_guard):
        raise UmbilicGuard("start point lies in the umbilic guard region")
    d0 = np.where((fol == "max")[:, None], dmax, dmin)
    ref = default_reference(d0) if initial_ref is None else np.broadcast_to(np.asarray(initial_ref, float), (n, 4))
    d0 = _orient(d0, ref)
    res = _integrate(s, X0, d0, fol, h_max, 1e-6 * r, max_len, eps, umbilic_guard, max_steps)
    out = []
    for i in range(n):
        verts, tans, status, length = res[i]
        out.append(
            Trace(
                vertices=verts,
                foliation=str(fol[i]),
                closed=status == "closed",
                start=surface_point(s, X0[i]),
                arc_length=length,
                chart_tags=tuple(chart_label(v, 1e-13) for v in verts),
                tangents=tans,
                status=status,
                h=float(h_max[i]),
            )
        )
    return out


def _field_mixed(s, X, is_max, ref):
    d_max, d_min, _, _, gap = principal_frames(s, X)
    return _orient(np.where(is_max[:, None], d_max, d_min), ref), gap


def _rk4_mixed(s, X, h, is_max, ref):
    k1, gap = _field_mixed(s, X, is_max, ref)
    k2, _ = _field_mixed(s, X + 0.5 * h[:, None] * k1, is_max, k1)
    k3, _ = _field_mixed(s, X + 0.5 * h[:, None] * k2, is_max, k1)
    k4, _ = _field_mixed(s, X + h[:, None] * k3, is_max, k1)
    return X + h[:, None] * (k1 + 2 * k2 + 2 * k3 + k4) / 6, k1, k4, gap


def _integrate(s, X0, d0, fol, h_max, h_min, max_len, eps_close, guard, max_steps):
    m = len(X0)
    is_max = fol == "max"
    X = X0.copy()
    prev = d0.copy()
    h = h_max.copy()
    length = np.zeros(m)
    left = np.zeros(m, dtype=bool)
    active = np.ones(m, dtype=bool)
    verts = [[X0[i].copy()] for i in range(m)]
    tans = [[d0[i].copy()] for i in range(m)]
    status = ["max_length"] * m
    cos_align = np.cos(0.05)
    steps = 0
    while active.any() and steps < max_steps:
        steps += 1
        ia = np.flatnonzero(active)
        ha = h[ia]
        Y, k1, k4, _ = _rk4_mixed(s, X[ia], ha, is_max[ia], prev[ia])
        Yp, iters, conv = project_batch(s, Y)
        turn = _turn(k1, k4)
        bad = (~conv) | (iters > MAX_PROJ_ITERS) | (turn > MAX_TURN)
        shrink = bad & (ha > h_min)
        h[ia[shrink]] = ha[shrink] / 2
        acc = ~shrink
        if not acc.any():
            continue
        ib = ia[acc]
        Ynew = Yp[acc]
        dnew, gap = _field_mixed(s, Ynew, is_max[ib], k1[acc])
        seg = Ynew - X[ib]
        seglen = np.sqrt(np.sum(seg * seg, axis=1))
        start = X0[ib]
        # Closest approach of each accepted segment to its start point.
        t = np.clip(np.sum((start - X[ib]) * seg, axis=1) / np.maximum(seglen**2, 1e-300), 0.0, 1.0)
        dist = np.linalg.norm(X[ib] + t[:, None] * seg - start, axis=1)
        align = np.abs(np.sum(seg * d0[ib], axis=1)) / np.maximum(seglen, 1e-300)
        closing = left[ib] & (dist <= eps_close[ib]) & (align >= cos_align) & (t < 1.0)
        for j in np.flatnonzero(closing):
            i = ib[j]
            Z = _partial_step(s, X[i], t[j] * h[i], is_max[i], prev[i])
            dz, _ = _field_mixed(s, Z[None], is_max[i : i + 1], prev[i][None])
            verts[i].append(Z)
            tans[i].append(dz[0])
            length[i] += np.linalg.norm(Z - X[i])
            status[i] = "closed"
            active[i] = False
        keep = ~closing
        ik = ib[keep]
        X[ik] = Ynew[keep]
        prev[ik] = dnew[keep]
        length[ik] += seglen[keep]
        for j, i in zip(np.flatnonzero(keep), ik):
            verts[i].append(Ynew[j].copy())
            tans[i].append(dnew[j].copy())
        left[ik] |= np.linalg.norm(Ynew[keep] - X0[ik], axis=1) > 3 * eps_close[ik]
        hit = gap[keep] < guard
        for i in ik[hit]:
            status[i] = "umbilic"
        active[ik[hit]] = False
        active[ik[length[ik] >= max_len]] = False
        grow = (turn[acc][keep] < MAX_TURN / 4) & (h[ik] < h_max[ik])
        h[ik[grow]] = np.minimum(h_max[ik[grow]], 2 * h[ik[grow]])
    return [(np.array(verts[i]), np.array(tans[i]), status[i], float(length[i])) for i in range(m)]


def _partial_step(s, X, h, is_max, ref):
    Y, _, _, _ = _rk4_mixed(s, X[None], np.array([h]), np.array([is_max]), ref[None])
    Z, _, _ = project_batch(s, Y[0])
    return Z


def trace_line(
    s: LinkSurface,
    start: SurfacePoint | np.ndarray,
    foliation: str = "max",
    h: float | None = None,
    max_len: float | None = None,
    eps_close: float | None = None,
    initial_ref=None,
) -> Trace:
    """Integrate one principal line from ``start`` until it closes, stalls or runs out."""
    X = start.position if isinstance(start, SurfacePoint) else np.asarray(start, float)
    ref = None if initial_ref is None else np.asarray(initial_ref, float)[None]
    return trace_batch(s, X[None], foliation, h, max_len, eps_close, ref)[0]


def reversed_trace(t: Trace) -> Trace:
    return replace(
        t,
        vertices=t.vertices[::-1].copy(),
        tangents=-t.tangents[::-1],
        chart_tags=tuple(reversed(t.chart_tags)),
    )


def apply_symmetry(g: AffineMap | np.ndarray, t: Trace) -> Trace:
    """Image of a trace under an isometry of the surface; no re-integration."""
    g = g if isinstance(g, AffineMap) else AffineMap(np.asarray(g, float))
    V = g(t.vertices)
    T = g.linear(t.tangents)
    p = t.start
    start = SurfacePoint(g(p.position), g.linear(p.nu), g.linear(p.mu), tuple(g.linear(b) for b in p.tangent_basis))
    return replace(t, vertices=V, tangents=T, start=start, chart_tags=tuple(chart_label(v, 1e-13) for v in V))


def omega_residuals(s: LinkSurface, t: Trace) -> np.ndarray:
    """``|d^T Omega d| / (|d|^2 ||Omega||)`` at every vertex, d the stored tangent."""
    Om = omega_matrix(s, t.vertices)
    d = t.tangents
    q = np.einsum("ni,nij,nj->n", d, Om, d)
    nrm = np.linalg.norm(Om, axis=(1, 2))
    return np.abs(q) / (np.einsum("ni,ni->n", d, d) * np.maximum(nrm, 1e-300))


# ---------------------------------------------------------------------------
# Explicit separatrices


def axis_extent(r: float) -> float:
    """The positive root of ``t^3 + t^2 = r^2``: half-width of the v = 0 chord."""
    return hexagon_boundary_radius(r, 0.0)


_BRANCH_SIGNS = ((-1, -1), (1, -1), (1, 1), (-1, 1))


def _s1_branch(r: float, sx: int, sy: int) -> Callable:
    def S(t):
        t = np.asarray(t, float)
        a = np.maximum(r * r - t * t - t**3, 0.0)
        b = np.maximum(r * r - t * t + t**3, 0.0)
        return np.stack(np.broadcast_arrays(sx * np.sqrt(a / 2), sy * np.sqrt(b / 2), t, 0 * t), axis=-1)

    return S


def _s1_branch_tangent(r: float, sx: int, sy: int) -> Callable:
    def dS(t):
        t = np.asarray(t, float)
        a = r * r - t * t - t**3
        b = r * r - t * t + t**3
        da = -2 * t - 3 * t * t
        db = -2 * t + 3 * t * t
        return np.stack(
            np.broadcast_arrays(sx * da / (2 * np.sqrt(2 * a)), sy * db / (2 * np.sqrt(2 * b)), 1.0 + 0 * t, 0 * t),
            axis=-1,
        )

    return dS


@dataclass(frozen=True)
class Separatrix:
    """A pathwise separatrix made of four closed-form branches.

    ``branches[i](t)`` covers ``domain`` and passes through umbilic
    ``umbilics_visited[i]`` at ``t = 0``.
    """

    label: str
    branches: tuple[Callable, ...]
    tangents: tuple[Callable, ...]
    domain: tuple[float, float]
    umbilics_visited: np.ndarray
    transform: AffineMap = IDENTITY
    closed: bool = True

    def sample(self, n: int = 1000, margin: float = 0.0) -> np.ndarray:
        """Points of all four branches, shape ``(4, n, 4)``."""
        lo, hi = self.domain
        t = np.linspace(lo + margin, hi - margin, n)
        return np.stack([b(t) for b in self.branches])

    def loop(self, n: int = 250) -> np.ndarray:
        """The four branches concatenated into one closed polyline."""
        lo, hi = self.domain
        up = np.linspace(0, hi, n)
        # Full sweeps include t = 0 so the loop passes exactly through every umbilic.
        full = np.union1d(np.linspace(lo, hi, 2 * n), [0.0])
        dn = full[::-1]
        back = np.linspace(lo, 0, n)
        b11, b12, b13, b14 = self.branches
        parts = [b13(up), b14(dn), b11(full), b12(dn), b13(back)]
        P = np.concatenate(parts)
        # Branches meet at shared seam points; drop the repeats and the closing copy of P[0].
        keep = np.r_[True, np.linalg.norm(np.diff(P, axis=0), axis=1) > 1e-14 * max(1.0, float(np.abs(P).max()))]
        P = P[keep]
        return P[:-1] if np.linalg.norm(P[-1] - P[0]) <= 1e-14 * max(1.0, float(np.abs(P).max())) else P


def explicit_separatrices(r: float) -> tuple[Separatrix, Separatrix, Separatrix]:
    """The three pathwise separatrices through all four umbilics."""
    if not r > 0:
        raise InvalidParameter("radius must be positive")
    t0 = axis_extent(r)
    s1b = tuple(_s1_branch(r, *sg) for sg in _BRANCH_SIGNS)
    s1t = tuple(_s1_branch_tangent(r, *sg) for sg in _BRANCH_SIGNS)
    c = r / np.sqrt(2)
    umb = np.array([[sx * c, sy * c, 0.0, 0.0] for sx, sy in _BRANCH_SIGNS])
    out = []
    for k, label in enumerate(("S1", "S2", "S3")):
        g = AffineMap(np.linalg.matrix_power(GAMMA3, k), name=f"G3^{k}")
        b = tuple(_mapped(g, f) for f in s1b)
        tg = tuple(_mapped_linear(g, f) for f in s1t)
        out.append(Separatrix(label, b, tg, (-t0, t0), umb.copy(), g))
    return tuple(out)


def _mapped(g: AffineMap, f):
    return lambda t: g(f(t))


def _mapped_linear(g: AffineMap, f):
    return lambda t: g.linear(f(t))


def s2_direct(r: float, i: int, t):
    """Branch ``S_2i`` from its direct closed form (i = 1..4)."""
    sx, sy = _BRANCH_SIGNS[i - 1]
    P = _s1_branch(r, sx, sy)(t)
    P[..., 2] = -np.asarray(t) / 2
    P[..., 3] = np.sqrt(3) / 2 * np.asarray(t)
    return P


def s3_direct(r: float, i: int, t):
    """Branch ``S_3i`` from its direct closed form."""
    P = s2_direct(r, i, t)
    P[..., 3] = -P[..., 3]
    return P


def s3_conjugated(r: float, i: int, t):
    """Branch ``S_3i`` as the 4 pi/3 rotation about ``U_3`` applied to ``S_1i``."""
    U3 = np.array([r / np.sqrt(2), r / np.sqrt(2), 0.0, 0.0])
    g = conjugated(AffineMap(uv_rotation(4 * np.pi / 3)), U3)
    sx, sy = _BRANCH_SIGNS[i - 1]
    return g(_s1_branch(r, sx, sy)(t))


def separatrix_residuals(s: LinkSurface, sep: Separatrix, n: int = 1000):
    """Surface and quadratic residuals along every branch.

    Returns ``(surface_max, quadratic_max)``; the quadratic residual is
    normalised by ``|d|^2 ||Omega||``.
    """
    lo, hi = sep.domain
    # Open interval: the tangent formula is singular at the seam endpoints.
    t = lo + (hi - lo) * (np.arange(n) + 0.5) / n
    surf = 0.0
    quad = 0.0
    for b, tg in zip(sep.branches, sep.tangents):
        P = b(t)
        D = tg(t)
        surf = max(surf, float(np.max(np.abs(s.residuals(P)))))
        Om = omega_matrix(s, P)
        q = np.einsum("ni,nij,nj->n", D, Om, D)
        nrm = np.linalg.norm(Om, axis=(1, 2)) * np.einsum("ni,ni->n", D, D)
        quad = max(quad, float(np.max(np.abs(q) / np.maximum(nrm, 1e-300))))
    return surf, quad


# ---------------------------------------------------------------------------
# CW structure


@dataclass
class CWComplex:
    """Cells as geometric samples with boundary incidences.

    ``cells0`` is an array of points; ``cells1`` a list of polylines with
    ``edges`` giving their endpoint 0-cells; ``cells2`` interior sample
    points with ``faces`` listing their boundary 1-cells.
    """

    cells0: np.ndarray
    cells1: list[np.ndarray]
    cells2: np.ndarray
    edges: list[tuple[int, int]]
    faces: list[tuple[int, ...]]
    cell1_orbit: list[str]
    cell0_orbit: list[str]
    is_separatrix: list[bool]
    is_curvature_line: list[bool]
    umbilic_cells: list[int] = field(default_factory=list)

    @property
    def counts(self) -> tuple[int, int, int]:
        return len(self.cells0), len(self.cells1), len(self.cells2)

    @property
    def euler_characteristic(self) -> int:
        v, e, f = self.counts
        return v - e + f

    def boundary_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        v, e, f = self.counts
        d1 = np.zeros((v, e), dtype=np.uint8)
        for j, (a, b) in enumerate(self.edges):
            d1[a, j] ^= 1
            d1[b, j] ^= 1
        d2 = np.zeros((e, f), dtype=np.uint8)
        for k, fc in enumerate(self.faces):
            for j in fc:
                d2[j, k] ^= 1
        return d1, d2

    def betti_z2(self) -> tuple[int, int, int]:
        d1, d2 = self.boundary_matrices()
        r1, r2 = _rank_gf2(d1), _rank_gf2(d2)
        v, e, f = self.counts
        return v - r1, e - r1 - r2, f - r2


def _rank_gf2(M: np.ndarray) -> int:
    M = M.copy() % 2
    rank = 0
    rows, cols = M.shape
    for c in range(cols):
        piv = np.flatnonzero(M[rank:, c])
        if piv.size == 0:
            continue
        p = rank + piv[0]
        M[[rank, p]] = M[[p, rank]]
        others = np.flatnonzero(M[:, c])
        others = others[others != rank]
        M[others] ^= M[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def pentagon_cells(s: LinkSurface, n: int = 64):
    """Reference cells of the (+,+) pentagon: vertices, edges and a face point."""
    r = s.r
    rad = lambda th: hexagon_boundary_radius(r, th, s.q)

    def ray(th):
        t = np.linspace(0.0, rad(th), n)
        P = chart_phi(s, "++", np.column_stack([t * np.cos(th), t * np.sin(th)]))
        P[-1] = hexagon_boundary_lift(s, th)[0]
        return P

    def arc(t0, t1):
        return hexagon_boundary_lift(s, np.linspace(t0, t1, n))

    pi = np.pi
    verts = {
        "v0": chart_phi(s, "++", [0.0, 0.0]),
        "v1": arc(0, 0)[0],
        "v2": arc(pi / 6, pi / 6)[0],
        "v3": arc(pi / 2, pi / 2)[0],
        "v4": arc(2 * pi / 3, 2 * pi / 3)[0],
    }
    edges = {
        "a1": (ray(0.0), "v0", "v1"),
        "a2": (arc(0, pi / 6), "v1", "v2"),
        "a3": (arc(pi / 6, pi / 2), "v2", "v3"),
        "a4": (arc(pi / 2, 2 * pi / 3), "v3", "v4"),
        "a5": (ray(2 * pi / 3), "v0", "v4"),
    }
    th = pi / 3
    face = chart_phi(s, "++", 0.5 * rad(th) * np.array([np.cos(th), np.sin(th)]))
    return verts, edges, face


def _index_of(points: list[np.ndarray], p: np.ndarray, tol: float) -> int:
    for k, q in enumerate(points):
        if np.linalg.norm(q - p) <= tol:
            return k
    return -1


def build_cw_complex(s: LinkSurface, samples: int = 64, tol: float = 1e-9) -> CWComplex:
    """Orbit of the pentagon cells under the symmetry group."""
    if (s.p, s.q) != (2, 3):
        raise UnsupportedExponents("CW structure is specific to (p, q) = (2, 3)")
    verts, edges, face = pentagon_cells(s, samples)
    group = SymmetryGroup().elements()
    tol = tol * max(1.0, s.r)
    c0, c0_orbit = [], []
    c1, c1_mid, c1_orbit, e_ends = [], [], [], []
    c2, faces = [], []
    for g in group:
        for name, P in verts.items():
            Q = g(P)
            if _index_of(c0, Q, tol) < 0:
                c0.append(Q)
                c0_orbit.append("v1" if name == "v4" else name)
    for g in group:
        for name, (poly, a, b) in edges.items():
            Q = g(poly)
            mid = Q[len(Q) // 2]
            if _index_of(c1_mid, mid, tol) < 0:
                c1.append(Q)
                c1_mid.append(mid)
                c1_orbit.append("a1" if name == "a5" else name)
                e_ends.append((_index_of(c0, Q[0], tol), _index_of(c0, Q[-1], tol)))
    for g in group:
        F = g(face)
        if _index_of(c2, F, tol) < 0:
            c2.append(F)
            bd = []
            for poly, _, _ in edges.values():
                Q = g(poly)
                bd.append(_index_of(c1_mid, Q[len(Q) // 2], tol))
            faces.append(tuple(bd))
    if any(-1 in e for e in e_ends) or any(-1 in f for f in faces):
        raise RuntimeError("cell incidence could not be resolved")
    umb = [k for k, o in enumerate(c0_orbit) if o == "v0"]
    return CWComplex(
        cells0=np.array(c0),
        cells1=c1,
        cells2=np.array(c2),
        edges=e_ends,
        faces=faces,
        cell1_orbit=c1_orbit,
        cell0_orbit=c0_orbit,
        is_separatrix=[o == "a1" for o in c1_orbit],
        is_curvature_line=[True] * len(c1),
        umbilic_cells=umb,
    )


# ---------------------------------------------------------------------------
# Seeding


def e2_seeds(s: LinkSurface, n: int) -> np.ndarray:
    """``n`` interior points of the lifted edge ``x = 0, 0 < theta < pi/6`` in chart (+,+)."""
    if n < 1:
        raise InvalidParameter("need at least one seed")
    th = np.arange(1, n + 1) / (n + 1) * (np.pi / 6)
    return hexagon_boundary_lift(s, th)


def foliation_atlas(
    s: LinkSurface,
    n_lines: int,
    foliation: str = "max",
    h: float | None = None,
    max_len: float | None = None,
) -> list[Trace]:
    """Trace ``n_lines`` lines seeded along the lifted edge e2, ordered by seed."""
    if (s.p, s.q) != (2, 3):
        raise UnsupportedExponents("seeding along e2 needs the (2, 3) hexagon")
    seeds = e2_seeds(s, n_lines)
    return trace_batch(s, seeds, foliation, h=h, max_len=max_len)


def closed_fraction(traces: Sequence[Trace]) -> float:
    return sum(t.closed for t in traces) / len(traces) if traces else 1.0
