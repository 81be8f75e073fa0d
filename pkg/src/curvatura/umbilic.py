"""Umbilics of the genus-two link: location, certification, 3-jet, slopes, index.

The four umbilics sit at ``(r/sqrt 2)(+-1, +-1, 0, 0)``.  That there are no
others is certified in three parts:

* off the axes (``uv != 0``, ``xy != 0``) by elimination: the restricted
  quadratic coefficients become polynomials in ``w = u^2, z = v^2`` and every
  common real zero is shown to lie off the hexagon;
* on the axes ``u = 0`` or ``v = 0`` by univariate root finding;
* on the seams ``xy = 0`` and as a safety net everywhere, by a dense sweep of
  the relative curvature gap with local refinement.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np
import sympy as sp
from scipy.ndimage import minimum_filter
from scipy.optimize import minimize

from .curvature import EPS_UMB, RADIAL_WEIGHT, principal_frames, shape_matrix
from .errors import (
    CertificationFailure,
    DegenerateCubic,
    InvalidParameter,
    NotAnUmbilic,
    UnsupportedExponents,
    WindingAmbiguous,
)
from .field4 import (
    COORDS,
    LinkSurface,
    chart_label,
    chart_phi,
    hexagon_boundary_lift,
    hexagon_boundary_radius,
    project_batch,
    radicands,
    tangent_frame,
)
from .symmetry import GAMMA1, GAMMA2

U, V, W, Z, R_ = sp.symbols("u v w z r", real=True)
R2 = sp.Symbol("R2", positive=True)  # stands for r^2
DEFAULT_R2 = sp.Rational(1, 10)


# ---------------------------------------------------------------------------
# Restricted coefficients


@dataclass(frozen=True)
class OmegaRestricted:
    """Restricted quadratic coefficients with their axis factors removed.

    ``omega1 = c20 xy / v``, ``omega2 = c11 xy / u`` and ``omega3 = c02 xy / v``
    where ``c20, c11, c02`` are the coefficients in the uv-lift frame and
    ``x^2, y^2`` have been eliminated with the surface equations.
    """

    omega1: sp.Expr
    omega2: sp.Expr
    omega3: sp.Expr
    r: float | None = None

    def exprs(self) -> tuple[sp.Expr, sp.Expr, sp.Expr]:
        return (self.omega1, self.omega2, self.omega3)

    def frame_coefficients(self) -> tuple[sp.Expr, sp.Expr, sp.Expr]:
        """``(v omega1, u omega2, v omega3)``: the xy-scaled coefficients."""
        return (sp.expand(V * self.omega1), sp.expand(U * self.omega2), sp.expand(V * self.omega3))

    def __call__(self, u, v) -> np.ndarray:
        fns = _lambdified(self)
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        return np.stack([np.broadcast_to(f(u, v), np.broadcast(u, v).shape) for f in fns], axis=-1)

    def in_wz(self) -> tuple[sp.Expr, sp.Expr, sp.Expr]:
        """The three polynomials rewritten in ``w = u^2``, ``z = v^2``."""
        return tuple(_even_to_wz(e) for e in self.exprs())


@lru_cache(maxsize=None)
def _lambdified(o: OmegaRestricted):
    return tuple(sp.lambdify((U, V), e, "numpy") for e in o.exprs())


def _even_to_wz(expr) -> sp.Expr:
    poly = sp.Poly(sp.expand(expr), U, V)
    out = 0
    for (i, j), c in poly.terms():
        if i % 2 or j % 2:
            raise ValueError("polynomial is not even in u and v")
        out += c * W ** (i // 2) * Z ** (j // 2)
    return sp.expand(out)


def _symbolic_omega():
    x, y, u, v = COORDS
    F = x**2 - y**2 + u**3 - 3 * u * v**2
    G = x**2 + y**2 + u**2 + v**2 - R2
    nu = sp.Matrix([sp.diff(F, c) for c in COORDS])
    m = RADIAL_WEIGHT * sp.Matrix([sp.diff(G, c) for c in COORDS])
    m = m.applyfunc(sp.nsimplify)
    H = sp.hessian(F, COORDS)
    D = sp.zeros(4, 4)
    for k in range(4):
        for j in range(4):
            D[k, j] = sum(
                sp.LeviCivita(k, j, a, b) * m[a] * nu[b] for a in range(4) for b in range(4)
            )
    HD = H * D
    return ((HD + HD.T) / 2).applyfunc(sp.expand)


@lru_cache(maxsize=None)
def _restricted_symbolic() -> tuple[sp.Expr, sp.Expr, sp.Expr]:
    x, y, u, v = COORDS
    Om = _symbolic_omega()
    V1 = sp.Matrix([-(v - 3 * u * v) / (2 * x), -(v + 3 * u * v) / (2 * y), 0, 1])
    V2 = sp.Matrix([-(2 * u + 3 * u**2 - 3 * v**2) / (4 * x), -(2 * u - 3 * u**2 + 3 * v**2) / (4 * y), 1, 0])
    coeffs = [(V1.T * Om * V1)[0], 2 * (V1.T * Om * V2)[0], (V2.T * Om * V2)[0]]
    A = R2 - u**2 - v**2  # x^2 + y^2
    B = -(u**3 - 3 * u * v**2)  # x^2 - y^2
    out = []
    for c, factor in zip(coeffs, (v, u, v)):
        e = sp.expand(sp.cancel(c * x * y))
        poly = sp.Poly(e, x, y)
        acc = 0
        for (i, j), cf in poly.terms():
            if i % 2 or j % 2:
                raise ValueError("xy-scaled coefficient is not even in x and y")
            acc += cf * ((A + B) / 2) ** (i // 2) * ((A - B) / 2) ** (j // 2)
        q, rem = sp.div(sp.expand(acc), factor, u, v)
        if rem != 0:
            raise ValueError("axis factor does not divide the coefficient")
        out.append(sp.expand(q))
    return tuple(out)


def restricted_omegas(r) -> OmegaRestricted:
    """Restricted coefficients ``(Omega_1, Omega_2, Omega_3)`` as polynomials in u, v.

    ``r`` may be a float, a sympy number, or the symbol ``r`` itself.
    """
    if isinstance(r, sp.Symbol):
        sub = R_**2
        rv = None
    else:
        if not float(r) > 0:
            raise InvalidParameter("radius must be positive")
        sub = sp.nsimplify(r) ** 2 if isinstance(r, sp.Basic) else sp.Float(float(r) ** 2, 17)
        rv = float(r)
    o1, o2, o3 = (sp.expand(e.subs(R2, sub)) for e in _restricted_symbolic())
    return OmegaRestricted(o1, o2, o3, rv)


# ---------------------------------------------------------------------------
# Stored elimination data for r = 1/sqrt(10)

_Q = sp.Rational

THETA = (
    _Q(3, 50) - _Q(3, 2) * W + _Q(97, 10) * W**2 - 15 * W**3 - _Q(3, 10) * Z + _Q(57, 10) * W * Z - 27 * W**2 * Z,
    -_Q(6, 25) - _Q(6, 5) * W + _Q(67, 5) * W**2 - 21 * W**3 + _Q(18, 5) * Z + 12 * W * Z - 27 * W**2 * Z
    - _Q(87, 5) * Z**2 - 27 * W * Z**2 + 27 * Z**3,
    -_Q(6, 25) + _Q(12, 5) * W - _Q(67, 10) * W**2 + 6 * W**3 + _Q(12, 5) * Z - _Q(127, 5) * W * Z
    + 72 * W**2 * Z - _Q(27, 10) * Z**2 + 18 * W * Z**2,
)

G1_COEFFS = (4665600000, -7251120000, 4524012000, -1418476000, 227180200, -16427260, 355500, 2457)

G2 = (
    -272440432411875 + 651925265295213 * W + 3881340837877779 * Z + 6558340381939640 * Z**2
    - 389422787482597000 * Z**3 + 2318821632923662800 * Z**4 - 5434755866556408000 * Z**5
    + 4628749229159040000 * Z**6
)

# theta_i pulls back to scale * Omega_j: (i, j, scale), indices from 1.
THETA_PAIRING = ((1, 1, 1), (2, 3, 4), (3, 2, 2))

SIGMA = 1289 - 216 * sp.sqrt(35)
Z1_EXACT = _Q(1, 20)
W1_EXACT = _Q(3, 20)
Z2_EXACT = (67 - sp.cbrt(13**5 / SIGMA) - sp.cbrt(13 * SIGMA)) / 240
W2_EXACT = (
    SIGMA ** _Q(-5, 3)
    / 720
    * (
        sp.cbrt(13) * (556848 * sp.sqrt(35) - 3294481)
        + sp.cbrt(13) ** 2 * sp.cbrt(SIGMA) * (2808 * sp.sqrt(35) - 16757)
        - sp.cbrt(SIGMA) ** 2 * (14472 * sp.sqrt(35) - 86363)
    )
)


def closed_form_roots(digits: int = 30) -> dict[str, float]:
    """The two positive G1 roots and their w partners from radicals."""
    return {k: float(sp.N(v, digits)) for k, v in (("z1", Z1_EXACT), ("w1", W1_EXACT), ("z2", Z2_EXACT), ("w2", W2_EXACT))}


@dataclass(frozen=True)
class ThetaSystem:
    theta: tuple = THETA
    g1_coeffs: tuple = G1_COEFFS
    g2: sp.Expr = G2
    pairing: tuple = THETA_PAIRING
    r2: sp.Rational = DEFAULT_R2

    @property
    def g1(self) -> sp.Expr:
        n = len(self.g1_coeffs) - 1
        return sum(c * Z ** (n - k) for k, c in enumerate(self.g1_coeffs))

    def _fns(self):
        return _theta_fns(self)

    def evaluate(self, w, z) -> np.ndarray:
        return np.stack([np.broadcast_to(f(w, z), np.broadcast(w, z).shape) for f in self._fns()[0]], axis=-1)

    def g1_value(self, z):
        return np.polyval(np.array(self.g1_coeffs, float), z)

    def g2_value(self, w, z):
        return self._fns()[1](w, z)

    def solve_w(self, z: float) -> float:
        """The unique w with ``G2(w, z) = 0`` (G2 is linear in w)."""
        p = sp.Poly(self.g2, W)
        a1 = sp.lambdify(Z, p.coeff_monomial(W), "math")
        a0 = sp.lambdify(Z, p.coeff_monomial(1), "math")
        return -a0(z) / a1(z)

    def reduction_difference(self) -> list[sp.Expr]:
        """``rho^*(Theta_i) - scale * Omega_j`` as exact polynomials (all zero when sound)."""
        om = restricted_omegas(sp.sqrt(self.r2)).exprs()
        out = []
        for i, j, scale in self.pairing:
            pulled = self.theta[i - 1].subs({W: U**2, Z: V**2}, simultaneous=True)
            out.append(sp.expand(pulled - scale * om[j - 1]))
        return out

    def reduction_residual(self, u, v) -> float:
        """Largest numeric deviation of the pull-back identity at sample points."""
        om = restricted_omegas(float(sp.sqrt(self.r2)))
        vals = om(u, v)
        th = self.evaluate(np.asarray(u) ** 2, np.asarray(v) ** 2)
        err = 0.0
        for i, j, scale in self.pairing:
            err = max(err, float(np.max(np.abs(th[..., i - 1] - scale * vals[..., j - 1]))))
        return err

    def corrupted(self, index: int = 0, delta=_Q(1, 1000)) -> "ThetaSystem":
        """A copy with the constant term of one Theta perturbed (negative control)."""
        th = list(self.theta)
        th[index] = th[index] + delta
        return replace(self, theta=tuple(th))


@lru_cache(maxsize=None)
def _theta_fns(ts: ThetaSystem):
    return [sp.lambdify((W, Z), t, "numpy") for t in ts.theta], sp.lambdify((W, Z), ts.g2, "numpy")


# ---------------------------------------------------------------------------
# Univariate real root isolation


def _taylor_shift(c: list[Fraction], a: Fraction) -> list[Fraction]:
    """Coefficients (ascending) of ``p(x + a)``."""
    c = list(c)
    n = len(c)
    for i in range(n - 1):
        for k in range(n - 2, i - 1, -1):
            c[k] += a * c[k + 1]
    return c


def _variations(c) -> int:
    signs = [x > 0 for x in c if x != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _descartes_interval(asc: list[Fraction], a: Fraction, b: Fraction) -> int:
    """Sign variations bounding the number of roots in the open interval (a, b)."""
    # p(a + (b - a) y) on (0, 1), then y = 1/(1 + t) maps it to (0, inf).
    c = _taylor_shift(asc, a)
    h = b - a
    c = [ck * h**k for k, ck in enumerate(c)]
    c = _taylor_shift(c[::-1], Fraction(1))
    return _variations(c)


def _eval_asc(asc, x):
    acc = 0 * x
    for ck in reversed(asc):
        acc = acc * x + ck
    return acc


def isolate_real_roots(coeffs, lo=None, hi=None, tol: float = 1e-14) -> list[float]:
    """Real roots of a polynomial with rational coefficients.

    ``coeffs`` are given highest degree first.  Roots are isolated exactly by
    Descartes' rule with bisection over rationals, narrowed to width ``tol``
    and finished with a few Newton steps in floating point.  Repeated roots
    are handled by working with the square-free part.
    """
    poly = sp.Poly([sp.Rational(c) for c in coeffs], Z)
    if poly.degree() < 1:
        return []
    sqf = sp.Poly(poly.sqf_part(), Z)
    desc = [Fraction(int(sp.fraction(c)[0]), int(sp.fraction(c)[1])) for c in sqf.all_coeffs()]
    asc = desc[::-1]
    bound = 1 + max(abs(c / desc[0]) for c in desc[1:]) if len(desc) > 1 else Fraction(1)
    a0 = Fraction(lo) if lo is not None else -bound
    b0 = Fraction(hi) if hi is not None else bound
    roots: list[float] = []
    exact: list[Fraction] = []
    for end in (a0, b0):
        if _eval_asc(asc, end) == 0:
            exact.append(end)
    stack = [(a0, b0)]
    isolated = []
    while stack:
        a, b = stack.pop()
        nv = _descartes_interval(asc, a, b)
        if nv == 0:
            continue
        if nv == 1:
            isolated.append((a, b))
            continue
        mid = (a + b) / 2
        if _eval_asc(asc, mid) == 0:
            exact.append(mid)
        stack.append((a, mid))
        stack.append((mid, b))
    fd = np.array([float(c) for c in desc])
    dfd = np.polyder(fd)
    dasc = [k * c for k, c in enumerate(asc)][1:]
    for a, b in isolated:
        # Sign just right of a; when a is itself a (simple) root, that is the sign of p'(a).
        pa = _eval_asc(asc, a)
        sa = pa > 0 if pa != 0 else _eval_asc(dasc, a) > 0
        while b - a > tol:
            mid = (a + b) / 2
            vm = _eval_asc(asc, mid)
            if vm == 0:
                a = b = mid
                break
            if (vm > 0) == sa:
                a = mid
            else:
                b = mid
        x = float((a + b) / 2)
        for _ in range(3):
            d = np.polyval(dfd, x)
            if d == 0:
                break
            x_new = x - np.polyval(fd, x) / d
            if not float(a) - tol <= x_new <= float(b) + tol:
                break
            x = x_new
        roots.append(x)
    roots.extend(float(e) for e in exact)
    return sorted(set(roots))


# ---------------------------------------------------------------------------
# Certification of the umbilic set


def feasible_wz(r2: float, w: float, z: float, margin: float = 0.0) -> bool:
    """Whether ``(u^2, v^2) = (w, z)`` corresponds to a point of the hexagon."""
    if w < -margin or z < -margin:
        return False
    A = r2 - w - z
    if A < -margin:
        return False
    return A * A >= max(w, 0.0) * (w - 3 * z) ** 2 - margin


@dataclass(frozen=True)
class Candidate:
    w: float
    z: float
    residual: float
    feasible: bool
    reason: str


@dataclass
class UmbilicCertificate:
    r: float
    method: str
    candidates: list[Candidate] = field(default_factory=list)
    axis_candidates: list[Candidate] = field(default_factory=list)
    sweep_points: int = 0
    sweep_minima: int = 0
    sweep_min_gap_off_known: float = float("inf")
    loci_min_gap: dict = field(default_factory=dict)
    extra_umbilics: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        algebra = all(not c.feasible for c in self.candidates + self.axis_candidates)
        return algebra and not self.extra_umbilics


def groebner_candidates(ts: ThetaSystem | None = None, r2: float | None = None) -> list[Candidate]:
    """Common zeros from the stored basis: roots of G1 back-substituted into G2."""
    ts = ts or ThetaSystem()
    r2 = float(ts.r2) if r2 is None else r2
    out = []
    for z in isolate_real_roots(ts.g1_coeffs):
        w = ts.solve_w(z)
        res = float(np.max(np.abs(ts.evaluate(w, z))))
        feas = feasible_wz(r2, w, z)
        if z < 0 or w < 0:
            reason = "negative square"
        elif w + z > r2:
            reason = "off sphere: w + z > r^2"
        elif not feas:
            reason = "outside hexagon"
        else:
            reason = "feasible"
        out.append(Candidate(w, z, res, feas, reason))
    return out


@lru_cache(maxsize=None)
def _symbolic_wz():
    o = OmegaRestricted(*_restricted_symbolic())
    P = tuple(_even_to_wz(e) for e in o.exprs())
    res = sp.Poly(sp.resultant(P[0], P[2], W), Z)
    return P, res


def elimination_candidates(r: float) -> list[Candidate]:
    """Common zeros of the three restricted polynomials via a resultant in w."""
    r2 = float(r) ** 2
    P, res = _symbolic_wz()
    rc = np.array([float(c.subs(R2, r2)) for c in res.all_coeffs()])
    Pf = [sp.lambdify((W, Z), p.subs(R2, r2), "numpy") for p in P]
    Pw1 = sp.Poly(P[0].subs(R2, r2), W)
    scale = np.max(np.abs(rc))
    rc = np.trim_zeros(rc / scale, "f")
    out = []
    for zc in np.roots(rc):
        if abs(zc.imag) > 1e-8 * max(1.0, abs(zc)):
            continue
        z = float(zc.real)
        wcoef = np.array([float(c.subs(Z, z)) for c in Pw1.all_coeffs()])
        for wc in np.roots(wcoef):
            if abs(wc.imag) > 1e-8 * max(1.0, abs(wc)):
                continue
            w = float(wc.real)
            vals = np.array([f(w, z) for f in Pf])
            size = 1 + abs(w) ** 3 + abs(z) ** 3
            resid = float(np.max(np.abs(vals))) / size
            if resid > 1e-6:
                continue
            feas = feasible_wz(r2, w, z)
            if z < 0 or w < 0:
                reason = "negative square"
            elif w + z > r2:
                reason = "off sphere: w + z > r^2"
            elif not feas:
                reason = "outside hexagon"
            else:
                reason = "feasible"
            out.append(Candidate(w, z, resid, feas, reason))
    return out


def axis_candidates(r: float) -> list[Candidate]:
    """Zeros on ``v = 0`` (u != 0) and ``u = 0`` (v != 0) inside the hexagon."""
    o = restricted_omegas(r)
    r2 = float(r) ** 2
    out = []
    # v = 0: only the mixed coefficient survives.
    p2 = sp.Poly(o.omega2.subs(V, 0), U)
    for ur in np.roots([float(c) for c in p2.all_coeffs()]):
        if abs(ur.imag) > 1e-10 or abs(ur.real) < 1e-12:
            continue
        u = float(ur.real)
        a, b = radicands(r, u, 0.0)
        feas = bool(a > 0 and b > 0)
        out.append(Candidate(u * u, 0.0, float(abs(p2.eval(u))), feas, "v=0 " + ("inside" if feas else "outside hexagon")))
    # u = 0: both pure coefficients must vanish.
    p1 = sp.Poly(o.omega1.subs(U, 0), V)
    p3 = sp.Poly(o.omega3.subs(U, 0), V)
    for vr in np.roots([float(c) for c in p1.all_coeffs()]):
        if abs(vr.imag) > 1e-10 or abs(vr.real) < 1e-12:
            continue
        v = float(vr.real)
        res3 = float(abs(p3.eval(v)))
        if res3 > 1e-8 * (1 + abs(v)) * float(r) ** 4:
            continue
        a, b = radicands(r, 0.0, v)
        feas = bool(a > 0 and b > 0)
        out.append(Candidate(0.0, v * v, res3, feas, "u=0 " + ("inside" if feas else "outside hexagon")))
    return out


def known_umbilics(r: float) -> np.ndarray:
    c = float(r) / np.sqrt(2)
    return np.array([[sx * c, sy * c, 0.0, 0.0] for sx in (1, -1) for sy in (1, -1)])


def _gap_sq_at(s: LinkSurface, X):
    S, _, _ = shape_matrix(s, X)
    a, b, c = S[..., 0, 0], S[..., 0, 1], S[..., 1, 1]
    k = 0.5 * (a + c)
    R = np.hypot(0.5 * (a - c), b)
    return (2 * R / (1 + np.abs(k + R) + np.abs(k - R))) ** 2


def _refine_minimum(s: LinkSurface, X0) -> tuple[np.ndarray, float]:
    """Minimise the squared relative gap in tangent-plane coordinates at X0."""
    nu, mu = s.f.gradient(X0), s.g.gradient(X0)
    t1, t2 = tangent_frame(nu, mu)

    def lift(ab):
        Y, _, ok = project_batch(s, X0 + ab[0] * t1 + ab[1] * t2)
        return Y if ok else None

    def obj(ab):
        Y = lift(ab)
        return 1.0 if Y is None else float(_gap_sq_at(s, Y))

    step = 2e-3 * s.r
    res = minimize(
        obj,
        np.zeros(2),
        method="Nelder-Mead",
        options={"xatol": 1e-13 * s.r, "fatol": 1e-30, "maxiter": 2000, "initial_simplex": [[0, 0], [step, 0], [0, step]]},
    )
    Y = lift(res.x)
    Y = X0 if Y is None else Y
    return Y, float(np.sqrt(obj(res.x)))


def _workers(default: int | None = None) -> int:
    env = os.environ.get("CURVATURA_THREADS")
    n = default or os.cpu_count() or 1
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            pass
    return max(1, n)


def sweep_gap(s: LinkSurface, step: float | None = None, workers: int | None = None):
    """Grid sweep of the relative gap over the (+,+) chart.

    The other three charts are images of this one under ``G1, G2`` which
    preserve principal data, so a single chart suffices.  Returns
    ``(points, gap_grid, local_minima)``.
    """
    r = s.r
    step = r / 200 if step is None else step
    n = int(np.ceil(2 * r / step)) + 1
    g = np.linspace(-r, r, n)
    uu, vv = np.meshgrid(g, g, indexing="ij")
    a, b = radicands(r, uu, vv, s.q)
    inside = (a >= 0) & (b >= 0)
    uv = np.column_stack([uu[inside], vv[inside]])
    X = chart_phi(s, "++", uv)
    # Points exactly on a seam have a well defined but one-sided frame; keep them.
    chunks = np.array_split(np.arange(len(X)), max(1, _workers(workers)))
    gap = np.empty(len(X))

    def work(idx):
        gap[idx] = np.sqrt(_gap_sq_at(s, X[idx]))

    with ThreadPoolExecutor(max_workers=len(chunks)) as ex:
        list(ex.map(work, chunks))
    grid = np.full(uu.shape, np.inf)
    grid[inside] = gap
    mins = (grid == minimum_filter(grid, size=3, mode="constant", cval=np.inf)) & inside
    idx = np.argwhere(mins)
    minima = [(chart_phi(s, "++", [uu[i, j], vv[i, j]]), grid[i, j]) for i, j in idx]
    return len(X), grid, minima


def sample_loci(s: LinkSurface, n: int = 1000) -> dict[str, np.ndarray]:
    """Surface samples on the loci x = 0, y = 0, u = 0 and v = 0 (chart (+,+))."""
    r = s.r
    out = {}
    th_x = np.linspace(-np.pi / 6, np.pi / 6, n)  # x = 0 arc through theta = 0
    th_y = np.linspace(np.pi / 6, np.pi / 2, n)  # y = 0 arc through theta = pi/3
    for name, th in (("x=0", th_x), ("y=0", th_y)):
        out[name] = hexagon_boundary_lift(s, th)
    for name, ang in (("u=0", np.pi / 2), ("v=0", 0.0)):
        lo = -hexagon_boundary_radius(r, ang + np.pi, s.q)
        hi = hexagon_boundary_radius(r, ang, s.q)
        t = np.linspace(lo, hi, n)
        uv = np.column_stack([t * np.cos(ang), t * np.sin(ang)])
        out[name] = chart_phi(s, "++", uv)
    return out


def certify_umbilics(
    s: LinkSurface,
    theta: ThetaSystem | None = None,
    sweep: bool = True,
    sweep_step: float | None = None,
    loci_samples: int = 1000,
    workers: int | None = None,
) -> UmbilicCertificate:
    """Run the three-part certificate that the known four are the only umbilics."""
    if (s.p, s.q) != (2, 3):
        raise UnsupportedExponents("umbilic algebra is specialised to (p, q) = (2, 3)")
    r = s.r
    r2 = r * r
    use_stored = abs(r2 - float(DEFAULT_R2)) <= 1e-15
    if use_stored:
        ts = theta or ThetaSystem()
        cert = UmbilicCertificate(r, "stored-groebner", groebner_candidates(ts, r2))
    else:
        cert = UmbilicCertificate(r, "resultant-elimination", elimination_candidates(r))
    cert.axis_candidates = axis_candidates(r)
    known = known_umbilics(r)
    tol_known = 1e-6 * r
    if sweep:
        npts, _, minima = sweep_gap(s, sweep_step, workers)
        cert.sweep_points = npts
        cert.sweep_minima = len(minima)
        for X0, g0 in minima:
            if g0 > 0.05:
                continue
            Y, gmin = _refine_minimum(s, X0)
            # Minima that refine onto a known umbilic belong to its gap cone.
            if np.min(np.linalg.norm(known - Y, axis=1)) <= 1e-3 * r:
                continue
            cert.sweep_min_gap_off_known = min(cert.sweep_min_gap_off_known, gmin)
            if gmin <= 1e-6:
                cert.extra_umbilics.append(Y)
    for name, pts in sample_loci(s, loci_samples).items():
        far = np.min(np.linalg.norm(pts[:, None, :] - known[None], axis=-1), axis=1) > tol_known
        gap = np.sqrt(_gap_sq_at(s, pts[far]))
        cert.loci_min_gap[name] = float(gap.min()) if gap.size else float("inf")
        if gap.size and gap.min() <= EPS_UMB:
            cert.extra_umbilics.append(pts[far][np.argmin(gap)])
    return cert


# ---------------------------------------------------------------------------
# Local data at an umbilic


@dataclass(frozen=True)
class MongeCoefficients:
    """3-jet of the two height functions in the adapted chart.

    First height ``k/2 (u^2+v^2) + a/6 u^3 + b/2 u v^2 + c/6 v^3``, second
    ``alpha/2 u^2 + beta u v + gamma/2 v^2 + delta/6 u^3 + epsilon/2 u^2 v
    + zeta/2 u v^2 + eta/6 v^3``.  ``m`` and ``n`` are the first-order
    coefficients of the normal ratio ``nu_Y / nu_X`` along the chart.
    """

    k: float
    a: float
    b: float
    c: float
    alpha: float
    beta: float
    gamma: float
    delta: float
    epsilon: float
    zeta: float
    eta: float
    m: float = 0.0
    n: float = 0.0

    def cubic(self) -> np.ndarray:
        """Slope cubic coefficients, highest degree first."""
        a, b, c, al, be, ga, m, n = self.a, self.b, self.c, self.alpha, self.beta, self.gamma, self.m, self.n
        return np.array(
            [b + be * n, be * m - c - (ga - al) * n, -(2 * b - a + (ga - al) * m + be * n), -be * m]
        )


@lru_cache(maxsize=None)
def _reference_jet(r: float) -> MongeCoefficients:
    rr = sp.nsimplify(r) if isinstance(r, sp.Basic) else sp.Float(r, 17)
    f = rr / sp.sqrt(2) - sp.sqrt(rr**2 - U**2 - U**3 - V**2 + 3 * U * V**2) / sp.sqrt(2)
    g = rr / sp.sqrt(2) - sp.sqrt(rr**2 - U**2 + U**3 - V**2 - 3 * U * V**2) / sp.sqrt(2)

    def d(e, i, j):
        return float(sp.diff(e, U, i, V, j).subs({U: 0, V: 0})) if i + j else float(e.subs({U: 0, V: 0}))

    fuu, fuv, fvv = d(f, 2, 0), d(f, 1, 1), d(f, 0, 2)
    if abs(fuu - fvv) > 1e-12 * (1 + abs(fuu)) or abs(fuv) > 1e-12 * (1 + abs(fuu)):
        raise NotAnUmbilic("first height is not umbilic at the chart centre")
    # nu = (2x, -2y, ...); along the chart x = r/sqrt2 - f, y = r/sqrt2 - g.
    x = rr / sp.sqrt(2) - f
    y = rr / sp.sqrt(2) - g
    ratio = -y / x
    return MongeCoefficients(
        k=fuu,
        a=d(f, 3, 0),
        b=d(f, 1, 2),
        c=d(f, 0, 3),
        alpha=d(g, 2, 0),
        beta=d(g, 1, 1),
        gamma=d(g, 0, 2),
        delta=d(g, 3, 0),
        epsilon=d(g, 2, 1),
        zeta=d(g, 1, 2),
        eta=d(g, 0, 3),
        m=d(ratio, 1, 0),
        n=d(ratio, 0, 1),
    )


def _match_umbilic(r: float, X, tol: float = 1e-8) -> int:
    known = known_umbilics(r)
    dist = np.linalg.norm(known - np.asarray(X, float), axis=1)
    i = int(np.argmin(dist))
    if dist[i] > tol * max(1.0, r):
        raise NotAnUmbilic(f"{np.asarray(X)} is not one of the four umbilics")
    return i


def monge_chart_jet(s: LinkSurface, umbilic) -> MongeCoefficients:
    """3-jet at an umbilic in the chart whose heights point toward the centre.

    The reference jet is computed at ``(r/sqrt2)(1,1,0,0)``.  The other three
    umbilics are its images under ``G1``, ``G2`` and ``G1 G2``, which only flip
    the signs of x and y; transporting the chart by the same map leaves every
    coefficient unchanged.
    """
    if (s.p, s.q) != (2, 3):
        raise UnsupportedExponents("Monge data implemented for (p, q) = (2, 3)")
    i = _match_umbilic(s.r, umbilic)
    jet = _reference_jet(float(s.r))
    g = [np.eye(4), GAMMA1, GAMMA2, GAMMA1 @ GAMMA2][i]
    ref = known_umbilics(s.r)[0]
    assert np.allclose(g @ ref, known_umbilics(s.r)[i])
    return jet


def _solve_cubic(c3, c2, c1, c0) -> list[float]:
    """Real roots of a cubic: one closed-form root, deflation, stable quadratic."""
    coeffs = np.array([c3, c2, c1, c0], float)
    scale = np.max(np.abs(coeffs))
    if scale < 1e-14:
        raise DegenerateCubic("all slope-cubic coefficients vanish")
    coeffs = coeffs / scale
    if abs(coeffs[0]) < 1e-14:
        return _solve_quadratic(*coeffs[1:])
    a, b, c = coeffs[1:] / coeffs[0]
    p = b - a * a / 3
    q = 2 * a**3 / 27 - a * b / 3 + c
    disc = (q / 2) ** 2 + (p / 3) ** 3
    if disc > 0:
        sq = np.sqrt(disc)
        t = np.cbrt(-q / 2 + sq) + np.cbrt(-q / 2 - sq)
    elif p == 0:
        t = 0.0
    else:
        m = 2 * np.sqrt(-p / 3)
        th = np.arccos(np.clip(3 * q / (p * m), -1, 1)) / 3
        cands = [m * np.cos(th - 2 * np.pi * k / 3) for k in range(3)]
        t = max(cands, key=abs)
    x0 = _newton(coeffs, t - a / 3)
    # Deflate: coeffs / (x - x0).
    q2 = np.array([coeffs[0], coeffs[1] + x0 * coeffs[0], 0.0])
    q2[2] = coeffs[2] + x0 * q2[1]
    rest = [_newton(coeffs, x) for x in _solve_quadratic(*q2)]
    return sorted([x0] + rest)


def _solve_quadratic(a, b, c) -> list[float]:
    if abs(a) < 1e-14:
        return [] if abs(b) < 1e-14 else [-c / b]
    disc = b * b - 4 * a * c
    if disc < -1e-14 * max(1.0, b * b):
        return []
    sq = np.sqrt(max(disc, 0.0))
    qq = -0.5 * (b + np.copysign(sq, b) if b != 0 else sq)
    if qq == 0:
        return [0.0, 0.0] if disc <= 0 else [sq / (2 * a), -sq / (2 * a)]
    return sorted([qq / a, c / qq])


def _newton(coeffs, x, iters: int = 4) -> float:
    d = np.polyder(coeffs)
    for _ in range(iters):
        fx, dx = np.polyval(coeffs, x), np.polyval(d, x)
        if dx == 0 or fx == 0:
            break
        x = x - fx / dx
    return float(x)


def separatrix_slopes(j: MongeCoefficients) -> list[float]:
    """Real roots ``p = dv/du`` of the separatrix slope cubic, ascending."""
    return [p + 0.0 for p in _solve_cubic(*j.cubic())]


def umbilic_index(s: LinkSurface, umbilic, radius_small: float | None = None, samples: int = 720, field: str = "max") -> Fraction:
    """Index of the principal line field around an umbilic by winding number."""
    X = np.asarray(umbilic, float)
    r = s.r
    radius_small = 1e-2 * r if radius_small is None else radius_small
    if not 1e-3 * r * (1 - 1e-12) <= radius_small <= 1e-1 * r * (1 + 1e-12):
        raise InvalidParameter("radius_small must lie in [1e-3 r, 1e-1 r]")
    label = chart_label(X)
    th = np.linspace(0, 2 * np.pi, samples, endpoint=False)
    uv = X[2:] + radius_small * np.column_stack([np.cos(th), np.sin(th)])
    P = chart_phi(s, label, uv)
    d_max, d_min, *_ = principal_frames(s, P)
    d = d_max if field == "max" else d_min
    ang = np.arctan2(d[:, 3], d[:, 2])
    inc = np.diff(np.append(ang, ang[0]))
    inc = np.mod(inc + np.pi / 2, np.pi) - np.pi / 2
    total = inc.sum() / (2 * np.pi)
    half = round(2 * total) / 2
    if abs(total - half) > 0.05:
        raise WindingAmbiguous(f"winding {total:.4f} is not close to a half-integer")
    return Fraction(half).limit_denominator(2)


@dataclass(frozen=True)
class UmbilicReport:
    position: np.ndarray
    type_label: str
    index: Fraction
    slopes: tuple[float, ...]
    radius: float

    def to_dict(self) -> dict:
        return {
            "position": [float(c) for c in self.position],
            "type": self.type_label,
            "index": str(self.index),
            "slopes": [float(p) for p in self.slopes],
            "radius": float(self.radius),
        }


def classify(slopes, index: Fraction) -> str:
    if len(slopes) == 3 and index == Fraction(-1, 2):
        return "D3"
    if len(slopes) == 1 and index == Fraction(1, 2):
        return "D5"
    if len(slopes) == 3 and index == Fraction(1, 2):
        return "D4"
    return "unknown"


def find_umbilics(
    s: LinkSurface,
    sweep: bool = True,
    sweep_step: float | None = None,
    theta: ThetaSystem | None = None,
    return_certificate: bool = False,
    workers: int | None = None,
):
    """The four umbilics with slopes, index and type, after certification."""
    if (s.p, s.q) != (2, 3):
        raise UnsupportedExponents("umbilic algebra is specialised to (p, q) = (2, 3)")
    cert = certify_umbilics(s, theta=theta, sweep=sweep, sweep_step=sweep_step, workers=workers)
    if not cert.ok:
        raise CertificationFailure(f"umbilic certificate failed: {cert}")
    pts = known_umbilics(s.r)
    # Condition (a): u = v = 0 makes the restricted coefficients vanish identically.
    reports = []
    for P in pts:
        Y, _, _ = project_batch(s, P)
        jet = monge_chart_jet(s, Y)
        slopes = tuple(separatrix_slopes(jet))
        idx = umbilic_index(s, Y)
        reports.append(UmbilicReport(Y, classify(slopes, idx), idx, slopes, s.r))
    return (reports, cert) if return_certificate else reports
