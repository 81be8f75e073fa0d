"""Polynomial scalar fields on R^4 and the link surfaces they cut out.

The surfaces handled here are transversal intersections ``{f = 0} & {g = 0}``
with ``f = Re((x+iy)^p + (u+iv)^q)`` and ``g = |X|^2 - r^2``.  For ``p = 2``
the surface is a union of four graphs over a curved hexagon in the
``uv``-plane, which is what :func:`chart_phi` and :func:`hexagon_contains`
expose.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from math import comb
from typing import Sequence

import numpy as np
import sympy as sp
from scipy.optimize import brentq

from .errors import (
    DegenerateNormalFrame,
    InvalidParameter,
    NoConvergence,
    OutOfChart,
    UnsupportedExponents,
)

COORDS = sp.symbols("x y u v", real=True)
X_, Y_, U_, V_ = COORDS

EPS_GRAM = 1e-10
CHART_CLAMP = 1e-14
MAX_NEWTON = 50

# Levi-Civita symbol in four indices; eps[i,j,k,l] a_i b_j c_k d_l = det[a b c d].
LEVI_CIVITA = np.zeros((4, 4, 4, 4))
for _perm in permutations(range(4)):
    LEVI_CIVITA[_perm] = round(np.linalg.det(np.eye(4)[list(_perm)]))


def _broadcast(values, shape):
    return np.broadcast_to(np.asarray(values, dtype=float), shape)


class ScalarField4:
    """A polynomial ``R^4 -> R`` with exact gradient and Hessian.

    Evaluation accepts a single point of shape ``(4,)`` or a batch
    ``(..., 4)``; results carry the batch shape.
    """

    def __init__(self, expr, name: str = "f"):
        self.name = name
        self.expr = sp.expand(sp.sympify(expr))
        self.grad_exprs = [sp.expand(sp.diff(self.expr, s)) for s in COORDS]
        self.hess_exprs = [[sp.diff(g, s) for s in COORDS] for g in self.grad_exprs]
        self._value = sp.lambdify(COORDS, self.expr, "numpy")
        self._grad = sp.lambdify(COORDS, self.grad_exprs, "numpy")
        self._pairs = [(i, j) for i in range(4) for j in range(i, 4)]
        self._hess = sp.lambdify(COORDS, [self.hess_exprs[i][j] for i, j in self._pairs], "numpy")

    def __repr__(self):
        return f"ScalarField4({self.name} = {self.expr})"

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        out = _broadcast(self._value(*np.moveaxis(X, -1, 0)), X.shape[:-1])
        return float(out) if out.ndim == 0 else np.array(out)

    def gradient(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        vals = self._grad(*np.moveaxis(X, -1, 0))
        return np.stack([_broadcast(g, X.shape[:-1]) for g in vals], axis=-1)

    def hessian(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        vals = self._hess(*np.moveaxis(X, -1, 0))
        H = np.empty(X.shape[:-1] + (4, 4))
        for (i, j), h in zip(self._pairs, vals):
            H[..., i, j] = h
            H[..., j, i] = h
        return H

    def substituted(self, mapping: dict, name: str | None = None) -> "ScalarField4":
        return ScalarField4(self.expr.subs(mapping, simultaneous=True), name or self.name)


def real_part_power(a, b, n: int):
    """Binomial expansion of ``Re((a + i b)^n)`` as a polynomial."""
    return sum(
        comb(n, k) * (-1) ** (k // 2) * a ** (n - k) * b**k for k in range(0, n + 1, 2)
    )


@dataclass(frozen=True)
class LinkSurface:
    """The intersection of ``{f = 0}`` with the sphere ``{g = 0}`` of radius r."""

    f: ScalarField4
    g: ScalarField4
    r: float
    p: int = 2
    q: int = 3

    @property
    def eps_surf(self) -> float:
        return 1e-12 * max(1.0, self.r**2)

    def residuals(self, X) -> np.ndarray:
        """``(F, G)`` stacked along a trailing axis of length two."""
        return np.stack([np.asarray(self.f(X)), np.asarray(self.g(X))], axis=-1)

    def on_surface(self, X, tol: float | None = None) -> bool:
        tol = self.eps_surf if tol is None else tol
        return bool(np.all(np.abs(self.residuals(X)) <= tol))

    def rescaled(self, s: float) -> "LinkSurface":
        """The image ``s * T`` of this surface under the homothety ``X -> s X``."""
        if s <= 0:
            raise InvalidParameter("scale must be positive")
        mapping = {c: c / s for c in COORDS}
        f = self.f.substituted(mapping, self.f.name)
        g = ScalarField4(sp.expand(s**2 * self.g.expr.subs(mapping, simultaneous=True)), self.g.name)
        return LinkSurface(f, g, self.r * s, self.p, self.q)


def make_double_torus(r: float, p: int = 2, q: int = 3) -> LinkSurface:
    """Fields ``F = Re((x+iy)^p + (u+iv)^q)`` and ``G_r = |X|^2 - r^2``.

    With the default exponents this is the genus-two link
    ``F = x^2 - y^2 + u^3 - 3uv^2``.
    """
    if not r > 0:
        raise InvalidParameter(f"radius must be positive, got {r!r}")
    if int(p) != p or int(q) != q or p < 2 or q < 2:
        raise InvalidParameter(f"exponents must be integers >= 2, got ({p}, {q})")
    p, q = int(p), int(q)
    f_expr = real_part_power(X_, Y_, p) + real_part_power(U_, V_, q)
    g_expr = X_**2 + Y_**2 + U_**2 + V_**2 - sp.Float(float(r) ** 2, 17)
    return LinkSurface(ScalarField4(f_expr, "F"), ScalarField4(g_expr, "G"), float(r), p, q)


def grad_pair(s: LinkSurface, X) -> tuple[np.ndarray, np.ndarray]:
    """``(nu, mu) = (grad F, grad G)`` at X (single point or batch)."""
    return s.f.gradient(X), s.g.gradient(X)


def normal_gram(nu, mu) -> np.ndarray:
    """Gram determinant of the normalised pair ``{nu, mu}``: ``1 - cos^2``."""
    nu = np.asarray(nu, float)
    mu = np.asarray(mu, float)
    nn = np.linalg.norm(nu, axis=-1)
    nm = np.linalg.norm(mu, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.einsum("...i,...i->...", nu, mu) / (nn * nm)
    g = 1.0 - c**2
    return np.where((nn > 0) & (nm > 0), g, 0.0)


def cross4(a, b, c) -> np.ndarray:
    """The vector d with ``<d, w> = det[a b c w]`` for every w."""
    a, b, c = (np.moveaxis(np.asarray(t, float), -1, 0) for t in (a, b, c))

    def det3(i, j, k):
        return (
            a[i] * (b[j] * c[k] - b[k] * c[j])
            - a[j] * (b[i] * c[k] - b[k] * c[i])
            + a[k] * (b[i] * c[j] - b[j] * c[i])
        )

    return np.stack([-det3(1, 2, 3), det3(0, 2, 3), -det3(0, 1, 3), det3(0, 1, 2)], axis=-1)


def tangent_frame(nu, mu) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of ``span{nu, mu}^perp`` by Gram-Schmidt.

    The first vector is the normalised projection of the coordinate axis
    with the largest projection; the second completes the frame via the
    four-dimensional cross product.
    """
    nu = np.asarray(nu, float)
    mu = np.asarray(mu, float)
    n1 = nu / np.sqrt(np.sum(nu * nu, axis=-1, keepdims=True))
    m = mu - np.sum(mu * n1, axis=-1, keepdims=True) * n1
    n2 = m / np.sqrt(np.sum(m * m, axis=-1, keepdims=True))
    # For a projector the squared column norms are the diagonal entries.
    diag = 1.0 - n1 * n1 - n2 * n2
    k = np.argmax(diag, axis=-1)[..., None]
    n1k = np.take_along_axis(n1, k, axis=-1)
    n2k = np.take_along_axis(n2, k, axis=-1)
    ek = (np.arange(4) == k).astype(float)
    t1 = (ek - n1k * n1 - n2k * n2) / np.sqrt(np.take_along_axis(diag, k, axis=-1))
    t2 = cross4(n1, n2, t1)
    return t1, t2


@dataclass(frozen=True)
class SurfacePoint:
    position: np.ndarray
    nu: np.ndarray
    mu: np.ndarray
    tangent_basis: tuple[np.ndarray, np.ndarray] = field(repr=False)

    @property
    def gram(self) -> float:
        return float(normal_gram(self.nu, self.mu))

    @property
    def tangent_matrix(self) -> np.ndarray:
        """4x2 matrix whose columns are the tangent basis."""
        return np.column_stack(self.tangent_basis)


def surface_point(s: LinkSurface, X) -> SurfacePoint:
    """Wrap a point assumed to lie on the surface; no projection is done."""
    X = np.array(X, dtype=float)
    nu, mu = grad_pair(s, X)
    if normal_gram(nu, mu) < EPS_GRAM:
        raise DegenerateNormalFrame(f"gradients dependent at {X}")
    t1, t2 = tangent_frame(nu, mu)
    return SurfacePoint(X, nu, mu, (t1, t2))


def project_batch(s: LinkSurface, X0, max_iter: int = MAX_NEWTON, tol: float | None = None):
    """Gauss-Newton projection of many points onto ``{F = 0, G = 0}``.

    Returns ``(X, iterations, converged)``.  Each point gets one extra
    polishing step after it meets the tolerance.
    """
    X = np.array(X0, dtype=float, copy=True)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    tol = s.eps_surf if tol is None else tol
    n = X.shape[0]
    iters = np.zeros(n, dtype=int)
    done = np.zeros(n, dtype=bool)
    active = np.arange(n)
    for it in range(max_iter + 1):
        Xa = X[active]
        R = s.residuals(Xa)
        ok = np.max(np.abs(R), axis=-1) <= tol
        J = np.stack([s.f.gradient(Xa), s.g.gradient(Xa)], axis=-2)
        JJt = J @ np.swapaxes(J, -1, -2)
        try:
            lam = np.linalg.solve(JJt, R[..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        step = np.einsum("nki,nk->ni", J, lam)
        X[active] = Xa - step
        iters[active[~ok]] = it + 1
        done[active[ok]] = True
        active = active[~ok]
        if active.size == 0 or it == max_iter:
            break
    converged = done.copy()
    if active.size:
        R = s.residuals(X[active])
        converged[active] = np.max(np.abs(R), axis=-1) <= tol
    if single:
        return X[0], int(iters[0]), bool(converged[0])
    return X, iters, converged


def project_to_surface(s: LinkSurface, x0, max_iter: int = MAX_NEWTON) -> SurfacePoint:
    """Newton corrector onto the surface, returning a :class:`SurfacePoint`."""
    X, _, ok = project_batch(s, np.asarray(x0, float), max_iter=max_iter)
    if not ok or not np.all(np.isfinite(X)):
        raise NoConvergence(f"projection from {np.asarray(x0)} did not converge in {max_iter} iterations")
    return surface_point(s, X)


# ---------------------------------------------------------------------------
# The four graph charts of the p = 2 family over the uv-hexagon.

def _require_p2(s_or_p):
    p = s_or_p.p if isinstance(s_or_p, LinkSurface) else s_or_p
    if p != 2:
        raise UnsupportedExponents("graph charts exist only for p = 2")


def _cubic_term(u, v, q: int = 3):
    if q == 3:
        return u**3 - 3 * u * v**2
    return ((np.asarray(u) + 1j * np.asarray(v)) ** q).real


def radicands(r: float, u, v, q: int = 3):
    """The two chart radicands ``(2 x^2, 2 y^2)`` as functions of ``(u, v)``."""
    rho2 = u**2 + v**2
    c = _cubic_term(u, v, q)
    return r**2 - rho2 - c, r**2 - rho2 + c


def parse_signs(signs) -> tuple[int, int]:
    if isinstance(signs, str):
        if len(signs) != 2 or any(ch not in "+-" for ch in signs):
            raise InvalidParameter(f"bad chart label {signs!r}")
        return tuple(1 if ch == "+" else -1 for ch in signs)
    sx, sy = signs
    if sx not in (1, -1) or sy not in (1, -1):
        raise InvalidParameter(f"bad chart signs {signs!r}")
    return int(sx), int(sy)


CHARTS = ("++", "+-", "-+", "--")


def chart_phi(s: LinkSurface, signs, uv) -> np.ndarray:
    """Graph chart ``(±sqrt(R1/2), ±sqrt(R2/2), u, v)`` over the hexagon."""
    _require_p2(s)
    sx, sy = parse_signs(signs)
    uv = np.asarray(uv, dtype=float)
    u, v = uv[..., 0], uv[..., 1]
    a, b = radicands(s.r, u, v, s.q)
    clamp = CHART_CLAMP * max(1.0, s.r**2, s.r**s.q)
    if np.any(a < -clamp) or np.any(b < -clamp):
        raise OutOfChart(f"uv outside the hexagon (radicands {np.min(a):.3g}, {np.min(b):.3g})")
    x = sx * np.sqrt(np.maximum(a, 0.0) / 2.0)
    y = sy * np.sqrt(np.maximum(b, 0.0) / 2.0)
    return np.stack(np.broadcast_arrays(x, y, u, v), axis=-1)


def chart_label(X, tol: float = 0.0) -> str:
    """Sign label of the chart containing X; seam points count as ``+``."""
    x, y = float(X[0]), float(X[1])
    return ("+" if x >= -tol else "-") + ("+" if y >= -tol else "-")


@dataclass(frozen=True)
class HexagonLocation:
    kind: str  # "inside" | "boundary" | "outside"
    arcs: tuple[str, ...] = ()

    def __eq__(self, other):
        if isinstance(other, str):
            return self.kind == other
        return (self.kind, self.arcs) == (other.kind, other.arcs)

    __hash__ = object.__hash__


def hexagon_contains(r: float, uv, tol: float = 1e-12, q: int = 3) -> HexagonLocation:
    """Classify a uv point against the hexagon and name the boundary arc(s).

    ``X1..X3`` lie on the first radicand's zero set (where ``x = 0``) and
    ``Y1..Y3`` on the second's (``y = 0``); the corner points carry two names.
    """
    u, v = float(uv[0]), float(uv[1])
    a, b = radicands(r, u, v, q)
    if a < -tol or b < -tol:
        return HexagonLocation("outside")
    arcs = []
    if abs(a) <= tol:
        if u >= 0:
            arcs.append("X1")
        if u <= 0 and v >= 0:
            arcs.append("X2")
        if u <= 0 and v <= 0:
            arcs.append("X3")
    if abs(b) <= tol:
        if u >= 0 and v >= 0:
            arcs.append("Y1")
        if u <= 0:
            arcs.append("Y2")
        if u >= 0 and v <= 0:
            arcs.append("Y3")
    if arcs:
        return HexagonLocation("boundary", tuple(arcs))
    return HexagonLocation("inside")


def hexagon_boundary_radius(r: float, theta: float, q: int = 3) -> float:
    """Distance from the origin to the hexagon boundary along angle theta."""
    c = abs(np.cos(q * theta))
    if c < 1e-15:
        return float(r)
    fn = lambda rho: rho**2 + c * rho**q - r**2
    return float(brentq(fn, 0.0, r, xtol=1e-17, rtol=1e-15, maxiter=200))


def hexagon_boundary_lift(s: LinkSurface, theta, signs="++", tol: float = 1e-12) -> np.ndarray:
    """Surface points over the hexagon boundary at angles ``theta``.

    The vanishing coordinate is set to exactly zero: x on arcs where
    ``cos(q theta) > 0``, y where it is negative, both at the corners.
    """
    _require_p2(s)
    theta = np.atleast_1d(np.asarray(theta, float))
    rho = np.array([hexagon_boundary_radius(s.r, t, s.q) for t in theta])
    P = chart_phi(s, signs, np.column_stack([rho * np.cos(theta), rho * np.sin(theta)]))
    c = np.cos(s.q * theta)
    P[c >= -tol, 0] = 0.0
    P[c <= tol, 1] = 0.0
    return P


def sample_uv(r: float, n: int, rng: np.random.Generator, q: int = 3, margin: float = 0.0) -> np.ndarray:
    """Uniform samples from the hexagon by rejection from the disc of radius r."""
    out = []
    count = 0
    while count < n:
        pts = rng.uniform(-r, r, size=(2 * n + 16, 2))
        a, b = radicands(r, pts[:, 0], pts[:, 1], q)
        keep = pts[(a > margin) & (b > margin)]
        out.append(keep)
        count += len(keep)
    return np.concatenate(out)[:n]


def sample_surface_points(s: LinkSurface, n: int, rng=None, margin: float = 0.0) -> np.ndarray:
    """Random points of a p = 2 surface via random charts and uv samples."""
    _require_p2(s)
    rng = np.random.default_rng(rng)
    uv = sample_uv(s.r, n, rng, s.q, margin)
    signs = rng.integers(0, 4, size=n)
    out = np.empty((n, 4))
    for k, label in enumerate(CHARTS):
        sel = signs == k
        if np.any(sel):
            out[sel] = chart_phi(s, label, uv[sel])
    return out
