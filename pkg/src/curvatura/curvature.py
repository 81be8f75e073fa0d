"""The nu-curvature-line equation on a surface ``{F = 0} & {G = 0}`` in R^4.

Two independent routes to the principal directions are provided:

* the quadratic form route: an ambient symmetric matrix ``Omega`` whose
  restriction to a tangent plane vanishes exactly on principal directions;
* the shape-operator route: the 2x2 matrix of ``-(d nu~)^T`` in an
  orthonormal tangent frame, diagonalised directly.

A finite-difference oracle of the shape operator cross-checks both.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNormalFrame, InvalidParameter, NoConvergence, TangentFrameDegenerate
from .field4 import (
    EPS_GRAM,
    LEVI_CIVITA,
    LinkSurface,
    SurfacePoint,
    grad_pair,
    normal_gram,
    project_batch,
    tangent_frame,
)

# Omega is built with m = RADIAL_WEIGHT * grad G, i.e. the position vector
# itself on the sphere.  With this weight the ambient matrix equals the
# closed-form double-torus matrix entry by entry.
RADIAL_WEIGHT = 0.5
EPS_UMB = 1e-8


@dataclass(frozen=True)
class OmegaForm:
    m: np.ndarray
    basepoint: SurfacePoint | None = None

    def quadratic(self, d) -> float:
        d = np.asarray(d, float)
        return float(d @ self.m @ d)

    def restricted(self, V1, V2) -> "FrameQuadratic":
        V1 = np.asarray(V1, float)
        V2 = np.asarray(V2, float)
        return FrameQuadratic(float(V1 @ self.m @ V1), float(2.0 * V1 @ self.m @ V2), float(V2 @ self.m @ V2))


@dataclass(frozen=True)
class FrameQuadratic:
    """``c20 l1^2 + c11 l1 l2 + c02 l2^2`` in the coordinates of a frame."""

    c20: float
    c11: float
    c02: float

    @property
    def discriminant(self) -> float:
        return self.c11**2 - 4.0 * self.c20 * self.c02

    def __call__(self, l1, l2):
        return self.c20 * l1**2 + self.c11 * l1 * l2 + self.c02 * l2**2

    def root_angles(self) -> np.ndarray:
        """Angles theta in ``[0, pi)`` with ``(l1, l2) = (cos, sin)`` a root."""
        return quadratic_root_angles(self.c20, self.c11, self.c02)

    def roots(self) -> np.ndarray:
        """Unit coefficient pairs ``(l1, l2)``, one row per root direction."""
        th = self.root_angles()
        return np.column_stack([np.cos(th), np.sin(th)])


def quadratic_root_angles(c20, c11, c02) -> np.ndarray:
    """Root directions of a binary quadratic as angles, vectorised.

    Writes the form as ``mean + R cos(2 theta - phi)`` and solves for the
    zeros; a negative discriminant is clipped to the double root.
    Returns shape ``(..., 2)``.
    """
    c20, c11, c02 = (np.asarray(c, float) for c in (c20, c11, c02))
    mean = 0.5 * (c20 + c02)
    half = 0.5 * (c20 - c02)
    R = np.hypot(half, 0.5 * c11)
    phi = np.arctan2(c11, c20 - c02)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(R > 0, -mean / R, 0.0)
    delta = np.arccos(np.clip(ratio, -1.0, 1.0))
    th = np.stack([(phi + delta) / 2, (phi - delta) / 2], axis=-1)
    return np.mod(th, np.pi)


@dataclass(frozen=True)
class PrincipalDirections:
    d_max: np.ndarray
    d_min: np.ndarray
    kappa_max: float
    kappa_min: float
    umbilic_flag: bool


def _levi_pair(m, n):
    """``D[k, j] = eps[k, j, a, b] m_a n_b`` so that ``(H^T D)_ij = det[H_i, e_j, m, n]``."""
    return np.einsum("kjab,...a,...b->...kj", LEVI_CIVITA, m, n)


def omega_matrix(s: LinkSurface, X) -> np.ndarray:
    """Symmetric Omega matrices at one point or a batch of points."""
    X = np.asarray(X, float)
    nu, mu = grad_pair(s, X)
    H = s.f.hessian(X)
    D = _levi_pair(RADIAL_WEIGHT * mu, nu)
    HD = H @ D
    return 0.5 * (HD + np.swapaxes(HD, -1, -2))


def omega_ambient(s: LinkSurface, p: SurfacePoint) -> OmegaForm:
    """Omega_ij = 1/2 (det[H e_i, e_j, m, nu] + det[H e_j, e_i, m, nu])."""
    if normal_gram(p.nu, p.mu) < EPS_GRAM:
        raise DegenerateNormalFrame("normal frame degenerate at basepoint")
    return OmegaForm(omega_matrix(s, p.position), p)


def omega_double_torus_closed_form(r: float, X) -> OmegaForm:
    """The closed-form Omega matrix of the genus-two link, vectorised."""
    X = np.asarray(X, float)
    x, y, u, v = np.moveaxis(X, -1, 0)
    rho2 = u**2 + v**2
    m = np.zeros(X.shape[:-1] + (4, 4))
    m[..., 0, 1] = 6 * v * (v**2 - 3 * u**2)
    m[..., 0, 2] = -y * v * (2 - 18 * u + 9 * rho2)
    m[..., 0, 3] = y * (9 * (u**2 - v**2) + u * (2 + 9 * rho2))
    m[..., 1, 2] = x * v * (2 + 18 * u + 9 * rho2)
    m[..., 1, 3] = x * (9 * (u**2 - v**2) - u * (2 + 9 * rho2))
    m[..., 2, 2] = -24 * x * y * v
    m[..., 2, 3] = -24 * x * y * u
    m[..., 3, 3] = 24 * x * y * v
    for i, j in ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)):
        m[..., j, i] = m[..., i, j]
    return OmegaForm(m)


def omega_frame(s: LinkSurface, p: SurfacePoint, V1, V2, tol: float = 1e-9) -> FrameQuadratic:
    """Coefficients of the curvature-line quadratic in the frame ``(V1, V2)``."""
    V1 = np.asarray(V1, float)
    V2 = np.asarray(V2, float)
    scale = np.linalg.norm(V1) * np.linalg.norm(V2)
    nn = p.nu / np.linalg.norm(p.nu)
    mm = p.mu / np.linalg.norm(p.mu)
    for V in (V1, V2):
        nv = np.linalg.norm(V)
        if nv == 0 or abs(V @ nn) > tol * nv or abs(V @ mm) > tol * nv:
            raise TangentFrameDegenerate("frame vector not tangent to the surface")
    T = np.column_stack(p.tangent_basis)
    if scale == 0 or abs(np.linalg.det(T.T @ np.column_stack([V1, V2]))) < tol * scale:
        raise TangentFrameDegenerate("frame vectors are dependent")
    return omega_ambient(s, p).restricted(V1, V2)


def uv_lift_frame(X) -> tuple[np.ndarray, np.ndarray]:
    """Tangent vectors lifting ``d/dv`` and ``d/du`` on the genus-two link.

    Only defined where ``xy != 0``.
    """
    x, y, u, v = (float(c) for c in X)
    if x == 0 or y == 0:
        raise TangentFrameDegenerate("uv-lift frame is singular on xy = 0")
    V1 = np.array([-(v - 3 * u * v) / (2 * x), -(v + 3 * u * v) / (2 * y), 0.0, 1.0])
    V2 = np.array([-(2 * u + 3 * u**2 - 3 * v**2) / (4 * x), -(2 * u - 3 * u**2 + 3 * v**2) / (4 * y), 1.0, 0.0])
    return V1, V2


def shape_matrix(s: LinkSurface, X, T=None):
    """2x2 shape operator of ``nu~ = nu/|nu|`` and the tangent frame used.

    Returns ``(S, t1, t2)`` with ``S`` of shape ``(..., 2, 2)``.
    """
    X = np.asarray(X, float)
    nu = s.f.gradient(X)
    if T is None:
        t1, t2 = tangent_frame(nu, s.g.gradient(X))
    else:
        t1, t2 = T
    H = s.f.hessian(X)
    inv = -1.0 / np.sqrt(np.sum(nu * nu, axis=-1))
    Ht1 = np.einsum("...ij,...j->...i", H, t1)
    Ht2 = np.einsum("...ij,...j->...i", H, t2)
    a = np.sum(t1 * Ht1, axis=-1) * inv
    b = 0.5 * (np.sum(t2 * Ht1, axis=-1) + np.sum(t1 * Ht2, axis=-1)) * inv
    c = np.sum(t2 * Ht2, axis=-1) * inv
    S = np.stack([np.stack([a, b], axis=-1), np.stack([b, c], axis=-1)], axis=-2)
    return S, t1, t2


def _eig2(S):
    a, b, c = S[..., 0, 0], S[..., 0, 1], S[..., 1, 1]
    mean = 0.5 * (a + c)
    R = np.hypot(0.5 * (a - c), b)
    ang = 0.5 * np.arctan2(2 * b, a - c)
    return mean + R, mean - R, ang


def principal_frames(s: LinkSurface, X):
    """Batch principal data: ``(d_max, d_min, kappa_max, kappa_min, gap)``.

    ``gap`` is the relative curvature gap ``(k1 - k2)/(1 + |k1| + |k2|)``.
    """
    S, t1, t2 = shape_matrix(s, X)
    k1, k2, ang = _eig2(S)
    c, sn = np.cos(ang)[..., None], np.sin(ang)[..., None]
    d_max = c * t1 + sn * t2
    d_min = c * t2 - sn * t1
    gap = (k1 - k2) / (1 + np.abs(k1) + np.abs(k2))
    return d_max, d_min, k1, k2, gap


def principal_directions(s: LinkSurface, p: SurfacePoint) -> PrincipalDirections:
    if p.gram < EPS_GRAM:
        raise DegenerateNormalFrame("normal frame degenerate")
    S, t1, t2 = shape_matrix(s, p.position, p.tangent_basis)
    k1, k2, ang = _eig2(S)
    d_max = np.cos(ang) * t1 + np.sin(ang) * t2
    d_min = -np.sin(ang) * t1 + np.cos(ang) * t2
    umb = abs(k1 - k2) <= EPS_UMB * (1 + abs(k1) + abs(k2))
    return PrincipalDirections(d_max, d_min, float(k1), float(k2), bool(umb))


def _normalized_nu(s, X):
    nu = s.f.gradient(X)
    return nu / np.linalg.norm(nu, axis=-1, keepdims=True)


def _fd_matrix(s: LinkSurface, p: SurfacePoint, h: float) -> np.ndarray:
    t = np.stack(p.tangent_basis)
    starts = np.concatenate([p.position + h * t, p.position - h * t])
    Q, _, ok = project_batch(s, starts)
    if not np.all(ok):
        raise NoConvergence("projection failed at finite-difference stencil")
    n = _normalized_nu(s, Q)
    dn = (n[:2] - n[2:]) / (2 * h)
    return -dn @ t.T


def shape_operator_fd_oracle(s: LinkSurface, p: SurfacePoint, h: float = 1e-4, richardson: bool = False) -> np.ndarray:
    """Central-difference estimate of the shape operator in ``p``'s tangent frame.

    Row i holds ``-<d_{t_i} nu~, t_j>``.  With ``richardson`` the estimates
    at ``h`` and ``h/2`` are combined to cancel the ``h^2`` term.  The
    result is not symmetrised, so its antisymmetric part measures the error.
    """
    if not 1e-7 <= h <= 1e-3:
        raise InvalidParameter("oracle step must lie in [1e-7, 1e-3]")
    M = _fd_matrix(s, p, h)
    if richardson:
        M = (4 * _fd_matrix(s, p, h / 2) - M) / 3
    return M


def line_angle(a, b) -> np.ndarray:
    """Unsigned angle in ``[0, pi/2]`` between the lines spanned by a and b."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    a = a / np.linalg.norm(a, axis=-1, keepdims=True)
    b = b / np.linalg.norm(b, axis=-1, keepdims=True)
    c = np.einsum("...i,...i->...", a, b)
    sn = np.linalg.norm(a - c[..., None] * b, axis=-1)
    return np.arctan2(sn, np.abs(c))
