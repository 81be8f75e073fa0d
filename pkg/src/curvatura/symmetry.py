"""The finite symmetry group of the genus-two link.

With ``z1 = x + iy`` and ``z2 = u + iv`` the generators are

* ``G1: (z1, z2) -> (conj z1, z2)``
* ``G2: (z1, z2) -> (-conj z1, z2)``
* ``G3: (z1, z2) -> (z1, exp(2 pi i / 3) z2)``

all realised as orthogonal 4x4 matrices.  They commute pairwise, so the
group they generate is ``Z2 x Z2 x Z3`` of order 12.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GAMMA1 = np.diag([1.0, -1.0, 1.0, 1.0])
GAMMA2 = np.diag([-1.0, 1.0, 1.0, 1.0])


def uv_rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    R = np.eye(4)
    R[2:, 2:] = [[c, -s], [s, c]]
    return R


GAMMA3 = uv_rotation(2 * np.pi / 3)

# Not in the group generated above, but also preserves F and G.
REFLECT_V = np.diag([1.0, 1.0, 1.0, -1.0])


@dataclass(frozen=True)
class AffineMap:
    """``X -> A X + b`` with A orthogonal."""

    A: np.ndarray
    b: np.ndarray = field(default_factory=lambda: np.zeros(4))
    name: str = ""

    def __call__(self, X):
        X = np.asarray(X, float)
        return X @ self.A.T + self.b

    def linear(self, V):
        """Action on tangent vectors."""
        return np.asarray(V, float) @ self.A.T

    def compose(self, other: "AffineMap") -> "AffineMap":
        """``self o other``."""
        return AffineMap(self.A @ other.A, self.A @ other.b + self.b, f"{self.name}{other.name}")

    def inverse(self) -> "AffineMap":
        Ai = self.A.T
        return AffineMap(Ai, -Ai @ self.b, f"({self.name})^-1")


IDENTITY = AffineMap(np.eye(4), name="e")


def translation(c) -> AffineMap:
    return AffineMap(np.eye(4), np.asarray(c, float), "T")


def conjugated(g: AffineMap, center) -> AffineMap:
    """``T_center o g o T_{-center}``: g acting with ``center`` as origin."""
    c = np.asarray(center, float)
    return translation(c).compose(g).compose(translation(-c))


class SymmetryGroup:
    """The group generated by the three link symmetries."""

    def __init__(self):
        self.generators = {
            "G1": AffineMap(GAMMA1, name="G1"),
            "G2": AffineMap(GAMMA2, name="G2"),
            "G3": AffineMap(GAMMA3, name="G3"),
        }
        self._elements = self._close()

    def _close(self) -> list[AffineMap]:
        elems = [IDENTITY]
        frontier = [IDENTITY]
        while frontier:
            nxt = []
            for e in frontier:
                for g in self.generators.values():
                    h = g.compose(e)
                    if not any(np.allclose(h.A, k.A, atol=1e-12) for k in elems):
                        elems.append(h)
                        nxt.append(h)
            frontier = nxt
        return elems

    def elements(self) -> list[AffineMap]:
        return list(self._elements)

    @property
    def order(self) -> int:
        return len(self._elements)

    def __getitem__(self, name: str) -> AffineMap:
        return self.generators[name]

    def conjugated_rotation(self, angle: float, center) -> AffineMap:
        """Rotation of the uv-plane by ``angle`` about ``center``.

        For centres with ``u = v = 0`` (the umbilics) this coincides with the
        plain rotation, which is why the conjugated maps lie in the group.
        """
        return conjugated(AffineMap(uv_rotation(angle), name="R"), center)

    def orbit(self, X, tol: float = 1e-9) -> np.ndarray:
        """Distinct images of a point under the group."""
        pts = []
        for g in self._elements:
            Y = g(X)
            if not any(np.linalg.norm(Y - P) <= tol for P in pts):
                pts.append(Y)
        return np.array(pts)
