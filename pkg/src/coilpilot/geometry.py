"""Small 3D helpers shared by the environment and trajectory modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpecError


@dataclass(frozen=True)
class Plane:
    """Oriented plane: a point on it plus a unit normal (mm)."""

    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if abs(norm - 1.0) > 1e-9:
            raise InvalidSpecError(f"plane normal must be unit length, |n|={norm}")
        object.__setattr__(self, "normal", n)

    def signed_distance(self, point) -> float:
        """Distance along the normal from the plane to ``point``."""
        return float(np.dot(np.asarray(point, dtype=float) - self.point, self.normal))

    def project(self, point) -> np.ndarray:
        """Orthogonal projection of ``point`` onto the plane."""
        p = np.asarray(point, dtype=float)
        return p - self.signed_distance(p) * self.normal


def plane_basis(normal) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal in-plane basis (e1, e2) for a unit normal."""
    n = np.asarray(normal, dtype=float)
    seed = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = seed - np.dot(seed, n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


def rotz(angle: float) -> np.ndarray:
    """Rotation matrix about the base z axis."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
