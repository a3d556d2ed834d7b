"""Implantation path generation: spline fitting, arclength discretization,
circular site layouts and standoff projection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DuplicatePointError, InvalidSpecError
from .geometry import Plane, plane_basis

ARCLENGTH_REL_TOL = 1e-6


@dataclass(frozen=True)
class TargetPoint:
    label: str
    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))


@dataclass(frozen=True)
class TargetSet:
    """Ordered, uniquely labeled anatomic target points (mm).

    Spline fitting needs at least two points; single-point sets are
    allowed so degenerate site layouts (one circular site) stay usable.
    """

    points: tuple[TargetPoint, ...]
    source: str = ""

    def __post_init__(self):
        if len(self.points) < 1:
            raise InvalidSpecError("TargetSet needs at least 1 point")
        labels = [p.label for p in self.points]
        if len(set(labels)) != len(labels):
            raise InvalidSpecError("target labels must be unique")

    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.points])


@dataclass(frozen=True)
class DiscretePath:
    """Equally spaced polyline along a curve; spacing is arclength (mm)."""

    points: np.ndarray
    spacing: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if chords.size and (chords.max() - chords.min()) > 0.01 * chords.mean():
            raise InvalidSpecError("discretized spacing not uniform within 1%")


class CatmullRomPath:
    """Centripetal Catmull-Rom curve through an ordered point list.

    Each span is stored in cubic Hermite form with the standard
    non-uniform tangents, which keeps the curve interpolating and C1 at
    the knots.  The public parameter u runs linearly over [0, 1].
    """

    def __init__(self, points: np.ndarray):
        pts = np.asarray(points, dtype=float)
        if len(pts) < 2:
            raise InvalidSpecError("need at least 2 points")
        deltas = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(deltas == 0.0):
            raise DuplicatePointError("consecutive targets coincide")

        ext = np.vstack([2 * pts[0] - pts[1], pts, 2 * pts[-1] - pts[-2]])
        # centripetal knots over the extended list (alpha = 0.5)
        gaps = np.sqrt(np.linalg.norm(np.diff(ext, axis=0), axis=1))
        knots = np.concatenate([[0.0], np.cumsum(gaps)])

        self.points = pts
        self._tangents = np.empty_like(pts)
        for i in range(len(pts)):
            k = i + 1  # index into ext/knots
            t_prev, t_i, t_next = knots[k - 1], knots[k], knots[k + 1]
            p_prev, p_i, p_next = ext[k - 1], ext[k], ext[k + 1]
            self._tangents[i] = (
                (p_i - p_prev) / (t_i - t_prev)
                - (p_next - p_prev) / (t_next - t_prev)
                + (p_next - p_i) / (t_next - t_i)
            )
        self._widths = np.diff(knots[1:-1])

    @property
    def n_segments(self) -> int:
        return len(self.points) - 1

    def _segment_point(self, j: int, u: float) -> np.ndarray:
        p0, p1 = self.points[j], self.points[j + 1]
        m0 = self._tangents[j] * self._widths[j]
        m1 = self._tangents[j + 1] * self._widths[j]
        u2, u3 = u * u, u * u * u
        return (
            (2 * u3 - 3 * u2 + 1) * p0
            + (u3 - 2 * u2 + u) * m0
            + (-2 * u3 + 3 * u2) * p1
            + (u3 - u2) * m1
        )

    def _segment_velocity(self, j: int, u: float) -> np.ndarray:
        p0, p1 = self.points[j], self.points[j + 1]
        m0 = self._tangents[j] * self._widths[j]
        m1 = self._tangents[j + 1] * self._widths[j]
        u2 = u * u
        return (
            (6 * u2 - 6 * u) * p0
            + (3 * u2 - 4 * u + 1) * m0
            + (-6 * u2 + 6 * u) * p1
            + (3 * u2 - 2 * u) * m1
        )

    def _segment_speed(self, j: int):
        return lambda u: float(np.linalg.norm(self._segment_velocity(j, u)))

    def point_at(self, u: float) -> np.ndarray:
        """Curve point for u in [0, 1], uniform in segment index."""
        if not 0.0 <= u <= 1.0:
            raise InvalidSpecError("curve parameter must lie in [0, 1]")
        x = u * self.n_segments
        j = min(int(x), self.n_segments - 1)
        return self._segment_point(j, x - j)

    def knot_parameter(self, i: int) -> float:
        return i / self.n_segments

    def segment_lengths(self) -> np.ndarray:
        return np.array(
            [quad(self._segment_speed(j), 0.0, 1.0, epsrel=ARCLENGTH_REL_TOL, limit=200)[0]
             for j in range(self.n_segments)]
        )

    def arclength(self) -> float:
        return float(self.segment_lengths().sum())


def spline_path(targets: TargetSet) -> CatmullRomPath:
    """C1 curve interpolating all target points in order."""
    if len(targets.points) < 2:
        raise InvalidSpecError("spline needs at least 2 target points")
    return CatmullRomPath(targets.positions())


def discretize(curve: CatmullRomPath, n: int) -> DiscretePath:
    """Sample n points at equal arclength along the curve."""
    if n < 2:
        raise InvalidSpecError("n must be >= 2")
    seg_lengths = curve.segment_lengths()
    cumulative = np.concatenate([[0.0], np.cumsum(seg_lengths)])
    total = cumulative[-1]
    spacing = total / (n - 1)

    points = np.empty((n, 3))
    points[0] = curve.points[0]
    points[-1] = curve.points[-1]
    for k in range(1, n - 1):
        target = k * spacing
        j = int(np.searchsorted(cumulative, target, side="right") - 1)
        j = min(j, curve.n_segments - 1)
        residual = target - cumulative[j]
        speed = curve._segment_speed(j)

        def partial(u, _j=j, _speed=speed):
            return quad(_speed, 0.0, u, epsrel=ARCLENGTH_REL_TOL, limit=200)[0]

        u = brentq(lambda x: partial(x) - residual, 0.0, 1.0, xtol=1e-12)
        points[k] = curve._segment_point(j, u)
    return DiscretePath(points=points, spacing=spacing)


def circular_sites(radius: float, k: int, plane: Plane, label_prefix: str = "site") -> TargetSet:
    """k equally spaced sites on a circle of the given radius in the plane."""
    if radius <= 0:
        raise InvalidSpecError("radius must be positive")
    if k < 1:
        raise InvalidSpecError("k must be >= 1")
    e1, e2 = plane_basis(plane.normal)
    pts = []
    for i in range(k):
        ang = 2.0 * math.pi * i / k
        pos = plane.point + radius * (math.cos(ang) * e1 + math.sin(ang) * e2)
        pts.append(TargetPoint(label=f"{label_prefix}-{i + 1}", position=pos))
    return TargetSet(points=tuple(pts), source="circle")


def project_standoff(sites: TargetSet, surface: Plane, standoff: float) -> TargetSet:
    """Shift every site along the surface rest normal by the standoff distance."""
    if standoff < 0:
        raise InvalidSpecError("standoff must be >= 0")
    shifted = tuple(
        TargetPoint(label=p.label, position=p.position + standoff * surface.normal) for p in sites.points
    )
    return TargetSet(points=shifted, source=sites.source)
