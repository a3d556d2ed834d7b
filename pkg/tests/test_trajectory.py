import math

import numpy as np
import pytest

from coilpilot.config import dump_target_set, load_target_set
from coilpilot.errors import DuplicatePointError, InvalidSpecError
from coilpilot.geometry import Plane
from coilpilot.trajectory import (
    TargetPoint,
    TargetSet,
    circular_sites,
    discretize,
    project_standoff,
    spline_path,
)


def targets_from(points, prefix="p"):
    return TargetSet(points=tuple(TargetPoint(f"{prefix}{i}", p) for i, p in enumerate(points)))


def dense_polyline_length(curve, n=20_000):
    pts = np.array([curve.point_at(u) for u in np.linspace(0, 1, n)])
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


class TestSpline:
    def test_two_points_straight_segment(self):
        curve = spline_path(targets_from([[0, 0, 0], [10, 0, 0]]))
        for u in np.linspace(0, 1, 11):
            p = curve.point_at(u)
            assert p[1] == pytest.approx(0.0, abs=1e-12)
            assert p[2] == pytest.approx(0.0, abs=1e-12)
            assert 0 - 1e-9 <= p[0] <= 10 + 1e-9

    def test_collinear_points_stay_on_line(self):
        curve = spline_path(targets_from([[0, 0, 0], [3, 3, 0], [7, 7, 0], [10, 10, 0]]))
        for u in np.linspace(0, 1, 200):
            x, y, z = curve.point_at(u)
            assert y == pytest.approx(x, abs=1e-9)
            assert z == pytest.approx(0.0, abs=1e-9)

    def test_interpolates_all_targets(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(-20, 20, (8, 3))
        ts = targets_from(pts)
        curve = spline_path(ts)
        for i, p in enumerate(pts):
            at = curve.point_at(curve.knot_parameter(i))
            assert np.linalg.norm(at - p) < 1e-9

    def test_annulus_fixture_interpolation(self):
        ts = load_target_set("annulus15.json")
        assert len(ts.points) == 16  # closed loop duplicates the first site
        curve = spline_path(ts)
        for i, p in enumerate(ts.points):
            at = curve.point_at(curve.knot_parameter(i))
            assert np.linalg.norm(at - p.position) < 1e-9

    def test_duplicate_consecutive_targets(self):
        with pytest.raises(DuplicatePointError):
            spline_path(targets_from([[0, 0, 0], [0, 0, 0], [5, 0, 0]]))

    def test_unique_labels(self):
        with pytest.raises(InvalidSpecError):
            TargetSet(points=(TargetPoint("x", [0, 0, 0]), TargetPoint("x", [1, 0, 0])))


class TestDiscretize:
    def test_straight_segment_spacing(self):
        curve = spline_path(targets_from([[0, 0, 0], [10, 0, 0]]))
        path = discretize(curve, 5)
        assert path.points[:, 0] == pytest.approx([0, 2.5, 5, 7.5, 10], abs=1e-9)
        assert path.spacing == pytest.approx(2.5, rel=1e-9)

    def test_annulus_500_points(self):
        curve = spline_path(load_target_set("annulus15.json"))
        path = discretize(curve, 500)
        assert len(path.points) == 500
        chords = np.linalg.norm(np.diff(path.points, axis=0), axis=1)
        assert (chords.max() - chords.min()) / chords.mean() < 0.01

    def test_total_length_against_polyline(self):
        curve = spline_path(load_target_set("annulus15.json"))
        quad_len = curve.arclength()
        assert quad_len == pytest.approx(dense_polyline_length(curve), rel=1e-3)
        path = discretize(curve, 500)
        poly = np.linalg.norm(np.diff(path.points, axis=0), axis=1).sum()
        assert poly == pytest.approx(quad_len, rel=1e-3)

    def test_refinement_stability(self):
        curve = spline_path(load_target_set("annulus15.json"))
        coarse = discretize(curve, 101)
        fine = discretize(curve, 201)
        # every coarse point appears (as the even-index subset) in the 2n-1 refinement
        assert coarse.points == pytest.approx(fine.points[::2], abs=coarse.spacing / 2)

    def test_minimum_count(self):
        curve = spline_path(targets_from([[0, 0, 0], [1, 0, 0]]))
        with pytest.raises(InvalidSpecError):
            discretize(curve, 1)


class TestCircularSites:
    PLANE = Plane(point=np.array([0.0, 0.0, 48.0]), normal=np.array([0.0, 0.0, -1.0]))

    def test_radius_and_spacing(self):
        sites = circular_sites(24.0, 3, self.PLANE)
        pts = sites.positions()
        assert len(pts) == 3
        for p in pts:
            assert np.linalg.norm(p - self.PLANE.point) == pytest.approx(24.0, rel=1e-12)
        for i in range(3):
            d = np.linalg.norm(pts[i] - pts[(i + 1) % 3])
            assert d == pytest.approx(24.0 * math.sqrt(3.0), rel=1e-12)

    def test_single_site(self):
        sites = circular_sites(24.0, 1, self.PLANE)
        assert len(sites.points) == 1
        assert np.linalg.norm(sites.points[0].position - self.PLANE.point) == pytest.approx(24.0)

    def test_invalid(self):
        with pytest.raises(InvalidSpecError):
            circular_sites(0.0, 3, self.PLANE)
        with pytest.raises(InvalidSpecError):
            circular_sites(10.0, 0, self.PLANE)

    def test_circle_fixture_matches_layout(self):
        ts = load_target_set("circle24.json")
        assert len(ts.points) == 3
        center = np.array([0.0, 0.0, 48.0])
        for p in ts.points:
            assert np.linalg.norm(p.position - center) == pytest.approx(24.0, abs=1e-4)


class TestStandoff:
    PLANE = Plane(point=np.array([0.0, 0.0, 48.0]), normal=np.array([0.0, 0.0, -1.0]))

    def test_zero_standoff_identity(self):
        sites = circular_sites(24.0, 3, self.PLANE)
        out = project_standoff(sites, self.PLANE, 0.0)
        assert out.positions() == pytest.approx(sites.positions(), abs=0.0)

    def test_translation_along_normal(self):
        sites = circular_sites(24.0, 3, self.PLANE)
        out = project_standoff(sites, self.PLANE, 10.0)
        assert out.positions()[:, 2] == pytest.approx([38.0] * 3)
        assert out.positions()[:, :2] == pytest.approx(sites.positions()[:, :2])

    def test_spacing_preserved(self):
        sites = circular_sites(24.0, 3, self.PLANE)
        out = project_standoff(sites, self.PLANE, 7.5)
        d_in = np.linalg.norm(sites.positions()[0] - sites.positions()[1])
        d_out = np.linalg.norm(out.positions()[0] - out.positions()[1])
        assert d_out == pytest.approx(d_in, rel=1e-12)


class TestTargetSetIO:
    def test_round_trip(self):
        ts = targets_from([[1.5, 2.5, 3.5], [4, 5, 6]])
        doc = dump_target_set(ts)
        back = load_target_set(doc)
        assert back.positions() == pytest.approx(ts.positions())
        assert [p.label for p in back.points] == [p.label for p in ts.points]
