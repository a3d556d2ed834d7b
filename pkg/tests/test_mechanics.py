import numpy as np
import pytest

from coilpilot.config import data_path
from coilpilot.errors import BelowFloorError, InvalidSpecError, OutOfRangeError
from coilpilot.mechanics import (
    BalloonSpec,
    StackSpec,
    balloon_deflection,
    length_pressure_derivative,
    plate_deflection,
    pressure_from_length,
    stack_length,
)

BALLOON = BalloonSpec()
STACK = StackSpec()


def closed_form_plate(p_kpa, a=4.0, h=0.038, e=13.4):
    # independent hand evaluation of the clamped-plate deflection
    return 0.662 * a * ((p_kpa * 1e-3) * a / (e * h)) ** (1 / 3)


class TestPlateDeflection:
    def test_zero_load(self):
        assert plate_deflection(0.0, BALLOON) == 0.0

    def test_reference_point(self):
        # oracle: closed form with the published plate constants
        assert plate_deflection(100.0, BALLOON) == pytest.approx(closed_form_plate(100.0), abs=1e-12)
        assert plate_deflection(100.0, BALLOON) == pytest.approx(2.444, abs=1e-3)

    def test_cube_root_scaling(self):
        for p in (3.0, 17.0, 42.0):
            assert plate_deflection(2 * p, BALLOON) == pytest.approx(2 ** (1 / 3) * plate_deflection(p, BALLOON))

    def test_negative_pressure_rejected(self):
        with pytest.raises(OutOfRangeError):
            plate_deflection(-1.0, BALLOON)

    def test_invalid_spec(self):
        with pytest.raises(InvalidSpecError):
            BalloonSpec(radius_a=-1.0)
        with pytest.raises(InvalidSpecError):
            BalloonSpec(correction_c=1.0)
        with pytest.raises(InvalidSpecError):
            BalloonSpec(stiction_pressure=-0.1)


class TestBalloonDeflection:
    def test_zero(self):
        assert balloon_deflection(0.0, BALLOON) == 0.0

    def test_equals_twice_corrected_plate(self):
        for p in (5.0, 30.0, 100.0):
            assert balloon_deflection(p, BALLOON) == pytest.approx(
                2.0 * BALLOON.correction_c * plate_deflection(p, BALLOON), rel=1e-12
            )

    def test_calibrated_full_pressure_point(self):
        # c calibrated so 20 balloons stroke 40 mm at 100 kPa
        assert balloon_deflection(100.0, BALLOON) == pytest.approx(2.0, abs=2e-3)

    def test_first_stroke_deadband(self):
        assert balloon_deflection(5.0, BALLOON, first_stroke=True) == 0.0
        assert balloon_deflection(2.0, BALLOON, first_stroke=True) == 0.0
        assert balloon_deflection(6.0, BALLOON, first_stroke=True) == pytest.approx(
            balloon_deflection(1.0, BALLOON), rel=1e-12
        )


class TestStackLength:
    def test_deflated(self):
        assert stack_length(0.0, STACK) == 25.0

    def test_full_stroke(self):
        assert stack_length(100.0, STACK) == pytest.approx(65.0, abs=0.05)

    def test_stroke_is_n_times_balloon(self):
        rng = np.random.default_rng(7)
        for p in rng.uniform(0, 100, 10):
            assert stack_length(p, STACK) - 25.0 == pytest.approx(
                20 * balloon_deflection(p, BALLOON), rel=1e-12
            )

    def test_monotone(self):
        grid = np.linspace(0, 100, 300)
        lengths = [stack_length(p, STACK) for p in grid]
        assert all(b >= a for a, b in zip(lengths, lengths[1:]))
        # strict above the deadband on the first stroke
        first = [stack_length(p, STACK, first_stroke=True) for p in grid if p > 5.5]
        assert all(b > a for a, b in zip(first, first[1:]))


class TestPressureFromLength:
    def test_at_deflated_length(self):
        assert pressure_from_length(25.0, STACK) == 0.0
        # first-stroke inverse reports the deadband boundary
        assert pressure_from_length(25.0, STACK, first_stroke=True) == pytest.approx(5.0)

    def test_round_trip(self):
        for p in (10.0, 50.0, 100.0):
            back = pressure_from_length(stack_length(p, STACK), STACK)
            assert abs(back - p) / p < 1e-9

    def test_round_trip_first_stroke(self):
        for p in (10.0, 50.0, 100.0):
            back = pressure_from_length(stack_length(p, STACK, True), STACK, first_stroke=True)
            assert abs(back - p) / p < 1e-9

    def test_stroke_calibration_inverse(self):
        assert pressure_from_length(65.0, STACK, p_max=110.0) == pytest.approx(100.0, abs=0.25)

    def test_out_of_range(self):
        with pytest.raises(OutOfRangeError):
            pressure_from_length(24.0, STACK)
        with pytest.raises(OutOfRangeError):
            pressure_from_length(66.0, STACK, p_max=100.0)


class TestDerivative:
    def test_matches_central_difference(self):
        h = 0.01
        for p in np.linspace(5, 100, 39):
            fd = (stack_length(p + h, STACK) - stack_length(p - h, STACK)) / (2 * h)
            assert length_pressure_derivative(p, STACK) == pytest.approx(fd, rel=1e-3)

    def test_power_law_scaling(self):
        for p in (2.0, 5.0, 11.0):
            assert length_pressure_derivative(8 * p, STACK) == pytest.approx(
                length_pressure_derivative(p, STACK) / 4.0, rel=1e-12
            )

    def test_floor(self):
        assert length_pressure_derivative(1.0001, STACK) > 0
        with pytest.raises(BelowFloorError):
            length_pressure_derivative(0.999, STACK)
        with pytest.raises(BelowFloorError):
            length_pressure_derivative(5.5, STACK, first_stroke=True)

    def test_strictly_positive(self):
        for p in np.linspace(1, 100, 23):
            assert length_pressure_derivative(p, STACK) > 0


class TestReferenceCurve:
    def test_model_tracks_reference_above_5kpa(self):
        path = data_path("chamber_inflation_reference.csv")
        worst = 0.0
        with open(path) as fh:
            for line in fh:
                if line.startswith("#") or line.startswith("pressure"):
                    continue
                p, ref, _ = line.strip().split(",")
                p, ref = float(p), float(ref)
                if p < 5.0:
                    continue
                model = stack_length(p, STACK) - STACK.deflated_length_l0
                worst = max(worst, abs(model - ref))
        assert worst <= 1.5
