"""Balloon-stack statics: chamber pressure to deflection/length, inverse, derivative.

A chamber is a vertical stack of ``n`` thin-film balloons.  One clamped
circular plate of radius ``a`` and thickness ``h`` under a distributed
load ``p`` deflects

    w = 0.662 * a * cbrt(p * a / (E * h))

and a two-plate balloon with open ends deflects ``d = 2 * c * w`` with a
correction factor ``c < 1``.  Stack length is ``l(p) = n * d(p) + l0``.

Pressures are stored in kPa and converted to N/mm^2 inside the formulas;
lengths are in mm.  Below ``stiction_pressure`` the films of a
never-before-inflated balloon stay adhered: on the first inflation
stroke the effective pressure is ``max(0, p - stiction_pressure)``.
Ownership of the per-chamber first-stroke flag lives in the simulation
stepper; every function here is pure and takes the flag explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BelowFloorError, InvalidSpecError, OutOfRangeError

KPA_TO_N_PER_MM2 = 1e-3

# Correction factor calibrated so a 20-balloon stack strokes 40 mm at 100 kPa.
DEFAULT_CORRECTION_C = 0.409
DEFAULT_STICTION_KPA = 5.0
# dl/dp diverges as p_eff -> 0; commanded pressures are clamped to >= this.
DEFAULT_PRESSURE_FLOOR_KPA = 1.0
DEFAULT_PRESSURE_MAX_KPA = 100.0


@dataclass(frozen=True)
class BalloonSpec:
    """Geometry and material of a single thin-film balloon.

    radius_a/thickness_h in mm, youngs_E in N/mm^2 (at 50% strain),
    correction_c dimensionless, stiction_pressure in kPa.
    """

    radius_a: float = 4.0
    thickness_h: float = 0.038
    youngs_E: float = 13.4
    correction_c: float = DEFAULT_CORRECTION_C
    stiction_pressure: float = DEFAULT_STICTION_KPA

    def __post_init__(self):
        if self.radius_a <= 0 or self.thickness_h <= 0 or self.youngs_E <= 0:
            raise InvalidSpecError("radius_a, thickness_h and youngs_E must be positive")
        if not 0.0 < self.correction_c < 1.0:
            raise InvalidSpecError("correction_c must lie in (0, 1)")
        if self.stiction_pressure < 0:
            raise InvalidSpecError("stiction_pressure must be >= 0")


@dataclass(frozen=True)
class StackSpec:
    """A chamber: n balloons stacked on a deflated length l0 (mm)."""

    balloon: BalloonSpec = BalloonSpec()
    n_balloons: int = 20
    deflated_length_l0: float = 25.0

    def __post_init__(self):
        if self.n_balloons < 1:
            raise InvalidSpecError("n_balloons must be >= 1")
        if self.deflated_length_l0 < 0:
            raise InvalidSpecError("deflated_length_l0 must be >= 0")


@dataclass
class ChamberState:
    """Instantaneous pressure (kPa) and length (mm) of one chamber."""

    pressure: float
    length: float


def _effective_pressure(p: float, spec: BalloonSpec, first_stroke: bool) -> float:
    if p < 0:
        raise OutOfRangeError(f"pressure must be >= 0, got {p}")
    if first_stroke:
        return max(0.0, p - spec.stiction_pressure)
    return p


def plate_deflection(p: float, spec: BalloonSpec) -> float:
    """Maximum displacement (mm) of a clamped circular plate under p (kPa)."""
    if p < 0:
        raise OutOfRangeError(f"pressure must be >= 0, got {p}")
    p_n = p * KPA_TO_N_PER_MM2
    return 0.662 * spec.radius_a * (p_n * spec.radius_a / (spec.youngs_E * spec.thickness_h)) ** (1.0 / 3.0)


def balloon_deflection(p: float, spec: BalloonSpec, first_stroke: bool = False) -> float:
    """Maximum deflection (mm) of one balloon; equals 2*c*plate_deflection.

    With ``first_stroke=True`` the stiction deadband applies: effective
    pressure is max(0, p - stiction_pressure).
    """
    p_eff = _effective_pressure(p, spec, first_stroke)
    p_n = p_eff * KPA_TO_N_PER_MM2
    return 1.324 * spec.correction_c * (p_n * spec.radius_a ** 4 / (spec.youngs_E * spec.thickness_h)) ** (1.0 / 3.0)


def stack_length(p: float, spec: StackSpec, first_stroke: bool = False) -> float:
    """Length (mm) of the stack at pressure p (kPa): n*d(p) + l0."""
    return spec.n_balloons * balloon_deflection(p, spec.balloon, first_stroke) + spec.deflated_length_l0


def pressure_from_length(
    l: float,
    spec: StackSpec,
    p_max: float = DEFAULT_PRESSURE_MAX_KPA,
    first_stroke: bool = False,
) -> float:
    """Pressure (kPa) at which the stack has length l (mm).

    Closed-form inverse of stack_length; with ``first_stroke=True`` the
    result is shifted up by the stiction deadband (l == l0 maps to the
    deadband boundary, i.e. zero commanded pressure above it).
    """
    b = spec.balloon
    l0 = spec.deflated_length_l0
    if l < l0 - 1e-9:
        raise OutOfRangeError(f"length {l} mm below deflated length {l0} mm")
    lmax = stack_length(p_max, spec, first_stroke)
    if l > lmax + 1e-9:
        raise OutOfRangeError(f"length {l} mm exceeds stack length {lmax:.3f} mm at p_max={p_max} kPa")
    stroke_per_balloon = max(0.0, l - l0) / spec.n_balloons
    p_n = (b.youngs_E * b.thickness_h / b.radius_a ** 4) * (stroke_per_balloon / (1.324 * b.correction_c)) ** 3
    p = p_n / KPA_TO_N_PER_MM2
    if first_stroke:
        p += b.stiction_pressure
    return p


def length_pressure_derivative(
    p: float,
    spec: StackSpec,
    p_floor: float = DEFAULT_PRESSURE_FLOOR_KPA,
    first_stroke: bool = False,
) -> float:
    """dl/dp (mm/kPa) of the stack at pressure p (kPa); strictly positive.

    Raises BelowFloorError when the effective pressure is under p_floor,
    where the p^(-2/3) derivative blows up.
    """
    p_eff = _effective_pressure(p, spec.balloon, first_stroke)
    if p_eff < p_floor:
        raise BelowFloorError(f"effective pressure {p_eff} kPa below floor {p_floor} kPa")
    d = balloon_deflection(p, spec.balloon, first_stroke)
    # d = A * p_eff^(1/3)  =>  dd/dp = d / (3 p_eff)
    return spec.n_balloons * d / (3.0 * p_eff)
