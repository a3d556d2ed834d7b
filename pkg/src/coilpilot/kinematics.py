"""Constant-curvature kinematics of the three-chamber balloon actuator.

Chamber lengths map to a single circular arc (arclength s, curvature
kappa, bending-plane angle phi) and on to the tip pose.  The pressure
Jacobian is taken numerically through the full chain
stack_length -> arc -> tip, which keeps it well-defined across the
piecewise stiction model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import mechanics
from .errors import BelowFloorError, InvalidLengthsError, InvalidSpecError
from .mechanics import StackSpec

# Below this bend angle the 0/0 arc factors switch to their series forms.
SMALL_THETA = 1e-4
# Finite-difference step for the pressure Jacobian (kPa).
JACOBIAN_STEP_KPA = 0.05

DEFAULT_CHAMBER_ANGLES = (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)


@dataclass(frozen=True)
class ActuatorSpec:
    """Three balloon stacks spaced 120 deg at radius dc around the axis.

    The closed-form arc mapping below assumes the default 120 deg
    arrangement; chamber_angles are retained for site bookkeeping and
    must be distinct modulo 2*pi.
    """

    stacks: tuple[StackSpec, StackSpec, StackSpec] = (StackSpec(), StackSpec(), StackSpec())
    chamber_offset_dc: float = 8.0
    chamber_angles: tuple[float, float, float] = DEFAULT_CHAMBER_ANGLES
    p_max: float = mechanics.DEFAULT_PRESSURE_MAX_KPA

    def __post_init__(self):
        if len(self.stacks) != 3:
            raise InvalidSpecError("actuator needs exactly 3 stacks")
        if self.chamber_offset_dc <= 0:
            raise InvalidSpecError("chamber_offset_dc must be positive")
        if len(self.chamber_angles) != 3:
            raise InvalidSpecError("need 3 chamber angles")
        wrapped = [a % (2.0 * math.pi) for a in self.chamber_angles]
        for i in range(3):
            for j in range(i + 1, 3):
                if abs(wrapped[i] - wrapped[j]) < 1e-9:
                    raise InvalidSpecError("chamber angles must be distinct modulo 2*pi")

    @property
    def deflated_length(self) -> float:
        return self.stacks[0].deflated_length_l0


@dataclass(frozen=True)
class ArcState:
    """Circular-arc parameters: arclength s (mm), curvature kappa (1/mm),
    bending-plane angle phi (rad).  theta and r are derived."""

    arclength_s: float
    curvature_kappa: float
    plane_angle_phi: float

    def __post_init__(self):
        if self.arclength_s <= 0:
            raise InvalidSpecError("arclength_s must be positive")
        if self.curvature_kappa < 0:
            raise InvalidSpecError("curvature_kappa must be >= 0")

    @property
    def bend_theta(self) -> float:
        return self.curvature_kappa * self.arclength_s

    @property
    def radius_r(self) -> float | None:
        """Bend radius 1/kappa; None for a straight arc."""
        return None if self.curvature_kappa == 0.0 else 1.0 / self.curvature_kappa


@dataclass(frozen=True)
class TipPose:
    """Tip position (mm) and unit tangent in the actuator-base frame."""

    position: np.ndarray
    tangent: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        t = np.asarray(self.tangent, dtype=float)
        if abs(np.linalg.norm(t) - 1.0) > 1e-9:
            raise InvalidSpecError("tip tangent must be unit length")
        object.__setattr__(self, "tangent", t)


@dataclass(frozen=True)
class PressureVector:
    """Chamber pressures (kPa)."""

    p1: float
    p2: float
    p3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p1, self.p2, self.p3], dtype=float)

    @staticmethod
    def from_array(arr) -> "PressureVector":
        a = np.asarray(arr, dtype=float)
        return PressureVector(float(a[0]), float(a[1]), float(a[2]))

    def validate(self, p_max: float) -> "PressureVector":
        for p in (self.p1, self.p2, self.p3):
            if p < 0 or p > p_max:
                raise InvalidSpecError(f"pressure {p} kPa outside [0, {p_max}]")
        return self


def arc_from_lengths(l1: float, l2: float, l3: float, spec: ActuatorSpec) -> ArcState:
    """Map the three chamber lengths (mm) to constant-curvature arc parameters.

    phi is reported as 0 for the (undefined) straight configuration.
    """
    if l1 <= 0 or l2 <= 0 or l3 <= 0:
        raise InvalidLengthsError(f"chamber lengths must be positive, got {(l1, l2, l3)}")
    dc = spec.chamber_offset_dc
    lsum = l1 + l2 + l3
    s = lsum / 3.0
    expr = l1 * l1 + l2 * l2 + l3 * l3 - l1 * l2 - l2 * l3 - l1 * l3
    expr = max(expr, 0.0)  # guard tiny negative round-off for equal lengths
    kappa = 2.0 * math.sqrt(expr) / (dc * lsum)
    if expr == 0.0:
        phi = 0.0
    else:
        phi = math.atan2(math.sqrt(3.0) * (l3 - l2), l2 + l3 - 2.0 * l1)
    return ArcState(arclength_s=s, curvature_kappa=kappa, plane_angle_phi=phi)


def lengths_from_arc(arc: ArcState, spec: ActuatorSpec) -> np.ndarray:
    """Inverse of arc_from_lengths: l_i = s*(1 - dc*kappa*cos(psi_i - phi))."""
    psi = np.asarray(spec.chamber_angles)
    return arc.arclength_s * (1.0 - spec.chamber_offset_dc * arc.curvature_kappa * np.cos(psi - arc.plane_angle_phi))


def _arc_factors(kappa: float, s: float) -> tuple[float, float]:
    """Return ((1-cos(theta))/kappa, sin(theta)/kappa) with a stable small-theta branch."""
    theta = kappa * s
    if theta < SMALL_THETA:
        # 4th-order series in theta; exact [0, s] at kappa = 0
        t2 = theta * theta
        a = 0.5 * kappa * s * s * (1.0 - t2 / 12.0)
        b = s * (1.0 - t2 / 6.0 + t2 * t2 / 120.0)
        return a, b
    half = math.sin(0.5 * theta)
    return 2.0 * half * half / kappa, math.sin(theta) / kappa


def tip_from_arc(arc: ArcState) -> TipPose:
    """Tip pose of the arc: [r(1-cos th)cos phi, r(1-cos th)sin phi, r sin th]."""
    theta = arc.bend_theta
    phi = arc.plane_angle_phi
    a, b = _arc_factors(arc.curvature_kappa, arc.arclength_s)
    cphi, sphi = math.cos(phi), math.sin(phi)
    position = np.array([a * cphi, a * sphi, b])
    tangent = np.array([math.sin(theta) * cphi, math.sin(theta) * sphi, math.cos(theta)])
    return TipPose(position=position, tangent=tangent)


def backbone_polyline(arc: ArcState, n_points: int) -> np.ndarray:
    """(n_points, 3) points at equal arclength from base origin to tip."""
    if n_points < 2:
        raise InvalidSpecError("n_points must be >= 2")
    pts = np.zeros((n_points, 3))
    for i in range(1, n_points):
        frac = i / (n_points - 1)
        sub = ArcState(arc.arclength_s * frac, arc.curvature_kappa, arc.plane_angle_phi)
        pts[i] = tip_from_arc(sub).position
    return pts


def tip_from_pressures(pressures, spec: ActuatorSpec) -> np.ndarray:
    """Forward chain pressure -> lengths -> arc -> tip position (steady model)."""
    p = np.asarray(pressures, dtype=float)
    lengths = [mechanics.stack_length(p[i], spec.stacks[i]) for i in range(3)]
    return tip_from_arc(arc_from_lengths(*lengths, spec=spec)).position


def pressure_jacobian(
    pressures,
    spec: ActuatorSpec,
    p_floor: float = mechanics.DEFAULT_PRESSURE_FLOOR_KPA,
    step: float = JACOBIAN_STEP_KPA,
) -> np.ndarray:
    """3x3 position Jacobian d(tip)/d(pressure) in mm/kPa by central differences."""
    p = np.asarray(pressures, dtype=float)
    if np.any(p < p_floor):
        raise BelowFloorError(f"Jacobian needs all pressures >= {p_floor} kPa, got {p.tolist()}")
    J = np.zeros((3, 3))
    for j in range(3):
        dp = np.zeros(3)
        dp[j] = step
        J[:, j] = (tip_from_pressures(p + dp, spec) - tip_from_pressures(p - dp, spec)) / (2.0 * step)
    return J


def damped_pseudo_inverse(J: np.ndarray, lam: float) -> np.ndarray:
    """J^T (J J^T + lam^2 I)^-1 via SVD with the sigma/(sigma^2+lam^2) filter."""
    if lam < 0:
        raise InvalidSpecError("damping must be >= 0")
    U, sigma, Vt = np.linalg.svd(np.asarray(J, dtype=float))
    filtered = sigma / (sigma * sigma + lam * lam) if lam > 0 else np.divide(
        1.0, sigma, out=np.zeros_like(sigma), where=sigma != 0.0
    )
    return Vt.T @ np.diag(filtered) @ U.T
