"""Motile tissue target, quasi-static tip contact, and tracker noise model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpecError
from .geometry import Plane, plane_basis

DEFAULT_CONTACT_STIFFNESS = 0.1  # N/mm, series compliance of tissue phantom + stack
DEFAULT_PUNCTURE_FORCE = 0.5  # N, normal force needed for consistent coil puncture


@dataclass(frozen=True)
class AnchorSite:
    """Labeled point in surface (u, v) coordinates (mm)."""

    label: str
    u_mm: float
    v_mm: float


@dataclass(frozen=True)
class MotileTarget:
    """Circular tissue surface cycling along its own normal.

    The normal of base_pose points toward the approaching robot; the
    surface moves along the normal by (amplitude/2)*(1 - cos(2 pi f t)).
    """

    base_pose: Plane
    amplitude: float = 8.0
    frequency: float = 1.0
    phase: float = 0.0
    surface_radius: float = 40.0
    anchor_sites: tuple[AnchorSite, ...] = ()

    def __post_init__(self):
        if self.amplitude < 0:
            raise InvalidSpecError("amplitude must be >= 0")
        if self.frequency <= 0:
            raise InvalidSpecError("frequency must be positive")
        if self.surface_radius <= 0:
            raise InvalidSpecError("surface_radius must be positive")


@dataclass(frozen=True)
class ContactState:
    in_contact: bool
    penetration: float
    normal_force: float
    tangential_slip: float = 0.0

    def __post_init__(self):
        if self.normal_force < 0:
            raise InvalidSpecError("normal_force must be >= 0")
        if (self.normal_force == 0.0) != (not self.in_contact):
            raise InvalidSpecError("normal_force must be zero exactly when out of contact")


NO_CONTACT = ContactState(in_contact=False, penetration=0.0, normal_force=0.0)


@dataclass(frozen=True)
class SensorModel:
    """EM-tracker stand-in: isotropic Gaussian noise plus quantization."""

    position_noise_sigma: float = 0.25
    quantization: float = 0.01
    sample_rate: float = 40.0
    seed: int = 0

    def __post_init__(self):
        if self.position_noise_sigma < 0:
            raise InvalidSpecError("position_noise_sigma must be >= 0")
        if self.sample_rate <= 0:
            raise InvalidSpecError("sample_rate must be positive")


def target_displacement(t: float, target: MotileTarget) -> float:
    """Normal displacement (mm) at time t; bounded by [0, amplitude]."""
    if t < 0:
        raise InvalidSpecError("t must be >= 0")
    return 0.5 * target.amplitude * (1.0 - math.cos(2.0 * math.pi * target.frequency * t + target.phase))


def target_pose_at(t: float, target: MotileTarget) -> Plane:
    """Surface plane at time t, displaced along its normal."""
    d = target_displacement(t, target)
    base = target.base_pose
    return Plane(point=base.point + d * base.normal, normal=base.normal)


def site_world_position(site: AnchorSite, target: MotileTarget, t: float) -> np.ndarray:
    """World position of an anchor site riding on the moving surface."""
    plane = target_pose_at(t, target)
    e1, e2 = plane_basis(plane.normal)
    return plane.point + site.u_mm * e1 + site.v_mm * e2


def world_to_surface(point, target: MotileTarget) -> tuple[float, float]:
    """(u, v) surface coordinates of a world point (normal component dropped)."""
    base = target.base_pose
    e1, e2 = plane_basis(base.normal)
    rel = np.asarray(point, dtype=float) - base.point
    return float(np.dot(rel, e1)), float(np.dot(rel, e2))


def resolve_contact(
    tip_free,
    tangent,
    surface: Plane,
    stiffness: float = DEFAULT_CONTACT_STIFFNESS,
    surface_radius: float | None = None,
    surface_center=None,
    prev_point=None,
) -> tuple[ContactState, np.ndarray]:
    """Quasi-static penalty contact of the compliant tip against a plane.

    If the unloaded tip would sit beyond the surface (against the plane
    normal) by a depth d > 0, the tip is projected back onto the plane
    and pushes with stiffness*d.  Returns the contact state and the
    corrected tip position.
    """
    if stiffness <= 0:
        raise InvalidSpecError("stiffness must be positive")
    tip = np.asarray(tip_free, dtype=float)
    depth = -surface.signed_distance(tip)
    if depth <= 0.0:
        return NO_CONTACT, tip

    corrected = surface.project(tip)
    if surface_radius is not None:
        center = surface.point if surface_center is None else np.asarray(surface_center, dtype=float)
        if np.linalg.norm(corrected - surface.project(center)) > surface_radius:
            return NO_CONTACT, tip

    slip = 0.0
    if prev_point is not None:
        slip = float(np.linalg.norm(corrected - surface.project(prev_point)))
    return (
        ContactState(in_contact=True, penetration=depth, normal_force=stiffness * depth, tangential_slip=slip),
        corrected,
    )


def sensor_sample_index(t: float, model: SensorModel) -> int:
    return int(math.floor(t * model.sample_rate + 1e-9))


def sense_tip(true_tip, model: SensorModel, t: float = 0.0, sample_index: int | None = None) -> np.ndarray:
    """Noisy, quantized tip reading; deterministic in (seed, sample index)."""
    tip = np.asarray(true_tip, dtype=float)
    idx = sensor_sample_index(t, model) if sample_index is None else sample_index
    reading = tip
    if model.position_noise_sigma > 0:
        rng = np.random.default_rng([int(model.seed), int(idx)])
        reading = tip + rng.normal(0.0, model.position_noise_sigma, 3)
    if model.quantization > 0:
        reading = np.round(reading / model.quantization) * model.quantization
    return reading
