"""Coiled anchor deployment: dual-thread driver state machine and torque sensing.

The driver holds an anchor with a thread preload set at loading time.
Rotation under sufficient tip contact screws the coil into the medium;
once the anchor head lands, torsional resistance ramps steeply until the
holding threads slip at a fixed fraction of the preload and the anchor
self-releases at its current surface location.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import (
    DoubleLoadError,
    InvalidSpecError,
    NonMonotoneDataError,
    OutOfRangeError,
    PhaseError,
    SaturatedError,
)

# Reference pull-out failure loads (N) from bench testing; reported in
# summaries only, material failure is not simulated.
REFERENCE_PULL_FORCE_N = {"EF30": 3.94, "tissue": 3.99}


class Phase(str, Enum):
    UNLOADED = "unloaded"
    LOADED = "loaded"
    COUPLED = "coupled-to-robot"
    INSERTING = "inserting"
    HEAD_CONTACT = "head-contact"
    RELEASED = "released"


# Legal forward edges of the deployment machine.
PHASE_EDGES = {
    Phase.UNLOADED: (Phase.LOADED,),
    Phase.LOADED: (Phase.COUPLED,),
    Phase.COUPLED: (Phase.INSERTING,),
    Phase.INSERTING: (Phase.HEAD_CONTACT,),
    Phase.HEAD_CONTACT: (Phase.RELEASED,),
    Phase.RELEASED: (),
}


@dataclass(frozen=True)
class AnchorSpec:
    """Coil geometry (mm); pitch in mm per revolution."""

    coil_length: float = 6.0
    coil_pitch: float = 1.0
    head_length: float = 3.0
    target_depth: float = 5.0
    medium: str = "EF30"

    def __post_init__(self):
        if self.coil_pitch <= 0:
            raise InvalidSpecError("coil_pitch must be positive")
        if not 0 < self.target_depth <= self.coil_length:
            raise InvalidSpecError("target_depth must lie in (0, coil_length]")


@dataclass(frozen=True)
class MediumModel:
    """Per-medium torque behaviour (N*mm, N*mm/rad).

    The release threshold is release_ratio_eta * preload_torque; the
    insertion torque must cap strictly below it so the threshold can only
    be crossed on the head-contact ramp.
    """

    preload_torque: float
    insertion_torque_at_full_depth: float
    release_ratio_eta: float
    head_contact_stiffness: float = 20.0

    def __post_init__(self):
        if not 0.0 < self.release_ratio_eta < 1.0:
            raise InvalidSpecError("release_ratio_eta must lie in (0, 1)")
        if self.preload_torque <= 0 or self.insertion_torque_at_full_depth <= 0:
            raise InvalidSpecError("torques must be positive")
        if self.head_contact_stiffness <= 0:
            raise InvalidSpecError("head_contact_stiffness must be positive")
        if self.release_torque <= self.insertion_torque_at_full_depth:
            raise InvalidSpecError(
                "release threshold eta*preload must exceed the full-depth insertion torque"
            )

    @property
    def release_torque(self) -> float:
        return self.release_ratio_eta * self.preload_torque


def ef30_medium() -> MediumModel:
    # eta fitted from the 1.23 N*mm mean deployment / 2.5 N*mm preload pair
    return MediumModel(preload_torque=2.5, insertion_torque_at_full_depth=1.1, release_ratio_eta=0.492)


def tissue_medium() -> MediumModel:
    # eta fitted from the 2.55 N*mm mean deployment / 4.2 N*mm preload pair
    return MediumModel(preload_torque=4.2, insertion_torque_at_full_depth=2.3, release_ratio_eta=2.55 / 4.2)


@dataclass(frozen=True)
class DeploymentState:
    phase: Phase = Phase.UNLOADED
    depth: float = 0.0
    total_rotation: float = 0.0
    driver_torque: float = 0.0
    holding_torque: float = 0.0
    rotation_at_head_contact: float | None = None
    release_torque: float | None = None


def loading_torque(rotation: float, medium: MediumModel, loading_turns: float = 1.0) -> float:
    """Monotone loading-trace torque: ramps to the preload over loading_turns."""
    full = 2.0 * math.pi * loading_turns
    return medium.preload_torque * min(1.0, max(0.0, rotation) / full)


def load_anchor(spec: AnchorSpec, medium: MediumModel, state: DeploymentState | None = None) -> DeploymentState:
    """Seat a fresh anchor in the driver at the medium's preload torque."""
    state = state or DeploymentState()
    if state.phase not in (Phase.UNLOADED, Phase.RELEASED):
        raise DoubleLoadError(f"driver already holds an anchor (phase={state.phase.value})")
    return DeploymentState(phase=Phase.LOADED, holding_torque=medium.preload_torque)


def couple_to_robot(state: DeploymentState) -> DeploymentState:
    """Thread the loaded driver-anchor assembly onto the robot tool guide."""
    if state.phase != Phase.LOADED:
        raise PhaseError(f"can only couple a loaded driver (phase={state.phase.value})")
    return replace(state, phase=Phase.COUPLED)


def rotate_driver(
    state: DeploymentState,
    dtheta: float,
    in_contact: bool,
    normal_force: float,
    medium: MediumModel,
    spec: AnchorSpec,
    puncture_force: float = 0.5,
) -> DeploymentState:
    """Advance the deployment by a driver rotation of dtheta (rad).

    Rotation only bites while the tip presses with at least
    ``puncture_force``; otherwise the driver spins freely (depth and
    phase unchanged, torque ~ 0).  Within one call the machine may pass
    through head-contact into released; the release threshold crossing
    is solved exactly so the recorded release torque sits on
    eta * preload.
    """
    if dtheta < 0:
        raise OutOfRangeError("dtheta must be >= 0")
    if state.phase not in (Phase.COUPLED, Phase.INSERTING, Phase.HEAD_CONTACT):
        raise PhaseError(f"cannot rotate driver in phase {state.phase.value}")

    engaged = in_contact and normal_force >= puncture_force
    if not engaged:
        return replace(state, total_rotation=state.total_rotation + dtheta, driver_torque=0.0)

    depth = state.depth
    rotation = state.total_rotation
    phase = state.phase
    head_rotation = state.rotation_at_head_contact
    remaining = dtheta
    per_rad = spec.coil_pitch / (2.0 * math.pi)

    if phase in (Phase.COUPLED, Phase.INSERTING) and remaining > 0:
        needed = (spec.target_depth - depth) / per_rad
        used = min(remaining, needed)
        depth += used * per_rad
        rotation += used
        remaining -= used
        if depth > 0:
            phase = Phase.INSERTING
        if depth >= spec.target_depth - 1e-12:
            depth = spec.target_depth
            phase = Phase.HEAD_CONTACT
            head_rotation = rotation

    if phase == Phase.HEAD_CONTACT:
        threshold = medium.release_ratio_eta * state.holding_torque
        ramp_start = medium.insertion_torque_at_full_depth
        if remaining > 0:
            current = ramp_start + medium.head_contact_stiffness * (rotation - head_rotation)
            needed = max(0.0, threshold - current) / medium.head_contact_stiffness
            if remaining >= needed:
                # threads slip: anchor decouples exactly at the threshold
                rotation += needed
                return replace(
                    state,
                    phase=Phase.RELEASED,
                    depth=depth,
                    total_rotation=rotation,
                    driver_torque=threshold,
                    rotation_at_head_contact=head_rotation,
                    release_torque=threshold,
                )
            rotation += remaining
        torque = ramp_start + medium.head_contact_stiffness * (rotation - head_rotation)
    else:
        torque = medium.insertion_torque_at_full_depth * (depth / spec.target_depth)

    return replace(
        state,
        phase=phase,
        depth=depth,
        total_rotation=rotation,
        driver_torque=torque,
        rotation_at_head_contact=head_rotation,
    )


@dataclass(frozen=True)
class TorqueSensorSpec:
    """Hall-effect torque-sensing chain of the delivery handle.

    flexure_stiffness N*mm/rad, gaps/radius mm, resolution N*mm,
    calibration_error as a fraction of reading.
    """

    flexure_stiffness: float = 50.0
    magnet_gap_g0: float = 2.0
    lever_radius: float = 10.0
    field_coefficient: float = 100.0
    resolution: float = 0.07
    calibration_error: float = 0.05
    min_gap: float = 0.2

    def __post_init__(self):
        for name in ("flexure_stiffness", "magnet_gap_g0", "lever_radius", "field_coefficient", "resolution"):
            if getattr(self, name) <= 0:
                raise InvalidSpecError(f"{name} must be positive")
        if not 0 <= self.calibration_error <= 0.05:
            raise InvalidSpecError("calibration_error must lie in [0, 0.05]")
        if not 0 < self.min_gap < self.magnet_gap_g0:
            raise InvalidSpecError("min_gap must lie in (0, magnet_gap_g0)")

    @property
    def saturation_torque(self) -> float:
        """Torque at which the magnet gap closes to min_gap."""
        return self.flexure_stiffness * (self.magnet_gap_g0 - self.min_gap) / self.lever_radius


def signal_from_torque(torque: float, spec: TorqueSensorSpec) -> float:
    """Forward chain: flexure angle -> magnet gap -> inverse-square field signal."""
    if torque < 0:
        raise OutOfRangeError("torque must be >= 0")
    gap = spec.magnet_gap_g0 - spec.lever_radius * torque / spec.flexure_stiffness
    if gap <= spec.min_gap:
        raise SaturatedError(f"torque {torque} N*mm closes the magnet gap below {spec.min_gap} mm")
    return spec.field_coefficient / (gap * gap)


def torque_from_signal_exact(signal: float, spec: TorqueSensorSpec) -> float:
    """Analytic inverse of the forward chain (used to build calibrations)."""
    gap = math.sqrt(spec.field_coefficient / signal)
    return spec.flexure_stiffness * (spec.magnet_gap_g0 - gap) / spec.lever_radius


class CalibrationMap:
    """Monotone piecewise-cubic torque(signal) map fitted from samples."""

    def __init__(self, signals, torques):
        self.signals = np.asarray(signals, dtype=float)
        self.torques = np.asarray(torques, dtype=float)
        self._pchip = PchipInterpolator(self.signals, self.torques, extrapolate=False)

    def __call__(self, signal: float) -> float:
        s = min(max(float(signal), self.signals[0]), self.signals[-1])
        return float(self._pchip(s))

    def residual_rms(self, samples) -> float:
        sig, tau = np.asarray(samples, dtype=float).T
        pred = np.array([self(s) for s in sig])
        return float(np.sqrt(np.mean((pred - tau) ** 2)))


def fit_calibration(samples) -> CalibrationMap:
    """Fit a monotone torque(signal) map from (signal, torque) pairs."""
    arr = np.asarray(list(samples), dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 5:
        raise NonMonotoneDataError("need at least 5 (signal, torque) samples")
    signals, torques = arr[:, 0], arr[:, 1]
    if np.any(np.diff(signals) <= 0):
        raise NonMonotoneDataError("signals must be strictly increasing")
    if np.any(np.diff(torques) <= 0):
        raise NonMonotoneDataError("torques must be strictly increasing")
    return CalibrationMap(signals, torques)


@lru_cache(maxsize=8)
def _default_calibration(spec: TorqueSensorSpec) -> CalibrationMap:
    """Noise-free factory calibration over the usable torque range."""
    taus = np.linspace(0.0, 0.98 * spec.saturation_torque, 25)
    sigs = [signal_from_torque(t, spec) for t in taus]
    return CalibrationMap(sigs, taus)


def session_bias(spec: TorqueSensorSpec, seed: int) -> float:
    """Multiplicative calibration error of one powered-on session."""
    rng = np.random.default_rng([int(seed), 0x70712])
    return spec.calibration_error * float(rng.uniform(-1.0, 1.0))


def quantize_torque(reading: float, resolution: float) -> float:
    return round(reading / resolution) * resolution


def sense_torque(
    true_torque: float,
    spec: TorqueSensorSpec,
    seed: int = 0,
    calibration: CalibrationMap | None = None,
) -> float:
    """Torque reading through the full sensing chain for one session seed."""
    cal = calibration or _default_calibration(spec)
    raw = cal(signal_from_torque(true_torque, spec))
    biased = raw * (1.0 + session_bias(spec, seed))
    return quantize_torque(biased, spec.resolution)


class TorqueSensor:
    """Per-session sensor: fixed calibration bias, quantized readings."""

    def __init__(self, spec: TorqueSensorSpec, seed: int = 0, calibration: CalibrationMap | None = None):
        self.spec = spec
        self.bias = session_bias(spec, seed)
        self.calibration = calibration or _default_calibration(spec)

    def read(self, true_torque: float) -> float:
        raw = self.calibration(signal_from_torque(true_torque, self.spec))
        return quantize_torque(raw * (1.0 + self.bias), self.spec.resolution)
