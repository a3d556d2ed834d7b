"""Kineto-static simulator and closed-loop control engine for a
stacked-balloon anchor-delivery robot.

Modules:
- mechanics: balloon/stack statics (pressure <-> deflection/length)
- kinematics: constant-curvature arc mapping, tip pose, pressure Jacobian
- control: resolved-rate path tracing and the pressure plant model
- environment: motile tissue target, tip contact, tracker noise
- anchors: coil deployment state machine and torque-sensing chain
- trajectory: spline paths, arclength discretization, site layouts
- world/scenarios/server/cli: simulation stepper, experiment harness,
  live session server and command line
"""

from .anchors import (
    AnchorSpec,
    DeploymentState,
    MediumModel,
    Phase,
    TorqueSensor,
    TorqueSensorSpec,
    fit_calibration,
    load_anchor,
    rotate_driver,
    sense_torque,
)
from .control import ControllerConfig, PlantConfig, TraceState, control_step, plant_step, trace_path
from .environment import ContactState, MotileTarget, SensorModel, resolve_contact, sense_tip, target_pose_at
from .errors import CoilPilotError
from .geometry import Plane
from .kinematics import (
    ActuatorSpec,
    ArcState,
    PressureVector,
    TipPose,
    arc_from_lengths,
    backbone_polyline,
    damped_pseudo_inverse,
    pressure_jacobian,
    tip_from_arc,
)
from .mechanics import (
    BalloonSpec,
    ChamberState,
    StackSpec,
    balloon_deflection,
    length_pressure_derivative,
    plate_deflection,
    pressure_from_length,
    stack_length,
)
from .trajectory import DiscretePath, TargetSet, circular_sites, discretize, project_standoff, spline_path
from .world import SimulationWorld

__version__ = "0.1.0"

__all__ = [
    "AnchorSpec", "DeploymentState", "MediumModel", "Phase", "TorqueSensor", "TorqueSensorSpec",
    "fit_calibration", "load_anchor", "rotate_driver", "sense_torque",
    "ControllerConfig", "PlantConfig", "TraceState", "control_step", "plant_step", "trace_path",
    "ContactState", "MotileTarget", "SensorModel", "resolve_contact", "sense_tip", "target_pose_at",
    "CoilPilotError", "Plane",
    "ActuatorSpec", "ArcState", "PressureVector", "TipPose", "arc_from_lengths",
    "backbone_polyline", "damped_pseudo_inverse", "pressure_jacobian", "tip_from_arc",
    "BalloonSpec", "ChamberState", "StackSpec", "balloon_deflection", "length_pressure_derivative",
    "plate_deflection", "pressure_from_length", "stack_length",
    "DiscretePath", "TargetSet", "circular_sites", "discretize", "project_standoff", "spline_path",
    "SimulationWorld",
]
