"""One JSON config document, sections per module, every default explicit.

Scenario runs merge overrides into these defaults and write the resolved
document next to their outputs, so every experiment is self-describing.
"""

from __future__ import annotations

import copy
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .anchors import AnchorSpec, MediumModel, TorqueSensorSpec
from .control import ControllerConfig, PlantConfig
from .environment import AnchorSite, MotileTarget, SensorModel
from .errors import InvalidSpecError
from .geometry import Plane
from .kinematics import ActuatorSpec
from .mechanics import BalloonSpec, StackSpec
from .trajectory import TargetPoint, TargetSet


def default_config() -> dict:
    return {
        "mechanics": {
            "balloon": {
                "radius_a_mm": 4.0,
                "thickness_h_mm": 0.038,
                "youngs_e_n_mm2": 13.4,
                "correction_c": 0.409,
                "stiction_pressure_kpa": 5.0,
            },
            "stack": {"n_balloons": 20, "deflated_length_l0_mm": 25.0},
            "pressure_floor_kpa": 1.0,
            "reference_curve": "chamber_inflation_reference.csv",
        },
        "actuator": {
            "chamber_offset_dc_mm": 8.0,
            "chamber_angles_deg": [0.0, 120.0, 240.0],
            "p_max_kpa": 100.0,
        },
        "controller": {
            "rate_k": 0.1,
            "error_threshold_eps_mm": 0.5,
            "damping_lambda": 0.001,
            "max_iterations_per_goal": 400,
            "control_period_s": 0.02,
        },
        "plant": {
            "time_constant_tau_s": 0.2,
            "slew_limit_kpa_per_s": 150.0,
            "pid_gains": [0.0, 0.0, 0.0],
        },
        "environment": {
            "target": {
                "base_point_mm": [0.0, 0.0, 60.0],
                "normal": [0.0, 0.0, -1.0],
                "amplitude_mm": 8.0,
                "frequency_hz": 1.0,
                "phase_rad": 0.0,
                "surface_radius_mm": 40.0,
                "anchor_sites": [],
            },
            "sensor": {
                "position_noise_sigma_mm": 0.25,
                "quantization_mm": 0.01,
                "sample_rate_hz": 40.0,
            },
            "contact_stiffness_n_per_mm": 0.1,
            "puncture_force_n": 0.5,
        },
        "anchors": {
            "anchor": {
                "coil_length_mm": 6.0,
                "coil_pitch_mm_per_rev": 1.0,
                "head_length_mm": 3.0,
                "target_depth_mm": 5.0,
                "medium": "EF30",
            },
            "media": {
                "EF30": {
                    "preload_torque_nmm": 2.5,
                    "insertion_torque_at_full_depth_nmm": 1.1,
                    "release_ratio_eta": 0.492,
                    "head_contact_stiffness_nmm_per_rad": 20.0,
                },
                "tissue": {
                    "preload_torque_nmm": 4.2,
                    "insertion_torque_at_full_depth_nmm": 2.3,
                    "release_ratio_eta": 2.55 / 4.2,
                    "head_contact_stiffness_nmm_per_rad": 20.0,
                },
            },
            "require_sustained_force": True,
            "torque_sensor": {
                "flexure_stiffness_nmm_per_rad": 50.0,
                "magnet_gap_g0_mm": 2.0,
                "lever_radius_mm": 10.0,
                "field_coefficient": 100.0,
                "resolution_nmm": 0.07,
                "calibration_error": 0.05,
                "min_gap_mm": 0.2,
            },
        },
        "trajectory": {
            "standoff_mm": 10.0,
            "path_points": 500,
            "annulus_fixture": "annulus15.json",
            "circle_fixture": "circle24.json",
        },
        "simulation": {
            "dt_s": 0.005,
            "broadcast_hz": 30.0,
            "seed": 12345,
            "initial_pressure_kpa": 30.0,
            "primed": True,
        },
    }


def merge_config(base: dict, overrides: dict | None) -> dict:
    """Deep-merge overrides into a copy of base (dicts merged, rest replaced)."""
    merged = copy.deepcopy(base)
    if not overrides:
        return merged

    def _merge(dst: dict, src: dict):
        for key, val in src.items():
            if isinstance(val, dict) and isinstance(dst.get(key), dict):
                _merge(dst[key], val)
            else:
                dst[key] = copy.deepcopy(val)

    _merge(merged, overrides)
    return merged


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> dict:
    cfg = default_config()
    if path is not None:
        with open(path) as fh:
            cfg = merge_config(cfg, json.load(fh))
    return merge_config(cfg, overrides)


# ---------------------------------------------------------------- builders


def build_balloon(cfg: dict) -> BalloonSpec:
    b = cfg["mechanics"]["balloon"]
    return BalloonSpec(
        radius_a=b["radius_a_mm"],
        thickness_h=b["thickness_h_mm"],
        youngs_E=b["youngs_e_n_mm2"],
        correction_c=b["correction_c"],
        stiction_pressure=b["stiction_pressure_kpa"],
    )


def build_stack(cfg: dict) -> StackSpec:
    s = cfg["mechanics"]["stack"]
    return StackSpec(
        balloon=build_balloon(cfg),
        n_balloons=int(s["n_balloons"]),
        deflated_length_l0=s["deflated_length_l0_mm"],
    )


def build_actuator(cfg: dict) -> ActuatorSpec:
    a = cfg["actuator"]
    stack = build_stack(cfg)
    return ActuatorSpec(
        stacks=(stack, stack, stack),
        chamber_offset_dc=a["chamber_offset_dc_mm"],
        chamber_angles=tuple(math.radians(x) for x in a["chamber_angles_deg"]),
        p_max=a["p_max_kpa"],
    )


def build_controller(cfg: dict) -> ControllerConfig:
    c = cfg["controller"]
    return ControllerConfig(
        rate_k=c["rate_k"],
        error_threshold_eps=c["error_threshold_eps_mm"],
        damping_lambda=c["damping_lambda"],
        max_iterations_per_goal=int(c["max_iterations_per_goal"]),
        pressure_limits=(cfg["mechanics"]["pressure_floor_kpa"], cfg["actuator"]["p_max_kpa"]),
        control_period=c["control_period_s"],
    )


def build_plant(cfg: dict) -> PlantConfig:
    p = cfg["plant"]
    return PlantConfig(
        time_constant_tau=p["time_constant_tau_s"],
        slew_limit=p["slew_limit_kpa_per_s"],
        pid_gains=tuple(p["pid_gains"]),
    )


def build_target(cfg: dict) -> MotileTarget:
    t = cfg["environment"]["target"]
    normal = np.asarray(t["normal"], dtype=float)
    normal = normal / np.linalg.norm(normal)
    sites = tuple(AnchorSite(s["label"], s["u_mm"], s["v_mm"]) for s in t["anchor_sites"])
    return MotileTarget(
        base_pose=Plane(point=np.asarray(t["base_point_mm"], dtype=float), normal=normal),
        amplitude=t["amplitude_mm"],
        frequency=t["frequency_hz"],
        phase=t["phase_rad"],
        surface_radius=t["surface_radius_mm"],
        anchor_sites=sites,
    )


def build_sensor(cfg: dict, seed: int | None = None) -> SensorModel:
    s = cfg["environment"]["sensor"]
    return SensorModel(
        position_noise_sigma=s["position_noise_sigma_mm"],
        quantization=s["quantization_mm"],
        sample_rate=s["sample_rate_hz"],
        seed=cfg["simulation"]["seed"] if seed is None else seed,
    )


def build_anchor(cfg: dict) -> AnchorSpec:
    a = cfg["anchors"]["anchor"]
    return AnchorSpec(
        coil_length=a["coil_length_mm"],
        coil_pitch=a["coil_pitch_mm_per_rev"],
        head_length=a["head_length_mm"],
        target_depth=a["target_depth_mm"],
        medium=a["medium"],
    )


def build_medium(cfg: dict, name: str) -> MediumModel:
    try:
        m = cfg["anchors"]["media"][name]
    except KeyError:
        raise InvalidSpecError(f"unknown medium {name!r}") from None
    return MediumModel(
        preload_torque=m["preload_torque_nmm"],
        insertion_torque_at_full_depth=m["insertion_torque_at_full_depth_nmm"],
        release_ratio_eta=m["release_ratio_eta"],
        head_contact_stiffness=m["head_contact_stiffness_nmm_per_rad"],
    )


def build_torque_sensor_spec(cfg: dict) -> TorqueSensorSpec:
    t = cfg["anchors"]["torque_sensor"]
    return TorqueSensorSpec(
        flexure_stiffness=t["flexure_stiffness_nmm_per_rad"],
        magnet_gap_g0=t["magnet_gap_g0_mm"],
        lever_radius=t["lever_radius_mm"],
        field_coefficient=t["field_coefficient"],
        resolution=t["resolution_nmm"],
        calibration_error=t["calibration_error"],
        min_gap=t["min_gap_mm"],
    )


# ------------------------------------------------------------- data files


def data_path(name: str) -> Path:
    return Path(str(resources.files("coilpilot").joinpath("data").joinpath(name)))


def load_target_set(source) -> TargetSet:
    """Read a TargetSet JSON: {source, points: [{label, x_mm, y_mm, z_mm}]}."""
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
        path = Path(source)
        if not path.exists():
            path = data_path(str(source))
        doc = json.loads(path.read_text())
    else:
        doc = json.loads(source)
    points = tuple(
        TargetPoint(label=p["label"], position=np.array([p["x_mm"], p["y_mm"], p["z_mm"]]))
        for p in doc["points"]
    )
    return TargetSet(points=points, source=doc.get("source", ""))


def dump_target_set(targets: TargetSet) -> str:
    doc = {
        "source": targets.source,
        "points": [
            {"label": p.label, "x_mm": p.position[0], "y_mm": p.position[1], "z_mm": p.position[2]}
            for p in targets.points
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
