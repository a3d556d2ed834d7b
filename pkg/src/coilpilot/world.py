"""Single-owner simulation stepper tying mechanics, kinematics, control,
environment and anchors together.

One SimulationWorld instance owns all mutable state and is advanced only
through step(); queued commands are applied at step boundaries, which
makes a run a pure function of (config, seed, command stream) and lets a
scripted headless run and a live server session produce identical
telemetry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import anchors as anc
from . import config as cfgmod
from . import control as ctl
from . import environment as env
from . import kinematics as kin
from . import mechanics as mech
from .control import TraceStatus

# legal workflow command actions (plus 'stop', which is session control)
COMMAND_ACTIONS = (
    "load_anchor",
    "couple",
    "jog",
    "engage_path",
    "pause",
    "manual_override",
    "rotate_driver",
    "release_check",
    "reset",
    "stop",
)


@dataclass(frozen=True)
class AnchorRecord:
    index: int
    site_label: str
    u_mm: float
    v_mm: float
    target_u_mm: float
    target_v_mm: float
    lateral_error_mm: float
    depth_mm: float
    release_torque_nmm: float
    released_time_s: float


class SimulationWorld:
    """Deterministic fixed-step world; dt and all defaults come from cfg."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        sim = cfg["simulation"]
        self.dt = float(sim["dt_s"])
        self.seed = int(sim["seed"])
        self.step_index = 0

        self.stack = cfgmod.build_stack(cfg)
        self.actuator = cfgmod.build_actuator(cfg)
        self.controller_cfg = cfgmod.build_controller(cfg)
        self.plant_cfg = cfgmod.build_plant(cfg)
        self.target = cfgmod.build_target(cfg)
        self.sensor = cfgmod.build_sensor(cfg)
        self.anchor_spec = cfgmod.build_anchor(cfg)
        self.medium = cfgmod.build_medium(cfg, self.anchor_spec.medium)
        self.torque_sensor = anc.TorqueSensor(cfgmod.build_torque_sensor_spec(cfg), seed=self.seed)
        self.contact_stiffness = cfg["environment"]["contact_stiffness_n_per_mm"]
        self.puncture_force = cfg["environment"]["puncture_force_n"]
        self.p_floor = cfg["mechanics"]["pressure_floor_kpa"]

        self.control_every = max(1, round(self.controller_cfg.control_period / self.dt))

        p0 = float(sim["initial_pressure_kpa"])
        self.p_cmd = np.full(3, p0)
        self.p_actual = np.full(3, p0)
        primed = bool(sim["primed"])
        self.first_stroke_active = [not primed] * 3
        self.p_running_max = self.p_actual.copy()

        self.deploy = anc.DeploymentState()
        self.pending_rotation = 0.0
        self.mode = "manual"

        self.goals: list[np.ndarray] = []
        self.goal_labels: list[str] = []
        self.goal_index = 0
        self.trace_state = ctl.TraceState()
        self.goal_results: list[ctl.GoalResult] = []
        self._workspace: np.ndarray | None = None

        self.anchors_implanted: list[AnchorRecord] = []
        self.current_site_label = ""
        self.events: list[dict] = []
        self.event_log: list[dict] = []
        self.command_log: list[dict] = []
        self._queue: list[dict] = []
        self.stopped = False
        self.stop_at_step: int | None = None

        self._refresh_pose()
        self._sensor_index = -1
        self._sense()

    # ------------------------------------------------------------ helpers

    @property
    def sim_time(self) -> float:
        return self.step_index * self.dt

    def _chamber_lengths(self) -> list[float]:
        return [
            mech.stack_length(self.p_actual[i], self.actuator.stacks[i], self.first_stroke_active[i])
            for i in range(3)
        ]

    def _refresh_pose(self):
        lengths = self._chamber_lengths()
        self.arc = kin.arc_from_lengths(*lengths, spec=self.actuator)
        pose = kin.tip_from_arc(self.arc)
        self.tip_free = pose.position
        self.tip_tangent = pose.tangent
        self.plane = env.target_pose_at(self.sim_time, self.target)
        prev = getattr(self, "tip", None)
        self.contact, self.tip = env.resolve_contact(
            self.tip_free,
            self.tip_tangent,
            self.plane,
            self.contact_stiffness,
            self.target.surface_radius,
            surface_center=self.plane.point,
            prev_point=prev if (prev is not None and self.contact_sticky()) else None,
        )

    def contact_sticky(self) -> bool:
        c = getattr(self, "contact", None)
        return bool(c is not None and c.in_contact)

    def _sense(self):
        idx = env.sensor_sample_index(self.sim_time, self.sensor)
        if idx != self._sensor_index:
            self._sensor_index = idx
            self.tip_sensed = env.sense_tip(self.tip, self.sensor, sample_index=idx)

    def display_arc(self) -> kin.ArcState:
        """Arc whose endpoint matches the physical (contact-corrected) tip."""
        if not self.contact.in_contact:
            return self.arc
        return arc_from_tip(self.tip)

    def workspace(self) -> np.ndarray:
        if self._workspace is None:
            self._workspace = ctl.sample_workspace(self.actuator, self.p_floor)
        return self._workspace

    def _emit(self, event: dict):
        event = dict(event)
        event["sim_time"] = self.sim_time
        self.events.append(event)
        self.event_log.append(event)

    def drain_events(self) -> list[dict]:
        out, self.events = self.events, []
        return out

    # ----------------------------------------------------------- commands

    def queue_command(self, command: dict, at_step: int | None = None):
        """Schedule a command; applied at the given step (default: next)."""
        when = self.step_index if at_step is None else max(at_step, self.step_index)
        self._queue.append({"at": when, "command": dict(command)})

    def _apply_due_commands(self):
        due = [q for q in self._queue if q["at"] <= self.step_index]
        self._queue = [q for q in self._queue if q["at"] > self.step_index]
        for q in due:
            self._apply_command(q["command"])

    def _apply_command(self, cmd: dict):
        action = cmd.get("action")
        seq = cmd.get("sequence", -1)
        if action not in COMMAND_ACTIONS:
            self._emit({"event": "error", "message": f"unknown action {action!r}", "client_sequence": seq})
            return
        logged = {k: v for k, v in cmd.items() if k not in ("at_step", "at_s")}
        self.command_log.append(
            {"step": self.step_index, "client_sequence": seq, "action": action, "command": logged}
        )
        try:
            getattr(self, f"_cmd_{action}")(cmd)
            self._emit({"event": "command-accepted", "action": action, "client_sequence": seq})
        except anc.DoubleLoadError as exc:
            self._emit({"event": "error", "message": str(exc), "client_sequence": seq})
        except Exception as exc:  # malformed arguments keep the session alive
            self._emit({"event": "error", "message": f"{type(exc).__name__}: {exc}", "client_sequence": seq})

    def _cmd_load_anchor(self, cmd: dict):
        self.deploy = anc.load_anchor(self.anchor_spec, self.medium, self.deploy)
        self._emit({"event": "anchor-loaded", "holding_torque_nmm": self.deploy.holding_torque})

    def _cmd_couple(self, cmd: dict):
        self.deploy = anc.couple_to_robot(self.deploy)
        self._emit({"event": "anchor-coupled"})

    def _cmd_jog(self, cmd: dict):
        if self.mode == "tracing":
            raise ctl.InvalidSpecError("jog rejected while tracing; pause or manual_override first")
        chamber = int(cmd["chamber"])
        if chamber not in (1, 2, 3):
            raise ctl.InvalidSpecError("chamber must be 1, 2 or 3")
        dp = float(cmd["dp_kpa"])
        self.p_cmd[chamber - 1] = float(np.clip(self.p_cmd[chamber - 1] + dp, 0.0, self.actuator.p_max))

    def _cmd_engage_path(self, cmd: dict):
        goals, labels = self._resolve_path(cmd)
        self.goals = goals
        self.goal_labels = labels
        self.goal_index = 0
        self.trace_state = ctl.TraceState(current_pressures=kin.PressureVector.from_array(self.p_cmd))
        self.mode = "tracing"
        if labels and labels[-1]:
            self.current_site_label = labels[-1]
        self._emit({"event": "path-engaged", "path_id": cmd.get("path_id", ""), "goals": len(goals)})

    def _cmd_pause(self, cmd: dict):
        self.mode = "manual"
        self._emit({"event": "paused"})

    def _cmd_manual_override(self, cmd: dict):
        self.mode = "manual"
        self._emit({"event": "manual-override"})

    def _cmd_rotate_driver(self, cmd: dict):
        dtheta = float(cmd["dtheta_rad"])
        if dtheta < 0:
            raise ctl.InvalidSpecError("dtheta_rad must be >= 0")
        if self.deploy.phase not in (anc.Phase.COUPLED, anc.Phase.INSERTING, anc.Phase.HEAD_CONTACT):
            raise anc.PhaseError(f"cannot rotate driver in phase {self.deploy.phase.value}")
        self.mode = "deploying" if self.mode != "tracing" else self.mode
        self.pending_rotation += dtheta

    def _cmd_release_check(self, cmd: dict):
        self._emit(
            {
                "event": "release-status",
                "released": self.deploy.phase == anc.Phase.RELEASED,
                "phase": self.deploy.phase.value,
            }
        )

    def _cmd_reset(self, cmd: dict):
        self.__init__(self.cfg)
        self._emit({"event": "reset"})

    def _cmd_stop(self, cmd: dict):
        self.stopped = True

    def _resolve_path(self, cmd: dict) -> tuple[list[np.ndarray], list[str]]:
        """Goal list for engage_path: standoff targets of a site fixture, or
        explicit points."""
        if "points" in cmd:
            return [np.asarray(p, dtype=float) for p in cmd["points"]], ["" for _ in cmd["points"]]
        path_id = cmd.get("path_id", "")
        standoff = self.cfg["trajectory"]["standoff_mm"]
        sites = self.target.anchor_sites
        if not sites:
            raise ctl.InvalidSpecError(f"no anchor sites configured for path {path_id!r}")
        wanted = cmd.get("site")
        chosen = [s for s in sites if wanted is None or s.label == wanted]
        if not chosen:
            raise ctl.InvalidSpecError(f"unknown site {wanted!r}")
        goals, labels = [], []
        for s in chosen:
            world = env.site_world_position(s, self.target, 0.0)
            goals.append(world + standoff * self.target.base_pose.normal)
            labels.append(s.label)
        return goals, labels

    # ---------------------------------------------------------------- step

    def step(self):
        """Advance the world by one dt."""
        self._apply_due_commands()
        if self.stopped:
            return
        if self.mode == "tracing" and self.step_index % self.control_every == 0:
            self._control_update()
        self._plant_update()
        self.step_index += 1
        self._refresh_pose()
        self._deployment_update()
        self._sense()

    def run_until(self, t: float):
        while self.sim_time < t - 1e-12 and not self.stopped:
            self.step()

    def _control_update(self):
        while self.goal_index < len(self.goals):
            goal = self.goals[self.goal_index]
            if not ctl.goal_reachable(goal, self.workspace()):
                self.goal_results.append(
                    ctl.GoalResult(
                        self.goal_index, tuple(goal), (math.nan,) * 3, math.nan, math.nan, 0, TraceStatus.UNREACHABLE
                    )
                )
                self._emit({"event": "goal-unreachable", "goal_index": self.goal_index})
                self.goal_index += 1
                self.trace_state = replace(self.trace_state, iterations_used=0)
                continue
            p_meas = np.clip(self.p_actual, self.p_floor, self.actuator.p_max)
            self.trace_state = replace(
                self.trace_state,
                goal_index_n=self.goal_index,
                current_pressures=kin.PressureVector.from_array(self.p_cmd),
            )
            J = kin.pressure_jacobian(p_meas, self.actuator, self.p_floor)
            commanded, self.trace_state = ctl.control_step(
                self.trace_state, self.tip_sensed, goal, J, self.controller_cfg
            )
            if self.trace_state.status == TraceStatus.GOAL_REACHED:
                self._record_goal(TraceStatus.GOAL_REACHED)
                self.goal_index += 1
                self.trace_state = replace(self.trace_state, iterations_used=0, status=TraceStatus.TRACING)
                continue
            self.p_cmd = commanded.as_array()
            if self.trace_state.status == TraceStatus.STALLED:
                self._record_goal(TraceStatus.STALLED)
                self._emit({"event": "goal-stalled", "goal_index": self.goal_index})
                self.goal_index += 1
                self.trace_state = replace(self.trace_state, iterations_used=0, status=TraceStatus.TRACING)
                continue
            return
        if self.goals:
            self.mode = "manual"
            self.trace_state = replace(self.trace_state, status=TraceStatus.PATH_COMPLETE)
            self._emit({"event": "path-complete", "goals": len(self.goals)})
            self.goals = []
            self.goal_index = 0

    def _record_goal(self, status: str):
        goal = self.goals[self.goal_index]
        err_true = float(np.linalg.norm(goal - self.tip))
        self.goal_results.append(
            ctl.GoalResult(
                self.goal_index,
                tuple(goal),
                tuple(self.tip),
                self.trace_state.error_norm,
                err_true,
                self.trace_state.iterations_used,
                status,
            )
        )
        if status == TraceStatus.GOAL_REACHED:
            label = self.goal_labels[self.goal_index] if self.goal_index < len(self.goal_labels) else ""
            if label:
                self.current_site_label = label
            self._emit(
                {
                    "event": "goal-reached",
                    "goal_index": self.goal_index,
                    "error_mm": self.trace_state.error_norm,
                    "site": label,
                }
            )

    def _plant_update(self):
        self.p_actual = ctl.plant_step(self.p_cmd, self.p_actual, self.dt, self.plant_cfg)
        for i in range(3):
            if not self.first_stroke_active[i]:
                continue
            stiction = self.actuator.stacks[i].balloon.stiction_pressure
            self.p_running_max[i] = max(self.p_running_max[i], self.p_actual[i])
            # the first stroke ends at the first deflating reversal after the
            # films have been pushed past the stiction threshold
            if self.p_running_max[i] > stiction + 1e-3 and self.p_actual[i] < self.p_running_max[i] - 0.1:
                self.first_stroke_active[i] = False

    def _deployment_update(self):
        if self.pending_rotation <= 0.0:
            return
        dtheta, self.pending_rotation = self.pending_rotation, 0.0
        if self.deploy.phase not in (anc.Phase.COUPLED, anc.Phase.INSERTING, anc.Phase.HEAD_CONTACT):
            return
        before = self.deploy
        self.deploy = anc.rotate_driver(
            before,
            dtheta,
            self.contact.in_contact,
            self.contact.normal_force,
            self.medium,
            self.anchor_spec,
            self.puncture_force,
        )
        if self.deploy.driver_torque == 0.0 and before.depth == self.deploy.depth and dtheta > 0:
            if not (self.contact.in_contact and self.contact.normal_force >= self.puncture_force):
                self._emit({"event": "not-engaged", "normal_force_n": self.contact.normal_force})
        if self.deploy.phase == anc.Phase.RELEASED and before.phase != anc.Phase.RELEASED:
            self._latch_anchor()

    def _latch_anchor(self):
        u, v = env.world_to_surface(self.tip, self.target)
        site = next((s for s in self.target.anchor_sites if s.label == self.current_site_label), None)
        if site is None and self.target.anchor_sites:
            site = min(self.target.anchor_sites, key=lambda s: (s.u_mm - u) ** 2 + (s.v_mm - v) ** 2)
        tu, tv = (site.u_mm, site.v_mm) if site else (math.nan, math.nan)
        record = AnchorRecord(
            index=len(self.anchors_implanted) + 1,
            site_label=site.label if site else "",
            u_mm=u,
            v_mm=v,
            target_u_mm=tu,
            target_v_mm=tv,
            lateral_error_mm=math.hypot(u - tu, v - tv) if site else math.nan,
            depth_mm=self.deploy.depth,
            release_torque_nmm=self.deploy.release_torque or 0.0,
            released_time_s=self.sim_time,
        )
        self.anchors_implanted.append(record)
        self._emit(
            {
                "event": "anchor-released",
                "anchor_index": record.index,
                "site": record.site_label,
                "lateral_error_mm": record.lateral_error_mm,
                "depth_mm": record.depth_mm,
                "release_torque_nmm": record.release_torque_nmm,
            }
        )

    # ------------------------------------------------------------ snapshot

    def torque_reading(self) -> float:
        torque = self.deploy.driver_torque if self.deploy.phase != anc.Phase.RELEASED else 0.0
        return self.torque_sensor.read(torque)

    def snapshot(self, backbone_points: int = 25) -> dict:
        backbone = kin.backbone_polyline(self.display_arc(), backbone_points)
        sites = []
        implanted = {r.site_label for r in self.anchors_implanted}
        for s in self.target.anchor_sites:
            world = env.site_world_position(s, self.target, self.sim_time)
            sites.append(
                {
                    "label": s.label,
                    "position_mm": [round(x, 6) for x in world.tolist()],
                    "implanted": s.label in implanted,
                }
            )
        plane = self.plane
        return {
            "tip_mm": [round(x, 6) for x in self.tip.tolist()],
            "tip_sensed_mm": [round(x, 6) for x in self.tip_sensed.tolist()],
            "tangent": [round(x, 9) for x in self.tip_tangent.tolist()],
            "backbone_mm": [[round(x, 6) for x in p] for p in backbone.tolist()],
            "pressures_kpa": [round(x, 6) for x in self.p_actual.tolist()],
            "commanded_kpa": [round(x, 6) for x in self.p_cmd.tolist()],
            "target_plane": {
                "point_mm": [round(x, 6) for x in plane.point.tolist()],
                "normal": plane.normal.tolist(),
                "displacement_mm": round(env.target_displacement(self.sim_time, self.target), 6),
            },
            "anchor_sites": sites,
            "deployment": {
                "phase": self.deploy.phase.value,
                "depth_mm": round(self.deploy.depth, 6),
                "rotation_rad": round(self.deploy.total_rotation, 6),
                "torque_reading_nmm": round(self.torque_reading(), 6),
            },
            "contact": {
                "in_contact": self.contact.in_contact,
                "force_n": round(self.contact.normal_force, 6),
                "penetration_mm": round(self.contact.penetration, 6),
            },
            "controller": {
                "mode": self.mode,
                "goal_index": self.goal_index,
                "goals_total": len(self.goals),
                "error_mm": round(self.trace_state.error_norm, 6),
            },
            "anchors_implanted": len(self.anchors_implanted),
        }


def arc_from_tip(position) -> kin.ArcState:
    """Closed-form constant-curvature arc whose tip lands on ``position``.

    Position-only inverse used for display consistency when contact
    shortens the effective backbone; valid for bend angles in [0, pi).
    """
    p = np.asarray(position, dtype=float)
    lateral = math.hypot(p[0], p[1])
    z = p[2]
    phi = math.atan2(p[1], p[0]) if lateral > 0 else 0.0
    if lateral == 0.0:
        return kin.ArcState(arclength_s=max(z, 1e-9), curvature_kappa=0.0, plane_angle_phi=phi)
    theta = 2.0 * math.atan2(lateral, z)
    kappa = math.sin(theta) / z if z > 0 else (1.0 - math.cos(theta)) / lateral
    s = theta / kappa
    return kin.ArcState(arclength_s=s, curvature_kappa=kappa, plane_angle_phi=phi)


class WorldPlant:
    """Adapter exposing a SimulationWorld as a control.TracingPlant."""

    def __init__(self, world: SimulationWorld):
        self.world = world

    def time(self) -> float:
        return self.world.sim_time

    def pressures(self) -> np.ndarray:
        return self.world.p_actual.copy()

    def measure_tip(self) -> np.ndarray:
        return self.world.tip_sensed.copy()

    def true_tip(self) -> np.ndarray:
        return self.world.tip.copy()

    def jacobian(self) -> np.ndarray:
        p = np.clip(self.world.p_actual, self.world.p_floor, self.world.actuator.p_max)
        return kin.pressure_jacobian(p, self.world.actuator, self.world.p_floor)

    def apply(self, commanded: np.ndarray) -> None:
        self.world.p_cmd = np.asarray(commanded, dtype=float).copy()
        for _ in range(self.world.control_every):
            self.world.step()
