"""Deterministic experiment scenarios mirroring the bench studies, plus
summary computation and telemetry replay.

Every scenario is a pure function of (config, seed): telemetry CSVs are
byte-identical across reruns, and summaries are computed from the
written rows so replaying a file reproduces the summary exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import anchors as anc
from . import config as cfgmod
from . import control as ctl
from . import environment as env
from . import kinematics as kin
from . import mechanics as mech
from . import telemetry as tel
from .errors import UnknownScenarioError
from .trajectory import discretize, spline_path
from .world import SimulationWorld, WorldPlant

SCENARIOS = ("mechanics-sweep", "contact-test", "path-trace", "implant", "calibrate-torque")


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int = 12345
    overrides: dict = field(default_factory=dict)
    output_dir: Path = Path("out")
    config_path: str | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise UnknownScenarioError(f"unknown scenario {self.scenario!r}; known: {SCENARIOS}")
        self.output_dir = Path(self.output_dir)


SCENARIO_PRESETS: dict[str, dict] = {
    "mechanics-sweep": {},
    "calibrate-torque": {},
    "contact-test": {
        "simulation": {"primed": False, "initial_pressure_kpa": 0.0},
        "contact_test": {
            "approach": "vertical",
            "ramp_s": 2.0,
            "settle_s": 3.0,
            "cycles": 10,
            "rest_penetration_mm": 2.3,
            "bend45_rest_penetration_mm": 0.4,
            "bend45_plane_z_mm": 45.0,
        },
    },
    "path-trace": {
        "environment": {"target": {"base_point_mm": [0.0, 0.0, 500.0]}},
        "path_trace": {"fixture": "annulus15.json", "n_points": 500, "reach_margin_mm": 5.0},
    },
    "implant": {
        "simulation": {"initial_pressure_kpa": 3.0},
        "environment": {
            "target": {
                "base_point_mm": [0.0, 0.0, 48.0],
                "anchor_sites": [
                    {"label": "site-1", "u_mm": 24.0, "v_mm": 0.0},
                    {"label": "site-2", "u_mm": -12.0, "v_mm": 20.78461},
                    {"label": "site-3", "u_mm": -12.0, "v_mm": -20.78461},
                ],
            }
        },
        "implant": {
            "rounds": 3,
            "rest_penetration_mm": 5.5,
            "press_step_mm": 0.25,
            "xy_gain": 0.3,
            "confirm_settle_s": 0.6,
            "rotation_rate_rad_per_s": 9.42,
            "settle_s": 1.5,
            "wait_timeout_s": 90.0,
        },
    },
}


def resolve_config(sc: ScenarioConfig) -> dict:
    cfg = cfgmod.load_config(sc.config_path)
    cfg = cfgmod.merge_config(cfg, SCENARIO_PRESETS.get(sc.scenario, {}))
    cfg = cfgmod.merge_config(cfg, sc.overrides)
    cfg["simulation"]["seed"] = int(sc.seed)
    return cfg


# ---------------------------------------------------------------- summaries


def summarize(scenario: str, rows: list[dict]) -> dict:
    if scenario == "mechanics-sweep":
        hi = [r for r in rows if r["pressure_kpa"] >= 5.0]
        lo = [r for r in rows if r["pressure_kpa"] < 5.0]
        full_scale = max(r["model_displacement_mm"] for r in rows)
        max_hi = max(abs(r["deviation_mm"]) for r in hi)
        return {
            "scenario": scenario,
            "rows": len(rows),
            "max_abs_deviation_mm_over_5kpa": max_hi,
            "max_abs_deviation_pct_of_stroke": 100.0 * max_hi / full_scale,
            "max_abs_deviation_mm_below_5kpa": max(abs(r["deviation_mm"]) for r in lo) if lo else 0.0,
            "chambers": sorted({r["chamber_id"] for r in rows}),
        }
    if scenario == "contact-test":
        window = [r for r in rows if r["cycle"] >= 0]
        cycles = sorted({r["cycle"] for r in window})
        per_cycle = []
        for c in cycles:
            cr = [r for r in window if r["cycle"] == c]
            per_cycle.append(sum(r["in_contact"] for r in cr) / len(cr))
        forces = [r["force_n"] for r in window]
        return {
            "scenario": scenario,
            "rows": len(rows),
            "cycles": len(cycles),
            "mean_force_n": float(np.mean(forces)),
            "max_force_n": float(np.max(forces)),
            "min_cycle_contact_fraction": min(per_cycle) if per_cycle else 0.0,
            "contact_fraction": float(np.mean([r["in_contact"] for r in window])),
        }
    if scenario == "path-trace":
        done = [r for r in rows if r["status"] != "unreachable"]
        errs = [r["sensed_error_mm"] for r in done]
        true_errs = [r["true_error_mm"] for r in done]
        return {
            "scenario": scenario,
            "goals_total": len(rows),
            "goals_reached": sum(1 for r in rows if r["status"] == "goal-reached"),
            "goals_stalled": sum(1 for r in rows if r["status"] == "stalled"),
            "goals_unreachable": sum(1 for r in rows if r["status"] == "unreachable"),
            "median_error_mm": float(np.median(errs)),
            "min_error_mm": float(np.min(errs)),
            "max_error_mm": float(np.max(errs)),
            "median_true_error_mm": float(np.median(true_errs)),
            "max_true_error_mm": float(np.max(true_errs)),
            "iterations_total": sum(r["iterations"] for r in rows),
        }
    if scenario == "implant":
        released = [r for r in rows if r["released"]]
        errs = [r["lateral_error_mm"] for r in released]
        return {
            "scenario": scenario,
            "anchors_total": len(rows),
            "anchors_released": len(released),
            "success_rate": len(released) / len(rows) if rows else 0.0,
            "mean_lateral_error_mm": float(np.mean(errs)) if errs else math.nan,
            "min_lateral_error_mm": float(np.min(errs)) if errs else math.nan,
            "max_lateral_error_mm": float(np.max(errs)) if errs else math.nan,
            "depths_mm": sorted({r["depth_mm"] for r in released}),
            "mean_release_torque_nmm": float(np.mean([r["release_torque_nmm"] for r in released]))
            if released
            else math.nan,
            "reference_pull_force_n": anc.REFERENCE_PULL_FORCE_N,
        }
    if scenario == "calibrate-torque":
        rels = [r["rel_error"] for r in rows]
        res = 0.07
        quantized = all(abs(r["reading_nmm"] / res - round(r["reading_nmm"] / res)) < 1e-9 for r in rows)
        return {
            "scenario": scenario,
            "sessions": len({r["session"] for r in rows}),
            "mean_abs_rel_error": float(np.mean(np.abs(rels))),
            "max_abs_rel_error": float(np.max(np.abs(rels))),
            "readings_quantized_at_resolution": bool(quantized),
            "resolution_nmm": res,
        }
    raise UnknownScenarioError(scenario)


def replay(telemetry_csv) -> dict:
    """Recompute the summary of a telemetry file; identical for untouched files."""
    scenario, rows = tel.read_rows(Path(telemetry_csv))
    return summarize(scenario, rows)


# ---------------------------------------------------------------- scenarios


def _write_aux(path: Path, columns: list[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([tel.format_value(v) for v in row])


def run_mechanics_sweep(cfg: dict, out: Path) -> list[tuple]:
    stack = cfgmod.build_stack(cfg)
    l0 = stack.deflated_length_l0
    ref_path = cfgmod.data_path(cfg["mechanics"]["reference_curve"])
    rows = []
    with open(ref_path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("pressure"):
                continue
            p_s, disp_s, cid_s = line.split(",")
            p, ref, cid = float(p_s), float(disp_s), int(cid_s)
            model = mech.stack_length(p, stack) - l0
            first = mech.stack_length(p, stack, first_stroke=True) - l0
            rows.append((cid, p, model, first, ref, model - ref))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def _contact_hold_pressures(cfg: dict, approach: str, plane_z: float, rest_pen: float) -> np.ndarray:
    """Scripted hold pressures pressing the free tip rest_pen beyond the
    resting plane, for a vertical or 45-degree bent approach."""
    stack = cfgmod.build_stack(cfg)
    act = cfgmod.build_actuator(cfg)
    first = not cfg["simulation"]["primed"]
    tip_z = plane_z + rest_pen
    if approach == "vertical":
        return np.full(3, mech.pressure_from_length(tip_z, stack, act.p_max, first_stroke=first))
    theta = math.pi / 4.0
    s = tip_z / (math.sin(theta) / theta)
    kappa = theta / s
    lengths = [s * (1.0 - act.chamber_offset_dc * kappa * math.cos(a)) for a in act.chamber_angles]
    return np.array([mech.pressure_from_length(l, stack, act.p_max, first_stroke=first) for l in lengths])


def run_contact_test(cfg: dict, out: Path) -> list[tuple]:
    opts = cfg["contact_test"]
    approach = opts["approach"]
    if approach not in ("vertical", "bend45"):
        raise UnknownScenarioError(f"unknown contact approach {approach!r}")
    if approach == "bend45":
        cfg = cfgmod.merge_config(
            cfg, {"environment": {"target": {"base_point_mm": [0.0, 0.0, opts["bend45_plane_z_mm"]]}}}
        )
        rest_pen = opts["bend45_rest_penetration_mm"]
    else:
        rest_pen = opts["rest_penetration_mm"]
    world = SimulationWorld(cfg)
    plane_z = float(cfg["environment"]["target"]["base_point_mm"][2])
    hold = _contact_hold_pressures(cfg, approach, plane_z, rest_pen)

    ramp_s, settle_s, cycles = opts["ramp_s"], opts["settle_s"], int(opts["cycles"])
    freq = world.target.frequency
    measure_start = ramp_s + settle_s
    t_end = measure_start + cycles / freq

    rows = []
    while world.sim_time < t_end - 1e-9:
        t = world.sim_time
        world.p_cmd = hold * min(1.0, t / ramp_s) if ramp_s > 0 else hold.copy()
        world.step()
        t = world.sim_time
        cyc = int((t - measure_start) * freq) if t >= measure_start - 1e-12 else -1
        if cyc >= cycles:
            cyc = cycles - 1
        rows.append(
            (
                t,
                env.target_displacement(t, world.target),
                world.tip[0],
                world.tip[1],
                world.tip[2],
                world.contact.penetration,
                world.contact.normal_force,
                int(world.contact.in_contact),
                cyc,
            )
        )
    return rows


def run_path_trace(cfg: dict, out: Path) -> tuple[list[tuple], ctl.TraceReport]:
    opts = cfg["path_trace"]
    targets = cfgmod.load_target_set(opts["fixture"])
    curve = spline_path(targets)
    path = discretize(curve, int(opts["n_points"]))

    world = SimulationWorld(cfg)
    plant = WorldPlant(world)
    controller = cfgmod.build_controller(cfg)
    workspace = ctl.sample_workspace(world.actuator, world.p_floor)
    report = ctl.trace_path(path.points, controller, plant, workspace, opts["reach_margin_mm"])

    rows = [
        (
            g.index,
            g.goal[0],
            g.goal[1],
            g.goal[2],
            g.achieved[0],
            g.achieved[1],
            g.achieved[2],
            g.sensed_error,
            g.true_error,
            g.iterations,
            g.status,
        )
        for g in report.goals
    ]
    _write_aux(
        out / "samples.csv",
        ["t_s", "goal_index", "p1_kpa", "p2_kpa", "p3_kpa", "cmd1_kpa", "cmd2_kpa", "cmd3_kpa",
         "tip_x_mm", "tip_y_mm", "tip_z_mm", "goal_x_mm", "goal_y_mm", "goal_z_mm", "error_mm"],
        [
            (s.time, s.goal_index, *s.pressures, *s.commanded, *s.tip, *s.goal, s.error_norm)
            for s in report.samples
        ],
    )
    return rows, report


class ImplantOperator:
    """Deterministic stand-in for the human operator of the implant workflow.

    Decisions use only console-visible state: events, the force/target
    readouts, commanded/gauge pressures and the kinematic model.  Contact
    is established by servoing the sensed tip laterally onto the site
    while feeding the press depth forward in model space (commanded
    pressures never overshoot their equilibrium), then confirming the
    puncture force over a full motion cycle before rotating the driver.
    Emitted commands are logged by the world, so a recorded run can be
    replayed through the session server command-for-command.
    """

    def __init__(self, world: SimulationWorld, opts: dict):
        self.world = world
        self.opts = opts
        self.sites = list(world.target.anchor_sites)
        self.rounds = int(opts["rounds"])
        self.queue_cmd = world.queue_command
        self.anchor_no = 0
        self.phase = "start"
        self.wait_until = 0.0
        self.retract_pressures: np.ndarray | None = None
        self.extra_penetration = 0.0
        self.min_force = math.inf
        self.seq = 0
        self.done = False
        self._deadline = world.sim_time + float(opts["wait_timeout_s"])

    def _send(self, action: str, **params):
        self.seq += 1
        self.queue_cmd({"kind": "command", "action": action, "sequence": self.seq, **params})

    def _site(self):
        return self.sites[self.anchor_no % len(self.sites)]

    def _bump_deadline(self):
        self._deadline = self.world.sim_time + float(self.opts["wait_timeout_s"])

    def _press_depth_reached(self) -> bool:
        """Predicted rest-pose penetration of the commanded equilibrium tip."""
        w = self.world
        tip_pred = kin.tip_from_pressures(w.p_cmd, w.actuator)
        pen_pred = -w.target.base_pose.signed_distance(tip_pred)
        return pen_pred >= self.opts["rest_penetration_mm"] + self.extra_penetration

    def decide(self, events: list[dict]):
        w = self.world
        if w.sim_time > self._deadline:
            raise RuntimeError(f"implant operator timed out in phase {self.phase!r}")
        if self.phase == "start":
            self._send("load_anchor")
            self._send("couple")
            self._send("engage_path", path_id="circle24", site=self._site().label)
            self.phase = "goto"
            self._bump_deadline()
        elif self.phase == "goto":
            if any(e["event"] == "path-complete" for e in events):
                self.retract_pressures = w.p_cmd.copy()
                self.extra_penetration = 0.0
                self.phase = "press"
                self._bump_deadline()
        elif self.phase == "press":
            if w.step_index % w.control_every != 0:
                return
            if self._press_depth_reached():
                self.wait_until = w.sim_time + float(self.opts["confirm_settle_s"])
                self.min_force = math.inf
                self.phase = "confirm"
                self._bump_deadline()
                return
            n = w.target.base_pose.normal
            site_world = env.site_world_position(self._site(), w.target, 0.0)
            lateral = site_world - w.tip_sensed
            lateral = lateral - np.dot(lateral, n) * n
            dtip = self.opts["xy_gain"] * lateral - self.opts["press_step_mm"] * n
            J = kin.pressure_jacobian(np.clip(w.p_cmd, w.p_floor, w.actuator.p_max), w.actuator, w.p_floor)
            push = kin.damped_pseudo_inverse(J, 1e-3) @ dtip
            for chamber in range(3):
                self._send("jog", chamber=chamber + 1, dp_kpa=float(push[chamber]))
        elif self.phase == "confirm":
            if w.sim_time < self.wait_until:
                return
            self.min_force = min(self.min_force, w.contact.normal_force)
            cycle = 1.0 / w.target.frequency
            if w.sim_time >= self.wait_until + cycle:
                if self.min_force >= w.puncture_force:
                    self.phase = "rotate"
                else:
                    self.extra_penetration += 0.4
                    self.phase = "press"
                self._bump_deadline()
        elif self.phase == "rotate":
            if any(e["event"] == "anchor-released" for e in events):
                self.phase = "retract"
                self._bump_deadline()
                return
            if w.step_index % w.control_every == 0 and w.deploy.phase != anc.Phase.RELEASED:
                dtheta = self.opts["rotation_rate_rad_per_s"] * w.controller_cfg.control_period
                self._send("rotate_driver", dtheta_rad=float(dtheta))
        elif self.phase == "retract":
            for chamber in range(3):
                dp = float(self.retract_pressures[chamber] - w.p_cmd[chamber])
                self._send("jog", chamber=chamber + 1, dp_kpa=dp)
            self.wait_until = w.sim_time + float(self.opts["settle_s"])
            self.phase = "settle"
            self._bump_deadline()
        elif self.phase == "settle":
            if w.sim_time >= self.wait_until:
                self.anchor_no += 1
                if self.anchor_no >= self.rounds * len(self.sites):
                    self._send("stop")
                    self.done = True
                else:
                    self.phase = "start"


class ImplantRecorder:
    """Collects implant session telemetry and writes the session files.

    Shared by the headless scenario runner and the live session server so
    that both paths produce byte-identical outputs for the same world
    evolution.
    """

    SAMPLE_COLUMNS = [
        "t_s", "cmd1_kpa", "cmd2_kpa", "cmd3_kpa", "p1_kpa", "p2_kpa", "p3_kpa",
        "tip_x_mm", "tip_y_mm", "tip_z_mm", "force_n", "deploy_phase", "mode",
    ]

    def __init__(self, world: SimulationWorld):
        self.world = world
        self.samples: list[tuple] = []
        self.torque_rows: list[tuple] = []
        self._was_rotating = False

    def after_step(self):
        world = self.world
        rotating = world.deploy.phase in (anc.Phase.INSERTING, anc.Phase.HEAD_CONTACT)
        released_now = world.deploy.phase == anc.Phase.RELEASED and self._was_rotating
        if rotating or released_now:
            torque = (
                world.deploy.release_torque
                if released_now and world.deploy.release_torque is not None
                else world.deploy.driver_torque
            )
            self.torque_rows.append(
                (world.deploy.total_rotation, world.deploy.depth, torque, world.deploy.phase.value)
            )
            if released_now:
                self.torque_rows.append(
                    (world.deploy.total_rotation, world.deploy.depth, 0.0, world.deploy.phase.value)
                )
        self._was_rotating = rotating
        if world.step_index % world.control_every == 0:
            self.samples.append(
                (
                    world.sim_time,
                    *world.p_cmd.tolist(),
                    *world.p_actual.tolist(),
                    *world.tip.tolist(),
                    world.contact.normal_force,
                    world.deploy.phase.value,
                    world.mode,
                )
            )

    def anchor_rows(self) -> list[tuple]:
        n_sites = max(1, len(self.world.target.anchor_sites))
        return [
            (
                rec.index,
                (rec.index - 1) // n_sites + 1,
                rec.site_label,
                rec.u_mm,
                rec.v_mm,
                rec.target_u_mm,
                rec.target_v_mm,
                rec.lateral_error_mm,
                rec.depth_mm,
                rec.release_torque_nmm,
                rec.released_time_s,
                1,
            )
            for rec in self.world.anchors_implanted
        ]

    def write(self, out: Path) -> dict:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        _write_aux(out / "samples.csv", self.SAMPLE_COLUMNS, self.samples)
        _write_aux(out / "torque_trace.csv", ["rotation_rad", "depth_mm", "torque_nmm", "phase"], self.torque_rows)
        _write_aux(
            out / "commands.csv",
            ["step", "client_sequence", "action", "command_json"],
            [
                (c["step"], c["client_sequence"], c["action"], _json_compact(c["command"]))
                for c in self.world.command_log
            ],
        )
        _write_primary(out / "telemetry.csv", "implant", self.anchor_rows())
        _, parsed = tel.read_rows(out / "telemetry.csv")
        summary = summarize("implant", parsed)
        summary["seed"] = int(self.world.cfg["simulation"]["seed"])
        tel.write_summary(out / "summary.json", summary)
        return summary


def run_implant(cfg: dict, out: Path) -> dict:
    """Headless implant run: scripted operator driving the command queue."""
    world = SimulationWorld(cfg)
    operator = ImplantOperator(world, cfg["implant"])
    recorder = ImplantRecorder(world)
    while not world.stopped:
        operator.decide(world.drain_events())
        world.step()
        recorder.after_step()
    return recorder.write(out)


def _json_compact(obj) -> str:
    import json

    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def run_calibrate_torque(cfg: dict, out: Path) -> list[tuple]:
    spec = cfgmod.build_torque_sensor_spec(cfg)
    seed = int(cfg["simulation"]["seed"])
    taus_cal = np.linspace(0.0, 0.98 * spec.saturation_torque, 25)
    cal_samples = [(anc.signal_from_torque(t, spec), t) for t in taus_cal]
    calibration = anc.fit_calibration(cal_samples)
    _write_aux(out / "calibration_samples.csv", ["signal", "torque_nmm"], cal_samples)

    taus = np.round(np.arange(0.5, 4.2 + 1e-9, 0.1), 10)
    rows = []
    for session in range(1000):
        sensor = anc.TorqueSensor(spec, seed=seed + session, calibration=calibration)
        for tau in taus:
            reading = sensor.read(float(tau))
            err = reading - float(tau)
            rows.append((session, float(tau), reading, abs(err), err / float(tau)))
    return rows


def run_scenario(sc: ScenarioConfig) -> dict:
    """Run one scenario: writes resolved config, telemetry CSV(s) and summary."""
    cfg = resolve_config(sc)
    out = Path(sc.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(_json_pretty(cfg))

    if sc.scenario == "implant":
        return run_implant(cfg, out)

    if sc.scenario == "mechanics-sweep":
        rows = run_mechanics_sweep(cfg, out)
    elif sc.scenario == "contact-test":
        rows = run_contact_test(cfg, out)
    elif sc.scenario == "path-trace":
        rows, _ = run_path_trace(cfg, out)
    elif sc.scenario == "calibrate-torque":
        rows = run_calibrate_torque(cfg, out)
    else:  # pragma: no cover - guarded by ScenarioConfig
        raise UnknownScenarioError(sc.scenario)

    telemetry_path = out / "telemetry.csv"
    _write_primary(telemetry_path, sc.scenario, rows)
    _, parsed = tel.read_rows(telemetry_path)
    summary = summarize(sc.scenario, parsed)
    summary["seed"] = int(cfg["simulation"]["seed"])
    tel.write_summary(out / "summary.json", summary)
    return summary


def _write_primary(path: Path, scenario: str, rows) -> None:
    columns = [name for name, _ in tel.SCHEMAS[scenario]]
    tel.write_rows(path, scenario, columns, rows)


def _json_pretty(obj) -> str:
    import json

    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
