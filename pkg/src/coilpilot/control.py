"""Goal-sequenced resolved-rate path tracing in pressure space.

The outer loop walks a discretized path: at each iteration it reads the
sensed tip, forms the error to the current goal and either advances the
goal (error under threshold) or commands the pressure increment
k * pinv(J) * e, clamped to the pressure limits.  The inner
pressure-regulation loop of the physical pumps is collapsed into a
first-order lag with slew limiting.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np

from .errors import InvalidSpecError
from .kinematics import ActuatorSpec, PressureVector, damped_pseudo_inverse, tip_from_pressures


class TraceStatus:
    TRACING = "tracing"
    GOAL_REACHED = "goal-reached"
    PATH_COMPLETE = "path-complete"
    STALLED = "stalled"
    UNREACHABLE = "unreachable"


@dataclass(frozen=True)
class ControllerConfig:
    """Gains and thresholds of the path-tracing loop."""

    rate_k: float = 0.1
    error_threshold_eps: float = 0.5
    damping_lambda: float = 1e-3
    max_iterations_per_goal: int = 400
    pressure_limits: tuple[float, float] = (1.0, 100.0)
    control_period: float = 0.02

    def __post_init__(self):
        if not 0.0 < self.rate_k < 1.0:
            raise InvalidSpecError("rate_k must lie in (0, 1)")
        if self.error_threshold_eps <= 0:
            raise InvalidSpecError("error_threshold_eps must be positive")
        if self.damping_lambda < 0:
            raise InvalidSpecError("damping_lambda must be >= 0")
        lo, hi = self.pressure_limits
        if not 0 <= lo < hi:
            raise InvalidSpecError("pressure_limits must satisfy 0 <= floor < max")


@dataclass(frozen=True)
class TraceState:
    """Immutable snapshot of the tracing loop."""

    goal_index_n: int = 0
    current_pressures: PressureVector = PressureVector(0.0, 0.0, 0.0)
    last_error_e: tuple[float, float, float] = (0.0, 0.0, 0.0)
    iterations_used: int = 0
    status: str = TraceStatus.TRACING

    @property
    def error_norm(self) -> float:
        return float(np.linalg.norm(self.last_error_e))


@dataclass(frozen=True)
class PlantConfig:
    """First-order pressure plant standing in for the syringe-pump loop.

    pid_gains are carried for fidelity experiments; the default model is
    the exact exponential lag below.
    """

    time_constant_tau: float = 0.2
    slew_limit: float = 150.0
    pid_gains: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.time_constant_tau <= 0:
            raise InvalidSpecError("time_constant_tau must be positive")
        if self.slew_limit <= 0:
            raise InvalidSpecError("slew_limit must be positive")


def robust_pseudo_inverse(J: np.ndarray, cfg: ControllerConfig) -> np.ndarray:
    """Damped pseudo-inverse, raising the damping 10x near singularity."""
    lam = cfg.damping_lambda
    smin = float(np.linalg.svd(J, compute_uv=False)[-1])
    if smin < 1e-4:
        lam *= 10.0
    return damped_pseudo_inverse(J, lam)


def control_step(
    state: TraceState,
    tip_measured,
    goal,
    J: np.ndarray,
    cfg: ControllerConfig,
) -> tuple[PressureVector, TraceState]:
    """One resolved-rate iteration toward ``goal``.

    Returns the (possibly unchanged) commanded pressures and the updated
    trace state.  Pressures never leave cfg.pressure_limits.
    """
    tip = np.asarray(tip_measured, dtype=float)
    g = np.asarray(goal, dtype=float)
    e = g - tip
    err = float(np.linalg.norm(e))
    if err < cfg.error_threshold_eps:
        new_state = replace(state, last_error_e=tuple(e), status=TraceStatus.GOAL_REACHED)
        return state.current_pressures, new_state

    p = state.current_pressures.as_array()
    dp = cfg.rate_k * (robust_pseudo_inverse(J, cfg) @ e)
    lo, hi = cfg.pressure_limits
    p_new = np.clip(p + dp, lo, hi)
    iterations = state.iterations_used + 1
    status = TraceStatus.STALLED if iterations >= cfg.max_iterations_per_goal else TraceStatus.TRACING
    commanded = PressureVector.from_array(p_new)
    new_state = replace(
        state,
        current_pressures=commanded,
        last_error_e=tuple(e),
        iterations_used=iterations,
        status=status,
    )
    return commanded, new_state


def plant_step(commanded, pressures, dt: float, plant: PlantConfig) -> np.ndarray:
    """Advance chamber pressures one step toward their commands.

    Exact exponential update of dp/dt = (cmd - p)/tau, with the step
    displacement clamped to +-slew_limit*dt.
    """
    if dt <= 0:
        raise InvalidSpecError("dt must be positive")
    cmd = np.asarray(commanded, dtype=float)
    p = np.asarray(pressures, dtype=float)
    delta = (cmd - p) * (1.0 - math.exp(-dt / plant.time_constant_tau))
    max_step = plant.slew_limit * dt
    return p + np.clip(delta, -max_step, max_step)


class TracingPlant(Protocol):
    """What trace_path needs from a plant (real simulation or synthetic)."""

    def time(self) -> float: ...

    def pressures(self) -> np.ndarray: ...

    def measure_tip(self) -> np.ndarray: ...

    def true_tip(self) -> np.ndarray: ...

    def jacobian(self) -> np.ndarray: ...

    def apply(self, commanded: np.ndarray) -> None: ...


@dataclass(frozen=True)
class GoalResult:
    index: int
    goal: tuple[float, float, float]
    achieved: tuple[float, float, float]
    sensed_error: float
    true_error: float
    iterations: int
    status: str


@dataclass
class TraceSample:
    time: float
    goal_index: int
    pressures: tuple[float, float, float]
    commanded: tuple[float, float, float]
    tip: tuple[float, float, float]
    goal: tuple[float, float, float]
    error_norm: float


@dataclass
class TraceReport:
    goals: list[GoalResult] = field(default_factory=list)
    samples: list[TraceSample] = field(default_factory=list)

    def _completed_errors(self) -> list[float]:
        return [g.sensed_error for g in self.goals if g.status != TraceStatus.UNREACHABLE]

    @property
    def median_error(self) -> float:
        errs = self._completed_errors()
        return float(np.median(errs)) if errs else float("nan")

    @property
    def min_error(self) -> float:
        errs = self._completed_errors()
        return float(np.min(errs)) if errs else float("nan")

    @property
    def max_error(self) -> float:
        errs = self._completed_errors()
        return float(np.max(errs)) if errs else float("nan")

    def summary(self) -> dict:
        true_errs = [g.true_error for g in self.goals if g.status != TraceStatus.UNREACHABLE]
        return {
            "goals_total": len(self.goals),
            "goals_reached": sum(1 for g in self.goals if g.status == TraceStatus.GOAL_REACHED),
            "goals_stalled": sum(1 for g in self.goals if g.status == TraceStatus.STALLED),
            "goals_unreachable": sum(1 for g in self.goals if g.status == TraceStatus.UNREACHABLE),
            "median_error_mm": self.median_error,
            "min_error_mm": self.min_error,
            "max_error_mm": self.max_error,
            "median_true_error_mm": float(np.median(true_errs)) if true_errs else float("nan"),
            "max_true_error_mm": float(np.max(true_errs)) if true_errs else float("nan"),
        }


def sample_workspace(
    spec: ActuatorSpec,
    p_floor: float = 1.0,
    n_grid: int = 13,
) -> np.ndarray:
    """Coarse reachable-tip samples over the pressure cube, for goal vetting."""
    grid = np.linspace(p_floor, spec.p_max, n_grid)
    tips = np.empty((n_grid ** 3, 3))
    for idx, (p1, p2, p3) in enumerate(itertools.product(grid, grid, grid)):
        tips[idx] = tip_from_pressures((p1, p2, p3), spec)
    return tips


def goal_reachable(goal, workspace: np.ndarray, margin: float = 5.0) -> bool:
    g = np.asarray(goal, dtype=float)
    d2 = np.sum((workspace - g) ** 2, axis=1)
    return bool(np.min(d2) <= margin * margin)


def trace_path(
    path,
    cfg: ControllerConfig,
    plant: TracingPlant,
    workspace: np.ndarray | None = None,
    reach_margin: float = 5.0,
) -> TraceReport:
    """Run the goal-sequenced tracing loop over all path points.

    Unreachable goals (outside the sampled workspace) and stalled goals
    are reported and skipped; tracing always terminates.
    """
    path = [np.asarray(p, dtype=float) for p in path]
    if not path:
        raise InvalidSpecError("path must be nonempty")

    report = TraceReport()
    state = TraceState(current_pressures=PressureVector.from_array(plant.pressures()))

    for n, goal in enumerate(path):
        if workspace is not None and not goal_reachable(goal, workspace, reach_margin):
            report.goals.append(
                GoalResult(n, tuple(goal), (math.nan,) * 3, math.nan, math.nan, 0, TraceStatus.UNREACHABLE)
            )
            continue

        state = replace(state, goal_index_n=n, iterations_used=0, status=TraceStatus.TRACING)
        while True:
            tip_s = plant.measure_tip()
            state = replace(state, current_pressures=PressureVector.from_array(plant.pressures()))
            commanded, state = control_step(state, tip_s, goal, plant.jacobian(), cfg)
            if state.status == TraceStatus.GOAL_REACHED:
                true = plant.true_tip()
                report.goals.append(
                    GoalResult(
                        n,
                        tuple(goal),
                        tuple(true),
                        state.error_norm,
                        float(np.linalg.norm(goal - true)),
                        state.iterations_used,
                        TraceStatus.GOAL_REACHED,
                    )
                )
                break
            plant.apply(commanded.as_array())
            report.samples.append(
                TraceSample(
                    time=plant.time(),
                    goal_index=n,
                    pressures=tuple(plant.pressures()),
                    commanded=(commanded.p1, commanded.p2, commanded.p3),
                    tip=tuple(tip_s),
                    goal=tuple(goal),
                    error_norm=state.error_norm,
                )
            )
            if state.status == TraceStatus.STALLED:
                true = plant.true_tip()
                report.goals.append(
                    GoalResult(
                        n,
                        tuple(goal),
                        tuple(true),
                        state.error_norm,
                        float(np.linalg.norm(goal - true)),
                        state.iterations_used,
                        TraceStatus.STALLED,
                    )
                )
                break

    return report
