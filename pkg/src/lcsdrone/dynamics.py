"""Free flight, scenarios and the full-scenario simulator."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _engine
from .contact import StepConfig
from .controller import ControllerConfig
from .core import (
    CollisionFrame,
    Mode,
    State,
    VehicleParams,
    Wall,
    make_collision_frame,
    to_collision_frame,
)

GROUND_REST_OFFSET = 0.2


class ScenarioKind(str, enum.Enum):
    DROP_TEST = "drop"
    FLIGHT_COLLISION = "flight"
    PLAN = "plan"


class EventKind(str, enum.Enum):
    CONTACT_START = "ContactStart"
    CONTACT_END = "ContactEnd"
    MODE_SWITCH = "ModeSwitch"
    COLLISION_DETECTED = "CollisionDetected"


_EVENT_CODES = {
    _engine.EV_CONTACT_START: EventKind.CONTACT_START,
    _engine.EV_CONTACT_END: EventKind.CONTACT_END,
    _engine.EV_MODE_SWITCH: EventKind.MODE_SWITCH,
    _engine.EV_COLLISION_DETECTED: EventKind.COLLISION_DETECTED,
}


class SimulationError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t={t:.6g} s")
        self.t = t


@dataclass(frozen=True)
class Event:
    t: float
    kind: EventKind
    frame: int | None = None  # wall index for contact events
    mode: Mode | None = None  # new mode for mode switches


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one simulated run.

    ``approach_velocities`` are inertial reference velocities: the first one
    is flown from t = 0, later ones start ``hold_time`` after each detected
    collision. Without a controller the vehicle is unpowered.
    """

    kind: ScenarioKind
    initial_state: State
    walls: tuple
    mode_schedule: tuple
    duration: float
    vehicle: VehicleParams = VehicleParams()
    controller: ControllerConfig | None = None
    gravity_axis: tuple = (0.0, 0.0, -1.0)
    approach_velocities: tuple = ()
    setpoint: tuple | None = None
    hold_time: float = 1.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        object.__setattr__(self, "walls", tuple(self.walls))
        modes = tuple(Mode.parse(m) for m in self.mode_schedule)
        if not modes:
            raise ValueError("mode_schedule needs at least one mode")
        object.__setattr__(self, "mode_schedule", modes)
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise ValueError("duration must be non-negative")
        if self.kind != ScenarioKind.PLAN and not self.walls:
            raise ValueError("collision scenarios need at least one wall")
        g = np.asarray(self.gravity_axis, dtype=float)
        if g.shape != (3,) or abs(np.linalg.norm(g) - 1.0) > 1e-9:
            raise ValueError("gravity_axis must be a unit 3-vector")
        object.__setattr__(self, "gravity_axis", tuple(g))
        vels = tuple(tuple(float(c) for c in np.asarray(v, dtype=float).reshape(3)) for v in self.approach_velocities)
        object.__setattr__(self, "approach_velocities", vels)
        if self.setpoint is not None:
            object.__setattr__(self, "setpoint", tuple(float(c) for c in np.asarray(self.setpoint).reshape(3)))
        if self.hold_time < 0:
            raise ValueError("hold_time must be non-negative")

    @property
    def frames(self) -> tuple:
        return tuple(w.frame for w in self.walls)

    def with_params(self, wall_index: int, params) -> "Scenario":
        """Copy with explicit contact parameters on one wall."""
        from dataclasses import replace

        walls = list(self.walls)
        w = walls[wall_index]
        overrides = dict(w.params)
        overrides[params.mode] = params
        walls[wall_index] = Wall(w.frame, w.surface, overrides)
        return replace(self, walls=tuple(walls))


@dataclass
class Trajectory:
    """Columnar record of a simulation; row 0 is the initial state.

    Contact forces are in the collision frame of ``contact_frame`` (-1 when
    no plane is engaged); ``force_estimate`` is the inertial external-force
    estimate the detector saw.
    """

    t: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    contact_force: np.ndarray
    contact_active: np.ndarray
    contact_frame: np.ndarray
    setpoint: np.ndarray
    mode: np.ndarray
    force_estimate: np.ndarray
    slack: np.ndarray
    events: list = field(default_factory=list)
    frames: tuple = ()
    mass: float = 1.3

    def __len__(self) -> int:
        return len(self.t)

    def state(self, i: int) -> State:
        return State(self.position[i], self.velocity[i])

    @property
    def final_state(self) -> State:
        return self.state(-1)

    def in_frame(self, frame: CollisionFrame | int) -> np.ndarray:
        """(N, 6) collision-frame states."""
        if isinstance(frame, (int, np.integer)):
            frame = self.frames[frame]
        R = frame.rotation
        rel = (self.position - frame.origin) @ R
        rel[:, 0] -= frame.rest_offset
        return np.hstack([rel, self.velocity @ R])

    def events_of(self, kind: EventKind) -> list:
        return [e for e in self.events if e.kind == kind]


def step_free(state: State, input_accel, vehicle: VehicleParams, h: float) -> State:
    """Implicit-Euler step of ``a = u - b * v``; gravity belongs in ``input_accel``."""
    if not h > 0:
        raise ValueError("h must be positive")
    a = np.asarray(input_accel, dtype=float)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise ValueError("input_accel must be 3 finite numbers")
    p_new = np.zeros(3)
    v_new = np.zeros(3)
    _engine.free_step(state.position, state.velocity, a, np.asarray(vehicle.drag, dtype=float), float(h), p_new, v_new)
    if not (np.all(np.isfinite(p_new)) and np.all(np.isfinite(v_new))):
        raise FloatingPointError("free step produced a non-finite state")
    return State(p_new, v_new)


def _engine_inputs(scenario: Scenario):
    walls = scenario.walls
    n = len(walls)
    origin = np.zeros((n, 3))
    rot = np.zeros((n, 3, 3))
    off = np.zeros(n)
    par = np.zeros((n, 2, 4))
    for j, w in enumerate(walls):
        origin[j] = w.frame.origin
        rot[j] = w.frame.rotation
        off[j] = w.frame.rest_offset
        for mode in Mode:
            p = w.contact_params(mode)
            par[j, mode - 1] = (p.k, p.f, p.mu, p.nu)
    return origin, rot, off, par


def run_engine(scenario: Scenario, cfg: StepConfig, record: bool = True, max_events: int = 4096):
    """Raw engine call for a scenario (tuple of arrays, see ``_engine.run``)."""
    n_steps = int(round(scenario.duration / cfg.h))
    origin, rot, off, par = _engine_inputs(scenario)
    veh = scenario.vehicle
    gvec = veh.gravity * np.asarray(scenario.gravity_axis)
    ctrl = scenario.controller
    p0 = scenario.initial_state.position.copy()
    sp0 = np.asarray(scenario.setpoint if scenario.setpoint is not None else p0, dtype=float).copy()
    approach = np.array(scenario.approach_velocities, dtype=float).reshape(-1, 3)
    modes = np.array([int(m) for m in scenario.mode_schedule], dtype=np.int64)
    if ctrl is None:
        ctrl_args = (False, 1.0, np.zeros((1, 2)), np.zeros(6), 0.0, 0)
    else:
        ctrl_args = (True, ctrl.lambda_th, ctrl.alpha_array(), ctrl.gains_array(), ctrl.noise_std, ctrl.seed)
    on, lam_th, alpha, gains, noise, seed = ctrl_args
    return _engine.run(p0, scenario.initial_state.velocity.copy(), float(cfg.h), n_steps, gvec,
                       float(veh.mass), np.asarray(veh.drag, dtype=float), origin, rot, off, par,
                       modes, on, float(lam_th), alpha, gains, sp0, approach, float(scenario.hold_time),
                       float(noise), int(seed), record, max_events)


def _check_status(out, cfg: StepConfig):
    status, fail_step = out[0], out[1]
    if status == _engine.STATUS_NONFINITE:
        raise SimulationError("non-finite state in contact/free step", (fail_step + 1) * cfg.h)
    if status == _engine.STATUS_EVENT_OVERFLOW:
        raise SimulationError("event buffer overflow", out[2] * cfg.h)


def _events(ev_t, ev_kind, ev_frame) -> list:
    events = []
    for t, kind, frame in zip(ev_t, ev_kind, ev_frame):
        kind = _EVENT_CODES[int(kind)]
        if kind == EventKind.MODE_SWITCH:
            events.append(Event(float(t), kind, None, Mode(int(frame))))
        else:
            events.append(Event(float(t), kind, int(frame) if frame >= 0 else None))
    return events


def simulate(scenario: Scenario, cfg: StepConfig = StepConfig()) -> Trajectory:
    """Integrate a scenario at a fixed step; the result is bit-reproducible."""
    out = run_engine(scenario, cfg, record=True)
    _check_status(out, cfg)
    (_, _, _, _, _, _, T, P, V, LAM, ACT, FIDX, SP, MODE, LHAT, W, ev_t, ev_kind, ev_frame) = out
    return Trajectory(t=T, position=P, velocity=V, contact_force=LAM, contact_active=ACT,
                      contact_frame=FIDX, setpoint=SP, mode=MODE, force_estimate=LHAT, slack=W,
                      events=_events(ev_t, ev_kind, ev_frame), frames=scenario.frames,
                      mass=scenario.vehicle.mass)


def ground_frame(rest_offset: float = GROUND_REST_OFFSET) -> CollisionFrame:
    """Horizontal ground plane at z = 0 with X along +z."""
    return make_collision_frame((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), (1.0, 0.0, 0.0), rest_offset)


def drop_test_scenario(height: float, mode, surface: str = "concrete", duration: float = 1.0,
                       params=None) -> Scenario:
    """Unpowered, drag-free drop released ``height`` above first guard contact."""
    if height < 0:
        raise ValueError("height must be non-negative")
    mode = Mode.parse(mode)
    frame = ground_frame()
    overrides = {mode: params} if params is not None else {}
    start = State((0.0, 0.0, frame.rest_offset + height), (0.0, 0.0, 0.0))
    return Scenario(kind=ScenarioKind.DROP_TEST, initial_state=start,
                    walls=(Wall(frame, surface, overrides),), mode_schedule=(mode,),
                    duration=duration, vehicle=VehicleParams(mass=1.3, drag=(0.0, 0.0, 0.0)),
                    controller=None, name=f"drop_{height:g}_{mode.name.lower()}_{surface}")


def wall(point, normal, surface: str, rest_offset: float = GROUND_REST_OFFSET, params=None) -> Wall:
    """Vertical wall with Z along +z."""
    return Wall(make_collision_frame(point, normal, (0.0, 0.0, 1.0), rest_offset), surface, dict(params or {}))


def flight_collision_scenario(walls, start, approach_cf, modes, duration: float = 3.0,
                              controller: ControllerConfig | None = None,
                              vehicle: VehicleParams | None = None, name: str = "flight") -> Scenario:
    """Powered flight that approaches ``walls[0]`` at a collision-frame velocity.

    ``approach_cf`` = (xdot, ydot) along the first wall's X and Y axes; the
    vehicle starts at that velocity so it hits the wall at the requested speed.
    """
    from .core import FLIGHT_DRAG

    walls = tuple(walls)
    R = walls[0].frame.rotation
    v = R[:, 0] * approach_cf[0] + R[:, 1] * approach_cf[1]
    start = np.asarray(start, dtype=float)
    return Scenario(kind=ScenarioKind.FLIGHT_COLLISION, initial_state=State(start, v), walls=walls,
                    mode_schedule=tuple(modes), duration=duration,
                    vehicle=vehicle or VehicleParams(drag=FLIGHT_DRAG),
                    controller=controller or ControllerConfig(), approach_velocities=(tuple(v),),
                    setpoint=tuple(start), name=name)


def collision_frame_series(traj: Trajectory, frame_index: int = 0) -> np.ndarray:
    return traj.in_frame(frame_index)


def to_cf(state: State, frame: CollisionFrame) -> np.ndarray:
    return to_collision_frame(state, frame)
