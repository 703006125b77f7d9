"""Exhaustive search over approach velocities and collision mode sequences."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .contact import StepConfig
from .controller import ControllerConfig
from .core import FLIGHT_DRAG, Mode, State, VehicleParams
from .dynamics import Scenario, ScenarioKind, SimulationError, Trajectory, run_engine, simulate


class PlanningError(RuntimeError):
    pass


@dataclass(frozen=True)
class Candidate:
    """One point of the search space.

    ``approach_velocities[i]`` = (xdot, ydot) in the collision frame of the
    i-th wall; ``mode_sequence[i]`` is the stiffness used for collision i.
    """

    approach_velocities: tuple
    mode_sequence: tuple

    def __post_init__(self):
        vels = tuple((float(a), float(b)) for a, b in self.approach_velocities)
        object.__setattr__(self, "approach_velocities", vels)
        object.__setattr__(self, "mode_sequence", tuple(Mode.parse(m) for m in self.mode_sequence))

    @property
    def approach_velocity(self) -> tuple | None:
        return self.approach_velocities[0] if self.approach_velocities else None

    @property
    def nominal_speed(self) -> float:
        """Sum of commanded approach speeds, used to break score ties."""
        return sum(math.hypot(a, b) for a, b in self.approach_velocities)

    def label(self) -> str:
        vel = ";".join(f"{a:+.3f},{b:+.3f}" for a, b in self.approach_velocities)
        modes = "-".join(m.name.lower() for m in self.mode_sequence)
        return f"[{vel}] {modes}"


@dataclass(frozen=True)
class PlanQuery:
    """Start/goal in the hovering plane plus the walls to be visited in order.

    ``velocity_decisions`` is how many collisions get a commanded approach
    velocity; later collisions are reached by the recovery motion alone.
    It defaults to ``n_collisions``.
    """

    start: tuple
    goal: tuple
    walls: tuple = ()
    grid_resolution: float = 0.1
    velocity_bound: float = 1.5
    modes_allowed: tuple = (Mode.RIGID, Mode.FLEXIBLE)
    n_collisions: int = 1
    velocity_decisions: int | None = None
    altitude: float = 1.0
    horizon: float = 8.0
    hold_time: float = 1.0
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    vehicle: VehicleParams = field(default_factory=lambda: VehicleParams(drag=FLIGHT_DRAG))
    name: str = ""

    def __post_init__(self):
        for key in ("start", "goal"):
            val = tuple(float(c) for c in getattr(self, key))
            if len(val) != 2 or not all(math.isfinite(c) for c in val):
                raise ValueError(f"{key} must be two finite numbers")
            object.__setattr__(self, key, val)
        object.__setattr__(self, "walls", tuple(self.walls))
        if not (self.grid_resolution > 0 and math.isfinite(self.grid_resolution)):
            raise ValueError("grid_resolution must be positive")
        if not (self.velocity_bound > 0 and math.isfinite(self.velocity_bound)):
            raise ValueError("velocity_bound must be positive")
        modes = tuple(sorted({Mode.parse(m) for m in self.modes_allowed}))
        if not modes:
            raise ValueError("modes_allowed must not be empty")
        object.__setattr__(self, "modes_allowed", modes)
        if self.n_collisions < 0:
            raise ValueError("n_collisions must be non-negative")
        if self.n_collisions > 0 and not self.walls:
            raise ValueError("collisions requested but no walls given")
        nd = self.n_collisions if self.velocity_decisions is None else int(self.velocity_decisions)
        if not 0 <= nd <= self.n_collisions or (self.n_collisions > 0 and nd == 0):
            raise ValueError("velocity_decisions must be between 1 and n_collisions")
        object.__setattr__(self, "velocity_decisions", nd)
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.hold_time < 0:
            raise ValueError("hold_time must be non-negative")

    def grid(self) -> np.ndarray:
        """Velocity grid points: integer multiples of the resolution within the bound."""
        n = int(math.floor(self.velocity_bound / self.grid_resolution + 1e-9))
        return np.array([round(i * self.grid_resolution, 12) for i in range(-n, n + 1)])

    def with_grid(self, resolution: float) -> "PlanQuery":
        from dataclasses import replace

        return replace(self, grid_resolution=resolution)


@dataclass
class PlanResult:
    best: Candidate
    terminal_distance: float
    trajectory: Trajectory
    all_scores: list
    query: PlanQuery
    collisions_detected: list = field(default_factory=list)

    @property
    def best_index(self) -> int:
        return next(i for i, (c, _) in enumerate(self.all_scores) if c == self.best)


def enumerate_candidates(query: PlanQuery) -> list:
    """Lexicographic product of velocity grid points and mode sequences."""
    grid = query.grid()
    if grid.size == 0:
        raise PlanningError("velocity grid is empty")
    points = list(itertools.product(grid.tolist(), repeat=2))
    vel_choices = itertools.product(points, repeat=query.velocity_decisions)
    vel_choices = list(vel_choices)
    mode_choices = list(itertools.product(query.modes_allowed, repeat=query.n_collisions))
    return [Candidate(v, m) for v in vel_choices for m in mode_choices]


def _wall_for(query: PlanQuery, i: int):
    return query.walls[min(i, len(query.walls) - 1)]


def candidate_scenario(candidate: Candidate, query: PlanQuery) -> Scenario:
    """Flight scenario realising a candidate.

    The vehicle starts at the first approach velocity and tracks a reference
    moving at that velocity until the first detected collision; subsequent
    approach phases begin ``hold_time`` after each detection.
    """
    if len(candidate.mode_sequence) != query.n_collisions:
        raise ValueError("mode_sequence length must equal n_collisions")
    if len(candidate.approach_velocities) != query.velocity_decisions:
        raise ValueError("one approach velocity per velocity decision is required")
    bound = query.velocity_bound + 1e-9
    if any(abs(c) > bound for v in candidate.approach_velocities for c in v):
        raise ValueError("approach velocity outside the velocity bound")

    start = np.array([query.start[0], query.start[1], query.altitude])
    inertial = []
    for i, (vx, vy) in enumerate(candidate.approach_velocities):
        R = _wall_for(query, i).frame.rotation
        inertial.append(tuple(R[:, 0] * vx + R[:, 1] * vy))
    if inertial:
        setpoint = tuple(start)
        v0 = inertial[0]
    else:
        setpoint = (query.goal[0], query.goal[1], query.altitude)
        v0 = (0.0, 0.0, 0.0)
    modes = candidate.mode_sequence or (query.modes_allowed[0],)
    return Scenario(kind=ScenarioKind.PLAN, initial_state=State(start, v0), walls=query.walls,
                    mode_schedule=modes, duration=query.horizon, vehicle=query.vehicle,
                    controller=query.controller, approach_velocities=tuple(inertial),
                    setpoint=setpoint, hold_time=query.hold_time, name=query.name)


def _terminal_distance(position, goal) -> float:
    return float(math.hypot(position[0] - goal[0], position[1] - goal[1]))


def _fast_score(candidate: Candidate, query: PlanQuery, cfg: StepConfig):
    try:
        out = run_engine(candidate_scenario(candidate, query), cfg, record=False)
    except SimulationError:
        return math.inf, 0
    if out[0] != 0:
        return math.inf, 0
    return _terminal_distance(out[3], query.goal), int(out[5])


def score_candidate(candidate: Candidate, query: PlanQuery, cfg: StepConfig = StepConfig()):
    """Forward-simulate one candidate; returns (planar distance to goal, trajectory).

    A failed simulation scores ``inf`` with ``None`` as trajectory.
    """
    try:
        traj = simulate(candidate_scenario(candidate, query), cfg)
    except SimulationError:
        return math.inf, None
    return _terminal_distance(traj.position[-1], query.goal), traj


def plan(query: PlanQuery, cfg: StepConfig = StepConfig(), jobs: int = 1) -> PlanResult:
    """Score every candidate and return the one ending closest to the goal.

    Ties go to the lower nominal approach speed, then to enumeration order.
    Threads may be used (``jobs`` > 1); results are merged in candidate order.
    """
    candidates = enumerate_candidates(query)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scored = list(pool.map(lambda c: _fast_score(c, query, cfg), candidates, chunksize=16))
    else:
        scored = [_fast_score(c, query, cfg) for c in candidates]
    dists = [s[0] for s in scored]
    if all(math.isinf(d) for d in dists):
        raise PlanningError("every candidate failed to simulate")
    best_i = min(range(len(candidates)), key=lambda i: (dists[i], candidates[i].nominal_speed, i))
    best = candidates[best_i]
    _, traj = score_candidate(best, query, cfg)
    return PlanResult(best=best, terminal_distance=dists[best_i], trajectory=traj,
                      all_scores=list(zip(candidates, dists)), query=query,
                      collisions_detected=[s[1] for s in scored])
