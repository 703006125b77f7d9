"""Contact-parameter fitting, drop metrics and held-out validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .contact import StepConfig
from .core import ContactParams, Mode, VehicleParams
from .dynamics import Scenario, SimulationError, Trajectory, simulate

VELOCITY_WEIGHT = 0.1  # seconds; puts velocity error on a length scale
_LATERAL = ("y", "ydot", "z", "zdot")
RESTARTS = 3


class IdentificationError(ValueError):
    pass


@dataclass(frozen=True)
class ObservedTrajectory:
    """Collision-frame samples of a measured (or synthetic) trajectory.

    ``x`` is the signed gap to the contact plane. Lateral channels and the
    normal-force channel are optional.
    """

    t: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    y: np.ndarray | None = None
    ydot: np.ndarray | None = None
    z: np.ndarray | None = None
    zdot: np.ndarray | None = None
    force: np.ndarray | None = None
    source: str = ""

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or t.size < 10:
            raise IdentificationError("an observation needs at least 10 samples")
        if not np.all(np.diff(t) > 0):
            raise IdentificationError("observation timestamps must be strictly increasing")
        object.__setattr__(self, "t", t)
        for name in ("x", "xdot", *_LATERAL, "force"):
            val = getattr(self, name)
            if val is None:
                continue
            arr = np.asarray(val, dtype=float)
            if arr.shape != t.shape:
                raise IdentificationError(f"channel {name} has {arr.shape} samples, expected {t.shape}")
            if not np.all(np.isfinite(arr)):
                raise IdentificationError(f"channel {name} contains non-finite values")
            object.__setattr__(self, name, arr)

    @property
    def has_lateral(self) -> bool:
        return self.y is not None and self.ydot is not None

    def channels(self) -> dict:
        return {n: getattr(self, n) for n in ("x", "xdot", *_LATERAL, "force") if getattr(self, n) is not None}


@dataclass(frozen=True)
class ContactMetrics:
    contact_time: float
    rebound_velocity: float
    peak_normal_force: float
    peak_acceleration: float


@dataclass(frozen=True)
class ParamBounds:
    """Search box; ``mu``/``nu`` are only used when lateral data exist."""

    k: tuple = (100.0, 10000.0)
    f: tuple = (0.0, 30.0)
    mu: tuple = (0.0, 10.0)
    nu: tuple = (0.0, 15.0)

    def __post_init__(self):
        for name in ("k", "f", "mu", "nu"):
            lo, hi = (float(v) for v in getattr(self, name))
            if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
                raise IdentificationError(f"bounds for {name} are degenerate: [{lo}, {hi}]")
            if lo < 0 or (name == "k" and lo <= 0):
                raise IdentificationError(f"lower bound for {name} is not admissible: {lo}")
            object.__setattr__(self, name, (lo, hi))

    def box(self, names) -> np.ndarray:
        return np.array([getattr(self, n) for n in names])

    def contains(self, params: ContactParams, names=("k", "f", "mu", "nu")) -> bool:
        tol = 1e-9
        return all(getattr(self, n)[0] - tol <= getattr(params, n) <= getattr(self, n)[1] + tol for n in names)


@dataclass
class FitResult:
    params: ContactParams
    rmse_position: float
    rmse_velocity: float
    objective: float
    iterations: int
    converged: bool
    fitted: tuple = ("k", "f")
    history: list = field(default_factory=list)
    bounds: ParamBounds | None = None

    @property
    def rmse(self) -> tuple:
        return self.rmse_position, self.rmse_velocity


@dataclass(frozen=True)
class ChannelReport:
    name: str
    rmse: float | None
    peak_observed: float | None
    peak_simulated: float | None
    peak_accuracy: float | None
    flagged: bool = False  # z channels: rotational effects are not modelled


@dataclass
class ValidationReport:
    params: ContactParams
    channels: dict
    observed_metrics: ContactMetrics
    simulated_metrics: ContactMetrics
    source: str = ""

    def accuracy(self, name: str) -> float | None:
        return self.channels[name].peak_accuracy


def observed_from_trajectory(traj: Trajectory, frame_index: int = 0, stride: int = 1,
                             lateral: bool = False, force: bool = False, velocity_noise: float = 0.0,
                             seed: int = 0, source: str = "simulated") -> ObservedTrajectory:
    """Sample a simulated run as a camera-style collision-frame observation.

    ``velocity_noise`` adds Gaussian noise to the velocity channels with a
    standard deviation equal to that fraction of the peak normal speed.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    cf = traj.in_frame(frame_index)[::stride]
    t = traj.t[::stride]
    chans = {"x": cf[:, 0], "xdot": cf[:, 3].copy()}
    if lateral:
        chans.update(y=cf[:, 1], ydot=cf[:, 4].copy(), z=cf[:, 2], zdot=cf[:, 5].copy())
    if force:
        lam = np.where(traj.contact_frame == frame_index, traj.contact_force[:, 0], 0.0)
        chans["force"] = lam[::stride]
    if velocity_noise > 0:
        rng = np.random.default_rng(seed)
        sigma = velocity_noise * float(np.max(np.abs(chans["xdot"])))
        for name in ("xdot", "ydot", "zdot"):
            if name in chans:
                chans[name] = chans[name] + rng.normal(0.0, sigma, size=t.shape)
    return ObservedTrajectory(t=t, source=source, **chans)


def _runs(mask: np.ndarray):
    """(start, stop) index pairs of consecutive True runs."""
    m = np.concatenate([[False], mask, [False]]).astype(np.int8)
    d = np.diff(m)
    return list(zip(np.nonzero(d == 1)[0], np.nonzero(d == -1)[0]))


def _crossing(t0, t1, x0, x1) -> float:
    if x1 == x0:
        return t1
    return t0 + (t1 - t0) * (0.0 - x0) / (x1 - x0)


def contact_metrics(trajectory, vehicle: VehicleParams = VehicleParams()) -> ContactMetrics:
    """Metrics of the first contact episode.

    Simulated runs use the solver's active flag; observations use the force
    channel when present and otherwise the interpolated zero crossings of
    the gap.
    """
    if isinstance(trajectory, Trajectory):
        return _simulated_metrics(trajectory, vehicle)
    if isinstance(trajectory, ObservedTrajectory):
        return _observed_metrics(trajectory, vehicle)
    raise TypeError("expected a Trajectory or ObservedTrajectory")


def _simulated_metrics(traj: Trajectory, vehicle: VehicleParams) -> ContactMetrics:
    runs = _runs(np.asarray(traj.contact_active, dtype=bool))
    if not runs:
        raise IdentificationError("trajectory contains no contact")
    i0, i1 = runs[0]
    frame = int(traj.contact_frame[i0])
    stop = runs[1][0] if len(runs) > 1 else len(traj)
    # samples carry the post-step state, so the episode spans t[i0 - 1] .. t[i1 - 1]
    contact_time = float(traj.t[i1 - 1] - traj.t[i0 - 1])
    cf_vel = traj.velocity[i1 - 1:stop] @ traj.frames[frame].rotation[:, 0]
    peak = float(np.max(traj.contact_force[i0:i1, 0]))
    return ContactMetrics(contact_time, float(np.max(cf_vel)), peak, peak / vehicle.mass)


def _observed_metrics(obs: ObservedTrajectory, vehicle: VehicleParams) -> ContactMetrics:
    t, x = obs.t, obs.x
    if obs.force is not None:
        runs = _runs(obs.force > 0)
        if not runs:
            raise IdentificationError("observation contains no contact")
        i0, i1 = runs[0]
        # the force sample at i is applied over (t[i-1], t[i]]
        start = t[i0 - 1] if i0 > 0 else t[i0]
        contact_time = float(t[i1 - 1] - start)
        after = i1 - 1
        stop = runs[1][0] if len(runs) > 1 else len(t)
        peak = float(np.max(obs.force[i0:i1]))
    else:
        runs = _runs(x <= 0)
        if not runs:
            raise IdentificationError("observation contains no contact")
        i0, i1 = runs[0]
        t_in = _crossing(t[i0 - 1], t[i0], x[i0 - 1], x[i0]) if i0 > 0 else t[0]
        t_out = _crossing(t[i1 - 1], t[i1], x[i1 - 1], x[i1]) if i1 < len(t) else t[-1]
        contact_time = float(t_out - t_in)
        after = i1 - 1
        stop = runs[1][0] if len(runs) > 1 else len(t)
        peak = math.nan
    rebound = float(np.max(obs.xdot[after:stop]))
    return ContactMetrics(contact_time, rebound, peak, peak / vehicle.mass)


def _check_overlap(obs: ObservedTrajectory, scenario: Scenario):
    if obs.t[0] > scenario.duration or obs.t[-1] < 0:
        raise IdentificationError(
            f"observation spans [{obs.t[0]:.4g}, {obs.t[-1]:.4g}] s but the scenario covers [0, {scenario.duration:.4g}] s")


def _contact_mode(scenario: Scenario) -> Mode:
    return scenario.mode_schedule[0]


def resample(traj: Trajectory, times, frame_index: int = 0, lateral: bool = False,
             force: bool = False) -> dict:
    """Collision-frame channels of a simulation interpolated at ``times``."""
    cf = traj.in_frame(frame_index)
    cols = {"x": 0, "xdot": 3}
    if lateral:
        cols.update(y=1, z=2, ydot=4, zdot=5)
    out = {name: np.interp(times, traj.t, cf[:, c]) for name, c in cols.items()}
    if force:
        lam = np.where(traj.contact_frame == frame_index, traj.contact_force[:, 0], 0.0)
        # forces are step-wise constant; take the sample covering each time
        idx = np.clip(np.searchsorted(traj.t, times, side="left"), 0, len(traj) - 1)
        out["force"] = lam[idx]
    return out


def _rmse(a, b) -> float:
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


def _errors(obs: ObservedTrajectory, sim: dict) -> tuple:
    pos = [obs.x - sim["x"]]
    vel = [obs.xdot - sim["xdot"]]
    for p, v in (("y", "ydot"), ("z", "zdot")):
        if p in sim and getattr(obs, p) is not None:
            pos.append(getattr(obs, p) - sim[p])
            vel.append(getattr(obs, v) - sim[v])
    pos_rmse = float(np.sqrt(np.mean(np.concatenate(pos) ** 2)))
    vel_rmse = float(np.sqrt(np.mean(np.concatenate(vel) ** 2)))
    return pos_rmse, vel_rmse


def fit_contact_params(observed: ObservedTrajectory, scenario: Scenario, bounds: ParamBounds = ParamBounds(),
                       cfg: StepConfig = StepConfig(), wall_index: int = 0, grid_points: int = 5,
                       max_iter: int = 400) -> FitResult:
    """Least-error contact coefficients for one wall of ``scenario``.

    Runs a coarse grid over the box, then a bounded Nelder-Mead refinement
    from the best grid point in box-normalised coordinates. Friction
    coefficients are fitted only when the observation has lateral channels.
    """
    _check_overlap(observed, scenario)
    mode = _contact_mode(scenario)
    base = scenario.walls[wall_index].contact_params(mode)
    lateral = observed.has_lateral
    names = ("k", "f", "mu", "nu") if lateral else ("k", "f")
    box = bounds.box(names)
    span = box[:, 1] - box[:, 0]
    times = observed.t

    def params_at(u) -> ContactParams:
        vals = box[:, 0] + np.clip(u, 0.0, 1.0) * span
        return base.replace(**dict(zip(names, (float(v) for v in vals))))

    def evaluate(u):
        p = params_at(u)
        try:
            traj = simulate(scenario.with_params(wall_index, p), cfg)
        except SimulationError:
            return math.inf, math.inf, math.inf
        pos, vel = _errors(observed, resample(traj, times, wall_index, lateral=lateral))
        return pos + VELOCITY_WEIGHT * vel, pos, vel

    def objective(u):
        return evaluate(u)[0]

    axes = [np.linspace(0.0, 1.0, grid_points)] * len(names)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(names))
    grid_vals = np.array([objective(u) for u in mesh])
    u0 = mesh[int(np.argmin(grid_vals))]

    history = [float(grid_vals.min())]

    def record(xk):
        history.append(min(history[-1], objective(xk)))

    def simplex_around(u, step):
        pts = [u]
        for i in range(len(names)):
            v = u.copy()
            v[i] = v[i] + step if v[i] + step <= 1.0 else v[i] - step
            pts.append(v)
        return np.array(pts)

    # first simplex spans one grid cell; restarts with a smaller one undo the
    # collapse that clipping causes when the optimum sits near a box face
    step = 1.0 / (grid_points - 1) if grid_points > 1 else 0.25
    u, best, nit, success = u0, history[0], 0, False
    for _ in range(RESTARTS + 1):
        res = minimize(objective, u, method="Nelder-Mead", callback=record,
                       bounds=[(0.0, 1.0)] * len(names),
                       options={"initial_simplex": simplex_around(u, step), "xatol": 1e-7,
                                "fatol": 1e-12, "maxiter": max_iter})
        nit += int(res.nit)
        improved = res.fun < best * (1.0 - 1e-6)
        if res.fun <= best:
            u, best, success = np.clip(res.x, 0.0, 1.0), float(res.fun), bool(res.success)
        if not improved or best == 0.0:
            break
        step = max(step / 4.0, 1e-3)
    obj, pos, vel = evaluate(u)
    tail = history[-10:]
    stalled = tail[0] > 0 and (tail[0] - tail[-1]) / tail[0] < 1e-4 if len(tail) > 1 else False
    return FitResult(params=params_at(u), rmse_position=pos, rmse_velocity=vel, objective=obj,
                     iterations=nit, converged=bool(success or stalled or obj == 0.0),
                     fitted=names, history=history, bounds=bounds)


def _accuracy(sim: float, obs: float) -> float | None:
    if obs is None or sim is None or not math.isfinite(obs) or not math.isfinite(sim) or obs == 0:
        return None
    return 1.0 - abs(sim - obs) / abs(obs)


def validate_params(params: ContactParams, heldout: ObservedTrajectory, scenario: Scenario,
                    cfg: StepConfig = StepConfig(), wall_index: int = 0) -> ValidationReport:
    """Compare a simulation with ``params`` against a held-out observation.

    The simulation is resampled onto the observation's timestamps, so both
    sides go through the same metric extraction. The z channel is reported
    but flagged as unreliable because rotational effects are not modelled.
    """
    _check_overlap(heldout, scenario)
    traj = simulate(scenario.with_params(wall_index, params), cfg)
    sim = resample(traj, heldout.t, wall_index, lateral=heldout.has_lateral, force=heldout.force is not None)
    sim_obs = ObservedTrajectory(t=heldout.t, source="simulated", **sim)
    vehicle = scenario.vehicle
    m_obs = contact_metrics(heldout, vehicle)
    m_sim = contact_metrics(sim_obs, vehicle)

    channels = {}
    for name, series in heldout.channels().items():
        s = sim[name]
        if name == "force":
            peak_o, peak_s = float(np.max(series)), float(np.max(s))
        else:
            peak_o, peak_s = float(np.max(np.abs(series))), float(np.max(np.abs(s)))
        channels[name] = ChannelReport(name, _rmse(series, s), peak_o, peak_s,
                                       _accuracy(peak_s, peak_o), name in ("z", "zdot"))
    for name in ("contact_time", "rebound_velocity", "peak_normal_force", "peak_acceleration"):
        o, s = getattr(m_obs, name), getattr(m_sim, name)
        channels[name] = ChannelReport(name, None, o, s, _accuracy(s, o))
    return ValidationReport(params=params, channels=channels, observed_metrics=m_obs,
                            simulated_metrics=m_sim, source=heldout.source)
