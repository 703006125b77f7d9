"""Collision detection, recovery setpoints and the position controller."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _engine
from .core import State, VehicleParams


@dataclass(frozen=True)
class ControllerConfig:
    """Recovery and low-level control settings.

    ``alpha`` lists the (x, y) recovery gains per detected collision in m/N;
    the last entry is reused for later collisions. The default P-PID gains
    give a critically damped position loop (kv = 4 kp) for the point mass.
    """

    lambda_th: float = 5.0
    alpha: tuple = ((0.12, 0.025), (0.025, 0.025))
    kp: float = 2.0
    kv: float = 8.0
    ki: float = 0.3
    kd: float = 0.0
    accel_limit: float = 10.0
    velocity_limit: float = 3.0
    noise_std: float = 0.0  # force-estimate noise (N); off by default
    seed: int = 0

    def __post_init__(self):
        if not self.lambda_th > 0:
            raise ValueError("lambda_th must be positive")
        alpha = tuple((float(ax), float(ay)) for ax, ay in self.alpha)
        if not alpha:
            raise ValueError("alpha needs at least one (alpha_x, alpha_y) pair")
        if any(ax < 0 or ay < 0 for ax, ay in alpha):
            raise ValueError("alpha gains must be non-negative")
        object.__setattr__(self, "alpha", alpha)
        if not self.accel_limit > 0:
            raise ValueError("accel_limit must be positive")
        if not self.velocity_limit > 0:
            raise ValueError("velocity_limit must be positive")
        if min(self.kp, self.kv, self.ki, self.kd) < 0:
            raise ValueError("controller gains must be non-negative")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")

    def gains_array(self) -> np.ndarray:
        return np.array([self.kp, self.kv, self.ki, self.kd, self.accel_limit, self.velocity_limit])

    def alpha_array(self) -> np.ndarray:
        return np.array(self.alpha, dtype=float)

    def alpha_for(self, collision_index: int) -> tuple:
        return self.alpha[min(collision_index, len(self.alpha) - 1)]


@dataclass(frozen=True)
class ForceEstimate:
    lambda_hat: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        lam = np.asarray(self.lambda_hat, dtype=float).reshape(3)
        if not np.all(np.isfinite(lam)):
            raise ValueError("force estimate must be finite")
        object.__setattr__(self, "lambda_hat", lam)


def estimate_external_force(measured_accel, commanded_accel, vehicle: VehicleParams, t: float = 0.0) -> ForceEstimate:
    """External force from the acceleration the vehicle did not ask for.

    ``commanded_accel`` is the acceleration expected without external contact
    (command, gravity and drag); the residual times mass is the estimate.
    """
    meas = np.asarray(measured_accel, dtype=float)
    cmd = np.asarray(commanded_accel, dtype=float)
    if not (np.all(np.isfinite(meas)) and np.all(np.isfinite(cmd))):
        raise ValueError("accelerations must be finite")
    return ForceEstimate(vehicle.mass * (meas - cmd), t)


def detect_collision(estimate: ForceEstimate, config: ControllerConfig) -> bool:
    lam = estimate.lambda_hat
    return bool(abs(lam[0]) >= config.lambda_th or abs(lam[1]) >= config.lambda_th)


@dataclass
class CollisionDetector:
    """Threshold detector that re-arms once the planar estimate drops below
    half the threshold, so one contact yields one detection."""

    config: ControllerConfig
    armed: bool = True
    detections: list = field(default_factory=list)

    def update(self, estimate: ForceEstimate) -> bool:
        mag = max(abs(estimate.lambda_hat[0]), abs(estimate.lambda_hat[1]))
        if self.armed and mag >= self.config.lambda_th:
            self.armed = False
            self.detections.append(estimate.t)
            return True
        if not self.armed and mag < 0.5 * self.config.lambda_th:
            self.armed = True
        return False


def recovery_setpoint(position_at_tc, estimate: ForceEstimate, config: ControllerConfig,
                      z_ref: float, collision_index: int = 0) -> np.ndarray:
    """Post-collision setpoint: x + a_x * Fx, y - a_y * Fy, constant z."""
    p = np.asarray(position_at_tc, dtype=float)
    ax, ay = config.alpha_for(collision_index)
    lam = estimate.lambda_hat
    return np.array([p[0] + ax * lam[0], p[1] - ay * lam[1], float(z_ref)])


@dataclass(frozen=True)
class ControllerMemory:
    integral: np.ndarray = field(default_factory=lambda: np.zeros(3))
    last_error: np.ndarray = field(default_factory=lambda: np.zeros(3))
    primed: bool = False


def position_controller(state: State, setpoint, config: ControllerConfig, h: float,
                        memory: ControllerMemory | None = None, ref_velocity=None,
                        gravity: float = 9.81):
    """P position loop over a PID velocity loop.

    Returns ``(command, memory)``. The feedback part is clamped per axis to
    ``accel_limit``; gravity compensation (+g on z) is added on top.
    """
    memory = memory or ControllerMemory()
    integ = memory.integral.copy()
    last = memory.last_error.copy()
    ref_v = np.zeros(3) if ref_velocity is None else np.asarray(ref_velocity, dtype=float)
    out = np.zeros(3)
    _engine.pid_accel(state.position, state.velocity, np.asarray(setpoint, dtype=float), ref_v,
                      config.gains_array(), integ, last, memory.primed, float(h), out)
    out[2] += gravity
    return out, ControllerMemory(integ, last, True)
