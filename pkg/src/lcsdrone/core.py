"""Domain types, collision frames, contact presets and cam kinematics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

_ORTHO_TOL = 1e-12


class Mode(enum.IntEnum):
    """Stiffness configuration of the vehicle."""

    RIGID = 1
    FLEXIBLE = 2

    @classmethod
    def parse(cls, value: "Mode | str | int") -> "Mode":
        if isinstance(value, Mode):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ValueError(f"unknown mode {value!r}") from None
        return cls(int(value))


class Surface(str, enum.Enum):
    CONCRETE = "concrete"
    ACRYLIC = "acrylic"
    WOOD = "wood"

    @classmethod
    def parse(cls, value: "Surface | str") -> "Surface":
        if isinstance(value, Surface):
            return value
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"unknown surface {value!r}") from None


def _vec3(v, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


@dataclass(frozen=True)
class State:
    """Point-mass position (m) and velocity (m/s) in the inertial frame."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "position"))
        object.__setattr__(self, "velocity", _vec3(self.velocity, "velocity"))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])

    @classmethod
    def from_array(cls, a) -> "State":
        a = np.asarray(a, dtype=float)
        return cls(a[:3], a[3:6])


@dataclass(frozen=True)
class CollisionFrame:
    """Contact plane frame.

    ``rotation`` maps collision-frame vectors to the inertial frame; its first
    column is the plane's outward normal. ``rest_offset`` is the distance from
    the centre of mass to the plane when the guard first touches it.
    """

    origin: np.ndarray
    rotation: np.ndarray
    rest_offset: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "origin", _vec3(self.origin, "origin"))
        rot = np.asarray(self.rotation, dtype=float)
        if rot.shape != (3, 3) or not np.all(np.isfinite(rot)):
            raise ValueError("rotation must be a finite 3x3 matrix")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > 1e-9 or abs(np.linalg.det(rot) - 1.0) > 1e-9:
            raise ValueError("rotation must be a proper orthonormal matrix")
        object.__setattr__(self, "rotation", rot)
        if not (self.rest_offset > 0 and math.isfinite(self.rest_offset)):
            raise ValueError("rest_offset must be positive")
        object.__setattr__(self, "rest_offset", float(self.rest_offset))

    @property
    def normal(self) -> np.ndarray:
        return self.rotation[:, 0]


@dataclass(frozen=True)
class ContactParams:
    k: float
    f: float
    mu: float
    nu: float
    mode: Mode = Mode.RIGID
    surface: str = "concrete"

    def __post_init__(self):
        for name in ("k", "f", "mu", "nu"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite")
        if self.k <= 0:
            raise ValueError("k must be positive")
        for name in ("f", "mu", "nu"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def replace(self, **changes) -> "ContactParams":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class VehicleParams:
    mass: float = 1.3
    drag: tuple = (0.0, 0.0, 0.0)
    gravity: float = 9.81

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        drag = tuple(float(b) for b in self.drag)
        if len(drag) != 3 or any(b < 0 or not math.isfinite(b) for b in drag):
            raise ValueError("drag must be three non-negative numbers")
        object.__setattr__(self, "drag", drag)
        if not (self.gravity >= 0 and math.isfinite(self.gravity)):
            raise ValueError("gravity must be non-negative")


# Drag used for powered flight in the hovering plane; b_z is not reported.
FLIGHT_DRAG = (0.2, 0.4, 0.0)


@dataclass(frozen=True)
class CamGeometry:
    """Cam disc of the arm lock. Example values only: R_cam=0.02 m, r=0.01 m."""

    R_cam: float
    r: float
    theta_0: float = 0.0

    def __post_init__(self):
        if not (self.R_cam > self.r > 0):
            raise ValueError("cam geometry requires R_cam > r > 0")


def make_collision_frame(plane_point, outward_normal, up_hint, rest_offset: float = 0.2) -> CollisionFrame:
    """Build a right-handed frame with X along ``outward_normal``.

    Z is ``up_hint`` projected onto the plane and Y = Z x X, i.e. to the right
    of an observer facing the plane with Z up.
    """
    n = _vec3(outward_normal, "outward_normal")
    up = _vec3(up_hint, "up_hint")
    n_norm = np.linalg.norm(n)
    if n_norm == 0:
        raise ValueError("outward_normal must be nonzero")
    x_axis = n / n_norm
    z_axis = up - np.dot(up, x_axis) * x_axis
    z_norm = np.linalg.norm(z_axis)
    if z_norm < 1e-9 * max(np.linalg.norm(up), 1.0):
        raise ValueError("outward_normal and up_hint are parallel (degenerate frame)")
    z_axis = z_axis / z_norm
    y_axis = np.cross(z_axis, x_axis)
    rot = np.column_stack([x_axis, y_axis, z_axis])
    return CollisionFrame(origin=plane_point, rotation=rot, rest_offset=rest_offset)


def to_collision_frame(state: State, frame: CollisionFrame) -> np.ndarray:
    """Return ``(x, y, z, vx, vy, vz)`` in the collision frame.

    The first entry is the signed gap: distance to the plane minus the rest
    offset, so it is zero at first guard contact and negative in compression.
    """
    rel = frame.rotation.T @ (state.position - frame.origin)
    rel[0] -= frame.rest_offset
    vel = frame.rotation.T @ state.velocity
    return np.concatenate([rel, vel])


def from_collision_frame(cf_state, frame: CollisionFrame) -> State:
    cf = np.asarray(cf_state, dtype=float)
    rel = cf[:3].copy()
    rel[0] += frame.rest_offset
    return State(frame.origin + frame.rotation @ rel, frame.rotation @ cf[3:6])


def cam_rod_extension(theta: float, geom: CamGeometry) -> float:
    """Rod translation ``l = R_cam - r cos(theta)`` within the 90 degree sweep."""
    lo = geom.theta_0
    hi = geom.theta_0 + math.pi / 2
    if not (lo - 1e-12 <= theta <= hi + 1e-12):
        raise ValueError(f"theta={theta} outside rotation limits [{lo}, {hi}]")
    return geom.R_cam - geom.r * math.cos(theta)


_PRESETS = {
    (Mode.RIGID, Surface.CONCRETE): (5500.0, 15.0, 0.3, 0.5),
    (Mode.FLEXIBLE, Surface.CONCRETE): (750.0, 8.5, 5.0, 0.7),
    (Mode.RIGID, Surface.ACRYLIC): (4200.0, 15.0, 0.3, 5.0),
    (Mode.FLEXIBLE, Surface.ACRYLIC): (1250.0, 8.5, 5.0, 10.0),
}
# No coefficients were identified for wood; the ground set is the closest proxy.
_SURFACE_ALIAS = {Surface.WOOD: Surface.CONCRETE}


def mode_params(mode, surface="concrete") -> ContactParams:
    """Identified contact coefficients for a mode/surface pair."""
    mode = Mode.parse(mode)
    surf = Surface.parse(surface)
    k, f, mu, nu = _PRESETS[(mode, _SURFACE_ALIAS.get(surf, surf))]
    return ContactParams(k=k, f=f, mu=mu, nu=nu, mode=mode, surface=surf.value)


@dataclass(frozen=True)
class Wall:
    """A contact plane together with its surface label."""

    frame: CollisionFrame
    surface: str = "concrete"
    params: dict = field(default_factory=dict)

    def contact_params(self, mode) -> ContactParams:
        mode = Mode.parse(mode)
        if mode in self.params:
            return self.params[mode]
        return mode_params(mode, self.surface)
