"""Normal-force complementarity problem, friction laws and the contact step.

The guard is a unilateral spring-damper along the plane normal. Each step the
normal force solves a one-dimensional LCP built from the implicit-Euler
update; lateral forces follow from the normal force.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _engine
from .core import CollisionFrame, ContactParams, State, VehicleParams, to_collision_frame


class LcpError(RuntimeError):
    """Raised when a complementarity problem cannot be solved."""


class RayTermination(LcpError):
    """Lemke's method left along an unbounded ray without a solution."""


class PivotLimitExceeded(LcpError):
    pass


@dataclass(frozen=True)
class ContactForce:
    """Contact force in the collision frame (N)."""

    lambda_x: float = 0.0
    lambda_y: float = 0.0
    lambda_z: float = 0.0
    active: bool = False
    slack: float = 0.0  # complementarity slack w after the step

    def as_array(self) -> np.ndarray:
        return np.array([self.lambda_x, self.lambda_y, self.lambda_z])


INACTIVE = ContactForce()


@dataclass(frozen=True)
class LcpProblem:
    """Find z >= 0 with w = M z + q >= 0 and z.w = 0."""

    M: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
            raise ValueError(f"M must be square, got shape {M.shape}")
        if q.shape != (M.shape[0],):
            raise ValueError(f"q must have length {M.shape[0]}, got {q.shape}")
        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(q))):
            raise ValueError("LCP data must be finite")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def slack(self, z) -> np.ndarray:
        return self.M @ np.asarray(z, dtype=float) + self.q


@dataclass(frozen=True)
class StepConfig:
    h: float = 1e-4
    contact_tol: float = 1e-10

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError("h must be positive")
        if not self.contact_tol > 0:
            raise ValueError("contact_tol must be positive")


def collision_drag(vehicle: VehicleParams, frame: CollisionFrame) -> np.ndarray:
    """Drag coefficients along the collision axes.

    Exact when the plane is aligned with the inertial axes; otherwise the
    diagonal of the rotated drag matrix.
    """
    R = frame.rotation
    return (R * R).T @ np.asarray(vehicle.drag)


def assemble_contact_lcp(cf_state, params: ContactParams, vehicle: VehicleParams,
                         free_accel_x: float, h: float, drag_x: float = 0.0) -> LcpProblem:
    """Scalar LCP for the normal force at the end of an implicit-Euler step.

    ``M = 1 + (k h + f) c`` and ``q = k x_free + f v_free`` where ``c`` maps a
    normal force to the end-of-step normal velocity and ``(x_free, v_free)``
    is the step taken without contact.
    """
    cf = np.asarray(cf_state, dtype=float)
    vals = (cf[0], cf[3], free_accel_x, h, drag_x)
    if not all(math.isfinite(float(x)) for x in vals):
        raise ValueError("non-finite contact state")
    if h <= 0:
        raise ValueError("h must be positive")
    M, q, _, _, _ = _engine.lcp_terms(float(cf[0]), float(cf[3]), float(free_accel_x),
                                      params.k, params.f, vehicle.mass, float(drag_x), float(h))
    return LcpProblem(M=[[M]], q=[q])


def solve_lcp_scalar(problem: LcpProblem) -> float:
    if problem.n != 1:
        raise ValueError("solve_lcp_scalar needs a 1x1 problem")
    m = problem.M[0, 0]
    if m <= 0:
        raise LcpError(f"scalar LCP requires M > 0, got {m}")
    return max(-problem.q[0] / m, 0.0)


def solve_lcp_lemke(problem: LcpProblem, max_pivots: int = 1000, tol: float = 1e-12) -> np.ndarray:
    """Lemke's complementary pivoting with a unit covering vector."""
    M, q = problem.M, problem.q
    n = problem.n
    if np.all(q >= 0):
        return np.zeros(n)

    z0 = 2 * n
    # columns: w (0..n-1), z (n..2n-1), z0 (2n), rhs (2n+1)
    T = np.hstack([np.eye(n), -M, -np.ones((n, 1)), q[:, None]])
    basis = list(range(n))

    def pivot(row: int, col: int) -> None:
        T[row] /= T[row, col]
        for i in range(n):
            if i != row and T[i, col] != 0.0:
                T[i] -= T[i, col] * T[row]

    row = int(np.argmin(q))
    pivot(row, z0)
    leaving = basis[row]
    basis[row] = z0

    for _ in range(max_pivots):
        entering = leaving + n if leaving < n else leaving - n
        col = T[:, entering]
        candidates = np.nonzero(col > tol)[0]
        if candidates.size == 0:
            raise RayTermination("Lemke's method terminated on a secondary ray")
        ratios = T[candidates, -1] / col[candidates]
        best = ratios.min()
        ties = candidates[ratios <= best + tol * max(1.0, abs(best))]
        # let the artificial variable leave whenever it is tied
        z0_rows = [r for r in ties if basis[r] == z0]
        row = int(z0_rows[0]) if z0_rows else int(min(ties, key=lambda r: basis[r]))
        pivot(row, entering)
        leaving = basis[row]
        basis[row] = entering
        if leaving == z0:
            z = np.zeros(n)
            for r, var in enumerate(basis):
                if n <= var < 2 * n:
                    z[var - n] = T[r, -1]
            return np.maximum(z, 0.0)
    raise PivotLimitExceeded(f"no solution after {max_pivots} pivots")


def solve_lcp_enumerate(problem: LcpProblem, tol: float = 1e-9) -> np.ndarray:
    """Brute-force LCP solution by trying all 2^n active sets."""
    M, q = problem.M, problem.q
    n = problem.n
    for mask in range(1 << n):
        S = [i for i in range(n) if mask >> i & 1]
        z = np.zeros(n)
        if S:
            try:
                z[S] = np.linalg.solve(M[np.ix_(S, S)], -q[S])
            except np.linalg.LinAlgError:
                continue
        if np.all(z >= -tol) and np.all(M @ z + q >= -tol):
            return np.maximum(z, 0.0)
    raise LcpError("no complementary active set found")


def friction_forces(lambda_x: float, ydot_cf: float, params: ContactParams) -> tuple[float, float]:
    """Lateral and vertical friction generated by the normal force."""
    if lambda_x < 0:
        raise ValueError("normal force must be non-negative")
    lam_y = -params.mu * lambda_x * ydot_cf
    lam_z = -params.nu * lambda_x / (1.0 + lambda_x)
    return lam_y, lam_z


def _frame_arrays(frames_params):
    origin = np.array([fr.origin for fr, _ in frames_params])
    rot = np.array([fr.rotation for fr, _ in frames_params])
    off = np.array([fr.rest_offset for fr, _ in frames_params])
    par = np.zeros((len(frames_params), 2, 4))
    for j, (_, p) in enumerate(frames_params):
        par[j, :] = (p.k, p.f, p.mu, p.nu)
    return origin, rot, off, par


def step_contact(state: State, frame: CollisionFrame, params: ContactParams,
                 vehicle: VehicleParams, input_accel, cfg: StepConfig = StepConfig()):
    """One implicit-Euler step against a single plane.

    ``input_accel`` is the total non-contact acceleration (gravity included).
    Above the plane (positive gap) this is a plain free-flight step.
    """
    a = np.asarray(input_accel, dtype=float)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise ValueError("input_accel must be 3 finite numbers")
    origin, rot, off, par = _frame_arrays([(frame, params)])
    out = _engine.run(state.position, state.velocity, cfg.h, 1, a, vehicle.mass,
                      np.asarray(vehicle.drag, dtype=float), origin, rot, off, par,
                      np.array([1], dtype=np.int64), False, 1.0, np.zeros((1, 2)),
                      np.zeros(6), np.zeros(3), np.zeros((0, 3)), 0.0, 0.0, 0, True, 8)
    status = out[0]
    if status == _engine.STATUS_NONFINITE:
        raise FloatingPointError("contact step produced a non-finite state")
    lam = out[9][1]
    active = bool(out[10][1])
    in_contact = out[11][1] >= 0
    new_state = State(out[3], out[4])
    if not in_contact:
        return new_state, INACTIVE
    return new_state, ContactForce(float(lam[0]), float(lam[1]), float(lam[2]), active, float(out[15][1]))


def gap(state: State, frame: CollisionFrame) -> float:
    return float(to_collision_frame(state, frame)[0])
