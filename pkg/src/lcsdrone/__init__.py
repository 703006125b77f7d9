"""Collision modelling, simulation and planning for a dual-stiffness quadrotor.

The vehicle is a point mass; wall and ground impacts go through a unilateral
spring-damper whose normal force is a scalar complementarity problem solved
at every implicit-Euler step.
"""

from .contact import (
    ContactForce,
    LcpError,
    LcpProblem,
    PivotLimitExceeded,
    RayTermination,
    StepConfig,
    assemble_contact_lcp,
    friction_forces,
    solve_lcp_enumerate,
    solve_lcp_lemke,
    solve_lcp_scalar,
    step_contact,
)
from .controller import (
    CollisionDetector,
    ControllerConfig,
    ForceEstimate,
    detect_collision,
    estimate_external_force,
    position_controller,
    recovery_setpoint,
)
from .core import (
    FLIGHT_DRAG,
    CamGeometry,
    CollisionFrame,
    ContactParams,
    Mode,
    State,
    Surface,
    VehicleParams,
    Wall,
    cam_rod_extension,
    from_collision_frame,
    make_collision_frame,
    mode_params,
    to_collision_frame,
)
from .dynamics import (
    Event,
    EventKind,
    Scenario,
    ScenarioKind,
    SimulationError,
    Trajectory,
    drop_test_scenario,
    flight_collision_scenario,
    simulate,
    step_free,
    wall,
)
from .identification import (
    ContactMetrics,
    FitResult,
    IdentificationError,
    ObservedTrajectory,
    ParamBounds,
    ValidationReport,
    contact_metrics,
    fit_contact_params,
    observed_from_trajectory,
    validate_params,
)
from .planner import Candidate, PlanningError, PlanQuery, PlanResult, enumerate_candidates, plan, score_candidate

__version__ = "0.1.0"
