"""Scenario files, CSV/JSON output and the ``lcsdrone`` command line."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .contact import StepConfig
from .controller import ControllerConfig
from .core import FLIGHT_DRAG, ContactParams, Mode, Surface, VehicleParams
from .dynamics import (
    Scenario,
    Trajectory,
    drop_test_scenario,
    flight_collision_scenario,
    simulate,
    wall,
)
from .identification import (
    FitResult,
    ObservedTrajectory,
    ParamBounds,
    ValidationReport,
    contact_metrics,
    fit_contact_params,
    validate_params,
)
from .planner import PlanQuery, PlanResult, plan

SCENARIO_SCHEMA = "lcsdrone.scenario/1"
PARAMS_SCHEMA = "lcsdrone.params/1"
BOUNDS_SCHEMA = "lcsdrone.bounds/1"
REPORT_SCHEMA = "lcsdrone.report/1"

TRAJECTORY_HEADER = "t,x,y,z,vx,vy,vz,lam_x,lam_y,lam_z,contact,mode,setx,sety,setz"
OBSERVED_HEADER = ("t", "x", "xdot")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


# --------------------------------------------------------------------- schema

_COMMON = {"schema", "kind", "name", "description"}
_KEYS = {
    "drop": _COMMON | {"height", "mode", "surface", "duration", "params"},
    "flight": _COMMON | {"start", "approach_velocity", "modes", "duration", "walls", "controller",
                         "vehicle", "hold_time"},
    "plan": _COMMON | {"start", "goal", "walls", "grid_resolution", "velocity_bound", "modes_allowed",
                       "n_collisions", "velocity_decisions", "altitude", "horizon", "hold_time",
                       "controller", "vehicle"},
}
_WALL_KEYS = {"point", "normal", "surface", "rest_offset", "params"}
_PARAM_KEYS = {"k", "f", "mu", "nu"}
_CONTROLLER_KEYS = {"lambda_th", "alpha", "kp", "kv", "ki", "kd", "accel_limit", "velocity_limit",
                    "noise_std", "seed"}
_VEHICLE_KEYS = {"mass", "drag", "gravity"}


def _reject_unknown(obj: dict, allowed: set, where: str):
    if not isinstance(obj, dict):
        raise ConfigError("expected an object", where or None)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        prefix = f"{where}." if where else ""
        raise ConfigError(f"unknown key (allowed: {', '.join(sorted(allowed))})", prefix + unknown[0])


def _number(obj: dict, key: str, where: str, default=None, positive=False, nonneg=False):
    path = f"{where}.{key}" if where else key
    if key not in obj:
        if default is None:
            raise ConfigError("required field missing", path)
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"expected a finite number, got {val!r}", path)
    if positive and val <= 0:
        raise ConfigError(f"must be positive, got {val}", path)
    if nonneg and val < 0:
        raise ConfigError(f"must be non-negative, got {val}", path)
    return float(val)


def _vector(obj: dict, key: str, where: str, n: int, default=None):
    path = f"{where}.{key}" if where else key
    if key not in obj:
        if default is None:
            raise ConfigError("required field missing", path)
        return tuple(default)
    val = obj[key]
    if (not isinstance(val, list) or len(val) != n
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in val)):
        raise ConfigError(f"expected a list of {n} finite numbers, got {val!r}", path)
    return tuple(float(v) for v in val)


def _guard(path: str, fn, *args, **kwargs):
    """Re-raise constructor validation errors against a field path."""
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), path) from None


def _mode(value, path: str) -> Mode:
    return _guard(path, Mode.parse, value)


def _surface(value, path: str) -> str:
    return _guard(path, Surface.parse, value).value


def _contact_params(obj: dict, path: str, mode: Mode, surface: str) -> ContactParams:
    _reject_unknown(obj, _PARAM_KEYS, path)
    vals = {}
    for key in ("k", "f", "mu", "nu"):
        vals[key] = _number(obj, key, path)
        if key == "k" and vals[key] <= 0:
            raise ConfigError(f"must be positive, got {vals[key]}", f"{path}.k")
        if key != "k" and vals[key] < 0:
            raise ConfigError(f"must be non-negative, got {vals[key]}", f"{path}.{key}")
    return ContactParams(mode=mode, surface=surface, **vals)


def _wall(obj: dict, path: str):
    _reject_unknown(obj, _WALL_KEYS, path)
    surface = _surface(obj.get("surface", "concrete"), f"{path}.surface")
    overrides = {}
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("expected an object keyed by mode", f"{path}.params")
    for mode_name, p in params.items():
        mode = _mode(mode_name, f"{path}.params.{mode_name}")
        overrides[mode] = _contact_params(p, f"{path}.params.{mode_name}", mode, surface)
    return _guard(path, wall, _vector(obj, "point", path, 3), _vector(obj, "normal", path, 3), surface,
                  _number(obj, "rest_offset", path, 0.2, positive=True), overrides)


def _walls(doc: dict, required: bool):
    items = doc.get("walls", [])
    if not isinstance(items, list) or (required and not items):
        raise ConfigError("expected a non-empty list of walls", "walls")
    return tuple(_wall(w, f"walls[{i}]") for i, w in enumerate(items))


def _controller(doc: dict) -> ControllerConfig:
    obj = doc.get("controller", {})
    _reject_unknown(obj, _CONTROLLER_KEYS, "controller")
    kwargs = {}
    for key in _CONTROLLER_KEYS - {"alpha", "seed"}:
        if key in obj:
            kwargs[key] = _number(obj, key, "controller")
    if "seed" in obj:
        if not isinstance(obj["seed"], int) or isinstance(obj["seed"], bool):
            raise ConfigError("expected an integer", "controller.seed")
        kwargs["seed"] = obj["seed"]
    if "alpha" in obj:
        alpha = obj["alpha"]
        if not isinstance(alpha, list) or not alpha:
            raise ConfigError("expected a list of [alpha_x, alpha_y] pairs", "controller.alpha")
        kwargs["alpha"] = tuple(_vector({"a": a}, "a", f"controller.alpha[{i}]", 2) for i, a in enumerate(alpha))
    return _guard("controller", ControllerConfig, **kwargs)


def _vehicle(doc: dict, default_drag) -> VehicleParams:
    obj = doc.get("vehicle", {})
    _reject_unknown(obj, _VEHICLE_KEYS, "vehicle")
    return _guard("vehicle", VehicleParams, mass=_number(obj, "mass", "vehicle", 1.3, positive=True),
                  drag=_vector(obj, "drag", "vehicle", 3, default_drag),
                  gravity=_number(obj, "gravity", "vehicle", 9.81, nonneg=True))


def _modes(doc: dict, key: str):
    items = doc.get(key)
    if not isinstance(items, list) or not items:
        raise ConfigError("expected a non-empty list of modes", key)
    return tuple(_mode(m, f"{key}[{i}]") for i, m in enumerate(items))


def _count(doc: dict, key: str, default):
    if key not in doc:
        return default
    val = doc[key]
    if not isinstance(val, int) or isinstance(val, bool) or val < 0:
        raise ConfigError(f"expected a non-negative integer, got {val!r}", key)
    return val


def _read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def _check_schema(doc: dict, expected: str):
    if doc.get("schema") != expected:
        raise ConfigError(f"expected {expected!r}, got {doc.get('schema')!r}", "schema")


def parse_scenario(doc: dict, name: str = ""):
    """Build a Scenario (drop/flight) or PlanQuery (plan) from a parsed document."""
    _check_schema(doc, SCENARIO_SCHEMA)
    kind = doc.get("kind")
    if kind not in _KEYS:
        raise ConfigError(f"expected one of {sorted(_KEYS)}, got {kind!r}", "kind")
    _reject_unknown(doc, _KEYS[kind], "")
    name = doc.get("name", name)
    if kind == "drop":
        mode = _mode(doc.get("mode", "rigid"), "mode")
        surface = _surface(doc.get("surface", "concrete"), "surface")
        params = _contact_params(doc["params"], "params", mode, surface) if "params" in doc else None
        sc = drop_test_scenario(_number(doc, "height", "", nonneg=True), mode, surface,
                                _number(doc, "duration", "", 1.0, nonneg=True), params)
        return replace(sc, name=name or sc.name)
    if kind == "flight":
        walls = _walls(doc, required=True)
        return _guard("", flight_collision_scenario, walls, _vector(doc, "start", "", 3),
                      _vector(doc, "approach_velocity", "", 2), _modes(doc, "modes"),
                      duration=_number(doc, "duration", "", 3.0, nonneg=True),
                      controller=_controller(doc), vehicle=_vehicle(doc, FLIGHT_DRAG), name=name)
    walls = _walls(doc, required=False)
    return _guard("", PlanQuery, start=_vector(doc, "start", "", 2), goal=_vector(doc, "goal", "", 2),
                  walls=walls, grid_resolution=_number(doc, "grid_resolution", "", 0.1, positive=True),
                  velocity_bound=_number(doc, "velocity_bound", "", 1.5, positive=True),
                  modes_allowed=_modes(doc, "modes_allowed") if "modes_allowed" in doc else tuple(Mode),
                  n_collisions=_count(doc, "n_collisions", 1),
                  velocity_decisions=_count(doc, "velocity_decisions", None),
                  altitude=_number(doc, "altitude", "", 1.0),
                  horizon=_number(doc, "horizon", "", 8.0, positive=True),
                  hold_time=_number(doc, "hold_time", "", 1.0, nonneg=True),
                  controller=_controller(doc), vehicle=_vehicle(doc, FLIGHT_DRAG), name=name)


def load_scenario(path):
    """Read and validate a scenario or plan-query JSON file."""
    path = Path(path)
    return parse_scenario(_read_json(path), name=path.stem)


def load_params(path, mode=None, surface: str = "concrete") -> ContactParams:
    """Contact parameters from a params file or from an identify report."""
    doc = _read_json(path)
    if doc.get("schema") == REPORT_SCHEMA and doc.get("kind") == "identify":
        doc = {"schema": PARAMS_SCHEMA, **doc["params"]}
    _check_schema(doc, PARAMS_SCHEMA)
    _reject_unknown(doc, _PARAM_KEYS | {"schema", "mode", "surface"}, "")
    m = _mode(doc.get("mode", mode if mode is not None else "rigid"), "mode")
    s = _surface(doc.get("surface", surface), "surface")
    return _contact_params({k: doc[k] for k in _PARAM_KEYS if k in doc}, "", m, s)


def load_bounds(path) -> ParamBounds:
    doc = _read_json(path)
    _check_schema(doc, BOUNDS_SCHEMA)
    _reject_unknown(doc, _PARAM_KEYS | {"schema"}, "")
    kwargs = {k: _vector(doc, k, "", 2) for k in _PARAM_KEYS if k in doc}
    return _guard("bounds", ParamBounds, **kwargs)


def bundled(name: str) -> Path:
    """Path of a scenario shipped with the package."""
    path = Path(str(resources.files("lcsdrone") / "data" / name))
    if not path.exists():
        raise FileNotFoundError(name)
    return path


def bundled_scenarios() -> list:
    root = Path(str(resources.files("lcsdrone") / "data"))
    return sorted(p for p in root.glob("*.json") if not p.name.startswith("bounds"))


# --------------------------------------------------------------------- output

def _fmt(x: float) -> str:
    return "%.9g" % x


def write_trajectory(traj: Trajectory, path) -> Path:
    """Trajectory CSV plus a sibling ``.events.csv``; returns the events path."""
    path = Path(path)
    data = np.column_stack([traj.t, traj.position, traj.velocity, traj.contact_force])
    flags = np.column_stack([traj.contact_active.astype(int), traj.mode])
    lines = [TRAJECTORY_HEADER]
    for row, flag, sp in zip(data, flags, traj.setpoint):
        lines.append(",".join([*map(_fmt, row), str(flag[0]), str(flag[1]), *map(_fmt, sp)]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    events = path.with_name(path.name[:-4] + ".events.csv" if path.name.endswith(".csv") else path.name + ".events.csv")
    ev_lines = ["t,event"] + [f"{_fmt(e.t)},{e.kind.value}" for e in traj.events]
    events.write_text("\n".join(ev_lines) + "\n", encoding="utf-8", newline="\n")
    return events


def load_observed(path, frame=None, source: str | None = None) -> ObservedTrajectory:
    """Read an observation CSV.

    Two layouts are accepted: the trajectory layout written by
    ``write_trajectory`` (needs ``frame`` to project into collision
    coordinates) and a native ``t,x,xdot[,y,ydot,z,zdot,force]`` layout
    already in collision coordinates.
    """
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    try:
        data = np.array([[float(v) for v in r] for r in body if r], dtype=float).reshape(-1, len(header))
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric value ({exc})") from None
    cols = {name: data[:, i] for i, name in enumerate(header)}
    label = source or path.stem
    if ",".join(header) == TRAJECTORY_HEADER:
        if frame is None:
            raise ConfigError("a collision frame is needed to read a trajectory CSV")
        R = frame.rotation
        pos = np.column_stack([cols["x"], cols["y"], cols["z"]]) - frame.origin
        rel = pos @ R
        rel[:, 0] -= frame.rest_offset
        vel = np.column_stack([cols["vx"], cols["vy"], cols["vz"]]) @ R
        force = np.where(cols["contact"] > 0, cols["lam_x"], 0.0)
        return ObservedTrajectory(t=cols["t"], x=rel[:, 0], xdot=vel[:, 0], y=rel[:, 1], ydot=vel[:, 1],
                                  z=rel[:, 2], zdot=vel[:, 2], force=force, source=label)
    missing = [c for c in OBSERVED_HEADER if c not in cols]
    if missing:
        raise ConfigError(f"{path}: missing column(s) {', '.join(missing)}")
    extra = {c: cols[c] for c in ("y", "ydot", "z", "zdot", "force") if c in cols}
    return ObservedTrajectory(t=cols["t"], x=cols["x"], xdot=cols["xdot"], source=label, **extra)


def write_observed(obs: ObservedTrajectory, path):
    chans = obs.channels()
    names = ["t", *chans]
    cols = np.column_stack([obs.t, *chans.values()])
    lines = [",".join(names)] + [",".join(map(_fmt, r)) for r in cols]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, (np.floating,)):
        return _clean(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def _params_doc(p: ContactParams) -> dict:
    return {"k": p.k, "f": p.f, "mu": p.mu, "nu": p.nu, "mode": p.mode.name.lower(), "surface": p.surface}


def _candidate_doc(c) -> dict:
    return {"approach_velocities": [list(v) for v in c.approach_velocities],
            "modes": [m.name.lower() for m in c.mode_sequence]}


def report_dict(result, inputs: dict | None = None) -> dict:
    """JSON-ready report for a plan, fit or validation result."""
    doc = {"schema": REPORT_SCHEMA, "inputs": inputs or {}}
    if isinstance(result, PlanResult):
        q = result.query
        doc.update(kind="plan", best=_candidate_doc(result.best), terminal_distance=result.terminal_distance,
                   final_position=list(result.trajectory.position[-1]),
                   grid={"resolution": q.grid_resolution, "bound": q.velocity_bound},
                   n_candidates=len(result.all_scores),
                   scores=[{**_candidate_doc(c), "distance": d, "collisions": n}
                           for (c, d), n in zip(result.all_scores, result.collisions_detected)])
    elif isinstance(result, FitResult):
        b = result.bounds
        doc.update(kind="identify", params=_params_doc(result.params), fitted=list(result.fitted),
                   rmse_position=result.rmse_position, rmse_velocity=result.rmse_velocity,
                   objective=result.objective, iterations=result.iterations, converged=result.converged,
                   bounds={n: list(getattr(b, n)) for n in ("k", "f", "mu", "nu")} if b else None)
    elif isinstance(result, ValidationReport):
        doc.update(kind="validate", params=_params_doc(result.params), source=result.source,
                   channels={n: {"rmse": c.rmse, "peak_observed": c.peak_observed,
                                 "peak_simulated": c.peak_simulated, "peak_accuracy": c.peak_accuracy,
                                 "flagged": c.flagged} for n, c in result.channels.items()},
                   observed_metrics=result.observed_metrics.__dict__,
                   simulated_metrics=result.simulated_metrics.__dict__)
    else:
        raise TypeError(f"cannot report {type(result).__name__}")
    return _clean(doc)


def write_report(result, path, inputs: dict | None = None):
    text = json.dumps(report_dict(result, inputs), indent=2, sort_keys=False)
    Path(path).write_text(text + "\n", encoding="utf-8", newline="\n")


# ------------------------------------------------------------------------ CLI

@dataclass(frozen=True)
class RunConfig:
    command: str
    scenario_path: Path | None
    output_dir: Path
    h: float = 1e-4
    seed: int | None = None


def _step(args) -> StepConfig:
    try:
        return StepConfig(h=args.h)
    except ValueError as exc:
        raise ConfigError(str(exc), "--h") from None


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_simulate(args, expected: str) -> int:
    sc = load_scenario(args.scenario)
    if not isinstance(sc, Scenario) or sc.kind.value != expected:
        raise ConfigError(f"expected a {expected!r} scenario", "kind")
    if getattr(args, "seed", None) is not None and sc.controller is not None:
        sc = replace(sc, controller=replace(sc.controller, seed=args.seed))
    traj = simulate(sc, _step(args))
    out = _out_dir(args)
    stem = Path(args.scenario).stem
    write_trajectory(traj, out / f"{stem}.csv")
    summary = {"schema": REPORT_SCHEMA, "kind": f"simulate-{expected}", "inputs": {"scenario": str(args.scenario), "h": args.h},
               "samples": len(traj), "events": [{"t": e.t, "event": e.kind.value} for e in traj.events]}
    try:
        summary["metrics"] = contact_metrics(traj, sc.vehicle).__dict__
    except ValueError:
        summary["metrics"] = None
    (out / f"{stem}.summary.json").write_text(json.dumps(_clean(summary), indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out / (stem + '.csv')} ({len(traj)} samples)")
    return 0


def _cmd_plan(args) -> int:
    query = load_scenario(args.query)
    if not isinstance(query, PlanQuery):
        raise ConfigError("expected a 'plan' query", "kind")
    if args.grid is not None:
        query = _guard("--grid", query.with_grid, args.grid)
    if args.jobs < 1:
        raise ConfigError("must be >= 1", "--jobs")
    result = plan(query, _step(args), jobs=args.jobs)
    out = _out_dir(args)
    stem = Path(args.query).stem
    write_report(result, out / f"{stem}.plan.json",
                 inputs={"query": str(args.query), "grid": query.grid_resolution, "h": args.h})
    write_trajectory(result.trajectory, out / f"{stem}.csv")
    best = result.best
    print(f"best {best.label()} distance {result.terminal_distance:.4f} m over {len(result.all_scores)} candidates")
    return 0


def _scenario_and_frame(args):
    sc = load_scenario(args.scenario)
    if not isinstance(sc, Scenario):
        raise ConfigError("expected a drop or flight scenario", "kind")
    if not 0 <= args.wall < len(sc.walls):
        raise ConfigError(f"scenario has {len(sc.walls)} wall(s)", "--wall")
    return sc, sc.walls[args.wall].frame


def _cmd_identify(args) -> int:
    sc, frame = _scenario_and_frame(args)
    obs = load_observed(args.observed, frame)
    if not args.lateral:
        obs = ObservedTrajectory(t=obs.t, x=obs.x, xdot=obs.xdot, force=obs.force, source=obs.source)
    bounds = load_bounds(args.bounds) if args.bounds else ParamBounds()
    fit = fit_contact_params(obs, sc, bounds, _step(args), wall_index=args.wall)
    out = _out_dir(args)
    write_report(fit, out / "identify.json",
                 inputs={"observed": str(args.observed), "scenario": str(args.scenario),
                         "bounds": str(args.bounds) if args.bounds else None, "h": args.h})
    p = fit.params
    print(f"k={p.k:.6g} f={p.f:.6g} mu={p.mu:.6g} nu={p.nu:.6g} converged={fit.converged}")
    return 0


def _cmd_validate(args) -> int:
    sc, frame = _scenario_and_frame(args)
    params = load_params(args.params, mode=sc.mode_schedule[0], surface=sc.walls[args.wall].surface)
    obs = load_observed(args.observed, frame)
    rep = validate_params(params, obs, sc, _step(args), wall_index=args.wall)
    out = _out_dir(args)
    write_report(rep, out / "validate.json",
                 inputs={"params": str(args.params), "observed": str(args.observed),
                         "scenario": str(args.scenario), "h": args.h})
    for name, ch in rep.channels.items():
        if ch.peak_accuracy is not None:
            print(f"{name}: peak accuracy {100 * ch.peak_accuracy:.1f}%")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcsdrone", description="Collision simulation and planning for dual-stiffness quadrotors.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(p, h=True):
        p.add_argument("--out", required=True, help="output directory (created if missing)")
        if h:
            p.add_argument("--h", type=float, default=1e-4, help="integration step in seconds (default 1e-4)")

    p = sub.add_parser("simulate-drop", help="simulate an unpowered drop test")
    p.add_argument("--scenario", required=True, help="drop scenario JSON")
    common(p)
    p.set_defaults(func=lambda a: _cmd_simulate(a, "drop"))

    p = sub.add_parser("simulate-flight", help="simulate a powered wall collision with recovery")
    p.add_argument("--scenario", required=True, help="flight scenario JSON")
    common(p)
    p.add_argument("--seed", type=int, default=None, help="override the force-estimate noise seed")
    p.set_defaults(func=lambda a: _cmd_simulate(a, "flight"))

    p = sub.add_parser("plan", help="search approach velocities and mode sequences")
    p.add_argument("--query", required=True, help="plan query JSON")
    common(p)
    p.add_argument("--grid", type=float, default=None, help="velocity grid resolution in m/s (overrides the query)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for candidate scoring (default 1)")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("identify", help="fit contact parameters to an observed trajectory")
    p.add_argument("--observed", required=True, help="observation CSV (trajectory or t,x,xdot layout)")
    p.add_argument("--scenario", required=True, help="scenario reproducing the observation")
    p.add_argument("--bounds", default=None, help="parameter bounds JSON (default: built-in box)")
    p.add_argument("--wall", type=int, default=0, help="index of the wall whose parameters are fitted")
    p.add_argument("--lateral", action="store_true", help="also fit mu and nu from lateral channels")
    common(p)
    p.set_defaults(func=_cmd_identify)

    p = sub.add_parser("validate", help="score contact parameters against held-out data")
    p.add_argument("--params", required=True, help="params JSON or an identify report")
    p.add_argument("--observed", required=True, help="held-out observation CSV")
    p.add_argument("--scenario", required=True, help="scenario reproducing the observation")
    p.add_argument("--wall", type=int, default=0, help="index of the wall being validated")
    common(p)
    p.set_defaults(func=_cmd_validate)
    return parser


def run_config(args) -> RunConfig:
    scenario = getattr(args, "scenario", None) or getattr(args, "query", None)
    return RunConfig(args.command, Path(scenario) if scenario else None, Path(args.out),
                     getattr(args, "h", 1e-4), getattr(args, "seed", None))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
