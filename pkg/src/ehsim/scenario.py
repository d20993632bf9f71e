"""Scenario files: JSON documents merged onto :data:`DEFAULTS`.

Every key a scenario may set appears in :data:`DEFAULTS`; anything else is
rejected so a typo never silently falls back to a default. ``mounts`` is a
list whose entries are merged onto :data:`MOUNT_DEFAULTS`.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .control import PidGains
from .ehs_dynamics import EhsMassModel
from .errors import CalibrationError, DomainError, ScenarioError
from .scissor import (
    EhsJointState,
    MountFrame,
    ScissorParams,
    actuation_from_extension,
    calibrate_from_envelope,
    extension_from_actuation,
    extension_jacobian,
)
from .spatial_math import RigidBodyState, Rotation, euler_to_rotation
from .vehicle import ActuatorLimits, CoupledModel, VehicleConfig

# +Y face of the 16U body; pan axis along the face normal, boom stowed along +Z
DEFAULT_MOUNT_EULER = [-math.pi / 2, 0.0, -math.pi / 2]

MOUNT_DEFAULTS: dict[str, Any] = {
    "position_m": [0.0, 0.12315, 0.0],
    "rotation_euler_rad": DEFAULT_MOUNT_EULER,
}


def _pid(kp, ki, kd, integral_clamp, output_clamp):
    return {"kp": kp, "ki": ki, "kd": kd, "integral_clamp": integral_clamp, "output_clamp": output_clamp}


DEFAULTS: dict[str, Any] = {
    "name": "unnamed",
    "description": "",
    "vehicle": {
        "mass_kg": 27.7,
        "dims_m": [0.2463, 0.2463, 0.454],
        "inertia_kgm2": None,
    },
    "ehs": {
        "max_extension_m": 5.026,
        "link_count": 24,
        "mount_clearance_m": 0.1,
        "mass_kg": 2.41,
        "mass_split": {"links": 0.85, "bar": 0.10, "effector": 0.05},
        "friction": {"actuation_n_s_per_m": 0.01, "revolute_nm_s_per_rad": 0.01},
    },
    "mounts": [copy.deepcopy(MOUNT_DEFAULTS)],
    "limits": {
        "body_force_n": 0.1,
        "body_torque_nm": 0.2,
        "prismatic_force_n": 40.0,
        "revolute_torque_nm": 0.2,
        "link_structural_force_n": 20.0,
    },
    "gains": {
        # acceleration-level, multiplied by composite mass / inertia
        "position": _pid(0.75, 0.125, 1.5, 1.0, 0.1 / 27.7),
        "attitude": _pid(3.0, 1.0, 3.0, 0.5, 1.0),
        # joint-level, physical units (N m / rad, N / m of extension error)
        "pan": _pid(2.0, 0.05, 4.0, 1.0, 0.2),
        "pitch": _pid(2.0, 0.05, 4.0, 1.0, 0.2),
        "actuation": _pid(2000.0, 0.0, 400.0, 1.0, 40.0),
        "schedule_actuation": True,
        "jacobian_floor": 0.5,
        "base_control": True,
        "reaction_feedforward": True,
        "joint_feedforward": True,
    },
    "initial": {
        "pose": [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        "velocity_mps": [0.0, 0.0, 0.0],
        "angular_velocity_radps": [0.0, 0.0, 0.0],
        "joints": {
            "pan_rad": 0.0,
            "pitch_rad": 0.0,
            "actuation_m": None,
            "extension_m": None,
            "extension_rate_mps": 0.0,
        },
    },
    "maneuver": {
        "pose_goal": None,
        "profile": {"t_total_s": 500.0, "t_accel_s": 153.0, "t_start_s": 0.0},
        "joint_goal": None,
        "joint_profile": {
            "kind": "trapezoid",
            "space": "actuation",
            "t_total_s": 200.0,
            "t_accel_s": 40.0,
            "t_start_s": 0.0,
            "extension_rate_mps": 0.0,
        },
    },
    "sim": {"dt_s": 0.001, "duration_s": 10.0, "sample_interval_s": 0.1},
    "probes": {"actuation_fractions": []},
}

JOINT_GOAL_KEYS = {"pan_rad", "pitch_rad", "deployed_m", "extension_m", "actuation_m"}

JOINT_MODE_HOLD, JOINT_MODE_ACTUATION, JOINT_MODE_EXTENSION, JOINT_MODE_RAMP = 0, 1, 2, 3


def _merge(base: Any, user: Any, path: str) -> Any:
    if isinstance(base, dict):
        if not isinstance(user, dict):
            raise ScenarioError(f"{path or 'scenario'}: expected an object")
        out = copy.deepcopy(base)
        for key, value in user.items():
            sub = f"{path}.{key}" if path else key
            if key not in base:
                raise ScenarioError(f"unknown key {sub!r}")
            if key == "mounts":
                if not isinstance(value, list):
                    raise ScenarioError("mounts must be a list")
                out[key] = [_merge(MOUNT_DEFAULTS, m, f"mounts[{i}]") for i, m in enumerate(value)]
            elif key == "joint_goal" and value is not None:
                if not isinstance(value, dict) or set(value) - JOINT_GOAL_KEYS:
                    raise ScenarioError(
                        f"maneuver.joint_goal accepts only {sorted(JOINT_GOAL_KEYS)}"
                    )
                out[key] = dict(value)
            elif base[key] is None or isinstance(base[key], (list, str, bool, int, float)):
                out[key] = value
            else:
                out[key] = _merge(base[key], value, sub)
        return out
    return user


def _set_path(doc: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


def _num(doc: dict, path: str) -> float:
    node: Any = doc
    for k in path.split("."):
        node = node[k]
    try:
        v = float(node)
    except (TypeError, ValueError):
        raise ScenarioError(f"{path} must be a number, got {node!r}") from None
    if not math.isfinite(v):
        raise ScenarioError(f"{path} must be finite")
    return v


def _vector(value: Any, n: int, path: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=np.float64).reshape(n)
    except (TypeError, ValueError):
        raise ScenarioError(f"{path} must be a list of {n} numbers") from None
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{path} must be finite")
    return arr


def _gains(doc: dict, name: str) -> PidGains:
    g = doc["gains"][name]
    try:
        return PidGains(
            float(g["kp"]), float(g["ki"]), float(g["kd"]),
            float(g["integral_clamp"]), float(g["output_clamp"]),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"gains.{name}: {exc}") from None


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    position: PidGains
    attitude: PidGains
    pan: PidGains
    pitch: PidGains
    actuation: PidGains
    schedule_actuation: bool = True
    jacobian_floor: float = 0.5
    base_control: bool = True
    reaction_feedforward: bool = True
    joint_feedforward: bool = True


@dataclass(frozen=True, eq=False)
class PoseManeuver:
    goal: RigidBodyState
    t_total: float
    t_accel: float
    t_start: float = 0.0


@dataclass(frozen=True, eq=False)
class JointManeuver:
    mode: int
    goal: EhsJointState
    t_total: float = 0.0
    t_accel: float = 0.0
    t_start: float = 0.0
    extension_rate: float = 0.0


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    model: CoupledModel
    controller: ControllerConfig
    initial_base: RigidBodyState
    initial_joints: EhsJointState
    pose_maneuver: PoseManeuver | None
    joint_maneuver: JointManeuver | None
    dt: float
    duration: float
    sample_interval: float
    probe_fractions: tuple[float, ...] = ()
    description: str = ""
    document: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def sample_every(self) -> int:
        return int(round(self.sample_interval / self.dt))


def bundled_scenarios() -> list[str]:
    root = resources.files("ehsim") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_scenario_path(ref: str | Path) -> Path:
    """Accept a file path or the name of a bundled scenario (``scenario_a``)."""
    path = Path(ref)
    if path.exists():
        return path
    name = path.name[:-5] if path.name.endswith(".json") else path.name
    bundled = resources.files("ehsim") / "scenarios" / f"{name}.json"
    if bundled.is_file():
        return Path(str(bundled))
    raise ScenarioError(f"scenario file not found: {ref}")


def load_scenario(source: str | Path | dict, overrides: dict[str, Any] | None = None) -> Scenario:
    """Read, merge, override and validate a scenario.

    ``overrides`` maps dotted keys (``sim.dt_s``) to values and is applied
    before validation.
    """
    if isinstance(source, dict):
        user = copy.deepcopy(source)
    else:
        path = resolve_scenario_path(source)
        try:
            user = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: invalid JSON ({exc})") from None
    for key, value in (overrides or {}).items():
        _set_path(user, key, value)
    doc = _merge(DEFAULTS, user, "")
    return build_scenario(doc)


def build_scenario(doc: dict) -> Scenario:
    sim_dt = _num(doc, "sim.dt_s")
    duration = _num(doc, "sim.duration_s")
    sample = _num(doc, "sim.sample_interval_s")
    if not sim_dt > 0:
        raise ScenarioError(f"sim.dt_s must be positive, got {sim_dt}")
    if not duration >= 0:
        raise ScenarioError(f"sim.duration_s must be non-negative, got {duration}")
    if not sample >= sim_dt:
        raise ScenarioError("sim.sample_interval_s must be at least sim.dt_s")
    for name, value, unit in (("sim.duration_s", duration, sim_dt), ("sim.sample_interval_s", sample, sim_dt)):
        if abs(value / unit - round(value / unit)) > 1e-6:
            raise ScenarioError(f"{name} must be a whole number of steps")
    if abs(duration / sample - round(duration / sample)) > 1e-6:
        raise ScenarioError("sim.duration_s must be a whole number of sample intervals")

    try:
        params = calibrate_from_envelope(
            _num(doc, "ehs.max_extension_m"), int(doc["ehs"]["link_count"]), _num(doc, "ehs.mount_clearance_m")
        )
    except CalibrationError as exc:
        raise ScenarioError(f"ehs: {exc}") from None
    split = doc["ehs"]["mass_split"]
    if set(split) != {"links", "bar", "effector"}:
        raise ScenarioError("ehs.mass_split needs exactly links, bar, effector")
    try:
        mass_model = EhsMassModel(_num(doc, "ehs.mass_kg"), float(split["links"]), float(split["bar"]), float(split["effector"]))
        mounts = tuple(
            MountFrame(
                _vector(m["position_m"], 3, f"mounts[{i}].position_m"),
                euler_to_rotation(*_vector(m["rotation_euler_rad"], 3, f"mounts[{i}].rotation_euler_rad")),
            )
            for i, m in enumerate(doc["mounts"])
        )
        lim = doc["limits"]
        limits = ActuatorLimits(
            float(lim["body_force_n"]), float(lim["body_torque_nm"]), float(lim["prismatic_force_n"]),
            float(lim["revolute_torque_nm"]), float(lim["link_structural_force_n"]),
        )
        veh = doc["vehicle"]
        vehicle = VehicleConfig(
            _num(doc, "vehicle.mass_kg"),
            tuple(_vector(veh["dims_m"], 3, "vehicle.dims_m")),
            None if veh["inertia_kgm2"] is None else _vector(veh["inertia_kgm2"], 9, "vehicle.inertia_kgm2").reshape(3, 3),
            mounts,
            limits,
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    fr = doc["ehs"]["friction"]
    rev = float(fr["revolute_nm_s_per_rad"])
    model = CoupledModel(vehicle, params, mass_model, (rev, rev, float(fr["actuation_n_s_per_m"])))

    g = doc["gains"]
    controller = ControllerConfig(
        _gains(doc, "position"), _gains(doc, "attitude"), _gains(doc, "pan"),
        _gains(doc, "pitch"), _gains(doc, "actuation"),
        bool(g["schedule_actuation"]), _num(doc, "gains.jacobian_floor"), bool(g["base_control"]),
        bool(g["reaction_feedforward"]), bool(g["joint_feedforward"]),
    )
    if not controller.jacobian_floor > 0:
        raise ScenarioError("gains.jacobian_floor must be positive")

    init = doc["initial"]
    pose = _vector(init["pose"], 6, "initial.pose")
    initial_base = RigidBodyState(
        pose[:3], euler_to_rotation(*pose[3:]),
        _vector(init["velocity_mps"], 3, "initial.velocity_mps"),
        _vector(init["angular_velocity_radps"], 3, "initial.angular_velocity_radps"),
    )
    initial_joints = _initial_joints(init["joints"], params)

    man = doc["maneuver"]
    pose_maneuver = None
    if man["pose_goal"] is not None:
        goal = _vector(man["pose_goal"], 6, "maneuver.pose_goal")
        t_total, t_accel, t_start = _profile(doc, "maneuver.profile")
        pose_maneuver = PoseManeuver(
            RigidBodyState(goal[:3], euler_to_rotation(*goal[3:])), t_total, t_accel, t_start
        )
    joint_maneuver = _joint_maneuver(doc, params, initial_joints)

    end = 0.0
    if pose_maneuver:
        end = pose_maneuver.t_start + pose_maneuver.t_total
    if joint_maneuver and joint_maneuver.mode != JOINT_MODE_RAMP:
        end = max(end, joint_maneuver.t_start + joint_maneuver.t_total)
    if duration < end - 1e-9:
        raise ScenarioError(f"sim.duration_s={duration} ends before the maneuver profile ({end} s)")

    probes = doc["probes"]["actuation_fractions"]
    if not isinstance(probes, list) or not all(0 < float(f) < 1 for f in probes):
        raise ScenarioError("probes.actuation_fractions must be fractions in (0, 1)")

    return Scenario(
        name=str(doc["name"]),
        model=model,
        controller=controller,
        initial_base=initial_base,
        initial_joints=initial_joints,
        pose_maneuver=pose_maneuver,
        joint_maneuver=joint_maneuver,
        dt=sim_dt,
        duration=duration,
        sample_interval=sample,
        probe_fractions=tuple(float(f) for f in probes),
        description=str(doc["description"]),
        document=doc,
    )


def _profile(doc: dict, path: str) -> tuple[float, float, float]:
    t_total = _num(doc, f"{path}.t_total_s")
    t_accel = _num(doc, f"{path}.t_accel_s")
    t_start = _num(doc, f"{path}.t_start_s")
    if not 0 < t_accel < t_total / 2:
        raise ScenarioError(f"{path}: need 0 < t_accel_s < t_total_s / 2")
    if t_start < 0:
        raise ScenarioError(f"{path}.t_start_s must be non-negative")
    return t_total, t_accel, t_start


def _actuation_of(joints_doc: dict, params: ScissorParams, where: str, default: float | None) -> float:
    given = [k for k in ("actuation_m", "extension_m", "deployed_m") if joints_doc.get(k) is not None]
    if len(given) > 1:
        raise ScenarioError(f"{where}: give only one of {given}")
    try:
        if not given:
            if default is None:
                raise ScenarioError(f"{where}: missing actuation_m, extension_m or deployed_m")
            return default
        key = given[0]
        value = float(joints_doc[key])
        if key == "actuation_m":
            y = value
        elif key == "extension_m":
            y = actuation_from_extension(value, params)
        else:
            y = actuation_from_extension(params.folded_extension + value, params)
    except DomainError as exc:
        raise ScenarioError(f"{where}: {exc}") from None
    if not params.y_min - 1e-12 <= y <= params.y_max + 1e-12:
        raise ScenarioError(
            f"{where}: actuation {y:.6f} m outside usable stroke [{params.y_min:.6f}, {params.y_max:.6f}]"
        )
    return min(max(y, params.y_min), params.y_max)


def _initial_joints(joints_doc: dict, params: ScissorParams) -> EhsJointState:
    y = _actuation_of(joints_doc, params, "initial.joints", params.y_max)
    rate = float(joints_doc["extension_rate_mps"])
    dy = rate / extension_jacobian(y, params) if rate else 0.0
    return EhsJointState(float(joints_doc["pan_rad"]), float(joints_doc["pitch_rad"]), y, 0.0, 0.0, dy)


def _joint_maneuver(doc: dict, params: ScissorParams, start: EhsJointState) -> JointManeuver | None:
    man = doc["maneuver"]
    prof = man["joint_profile"]
    kind, space = prof["kind"], prof["space"]
    if kind not in ("trapezoid", "ramp"):
        raise ScenarioError("maneuver.joint_profile.kind must be 'trapezoid' or 'ramp'")
    if space not in ("actuation", "extension"):
        raise ScenarioError("maneuver.joint_profile.space must be 'actuation' or 'extension'")
    if kind == "ramp":
        if man["joint_goal"] is not None:
            raise ScenarioError("a ramp joint profile takes no joint_goal")
        rate = _num(doc, "maneuver.joint_profile.extension_rate_mps")
        t_start = _num(doc, "maneuver.joint_profile.t_start_s")
        if rate == 0:
            raise ScenarioError("maneuver.joint_profile.extension_rate_mps must be non-zero for a ramp")
        return JointManeuver(JOINT_MODE_RAMP, start, t_start=t_start, extension_rate=rate)
    goal = man["joint_goal"]
    if goal is None:
        return None
    y = _actuation_of(goal, params, "maneuver.joint_goal", start.actuation)
    target = EhsJointState(float(goal.get("pan_rad", start.pan)), float(goal.get("pitch_rad", start.pitch)), y)
    t_total, t_accel, t_start = _profile(doc, "maneuver.joint_profile")
    mode = JOINT_MODE_ACTUATION if space == "actuation" else JOINT_MODE_EXTENSION
    return JointManeuver(mode, target, t_total, t_accel, t_start)
