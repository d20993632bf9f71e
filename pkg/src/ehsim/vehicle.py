"""Free-floating cubesat coupled to its hook systems.

The coupled integrator is momentum-projected symplectic Euler:

1. generalized accelerations from the full mass matrix give the new joint
   rates and a tentative base angular velocity;
2. joint positions and attitude advance with those new rates;
3. total linear momentum, angular momentum about the inertial origin and the
   combined centre of mass advance by the external impulse only;
4. base position and base twist are recovered from those invariants at the
   new configuration.

With no external wrench, step 3 makes momentum and centre-of-mass
conservation hold to rounding, independent of step size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .ehs_dynamics import EhsDynamicState, EhsMassModel, point_layout, system_terms
from .errors import SimulationFault
from .scissor import MountFrame, ScissorParams, EhsJointState
from .spatial_math import (
    RigidBodyState,
    Rotation,
    Wrench,
    cross,
    quat_exp,
    quat_mul,
    quat_normalize,
    quat_to_matrix,
    vec3,
)

# saturation flag bits, in telemetry order
SAT_FORCE = (1, 2, 4)
SAT_TORQUE = (8, 16, 32)
SAT_PAN, SAT_PITCH, SAT_ACTUATION = 64, 128, 256


def derive_box_inertia(mass: float, dims) -> np.ndarray:
    """Inertia of a uniform box about its centre, axes along its edges."""
    a, b, c = (float(d) for d in dims)
    if mass <= 0 or min(a, b, c) < 0:
        raise ValueError("mass must be positive and dimensions non-negative")
    return np.diag([mass * (b * b + c * c), mass * (a * a + c * c), mass * (a * a + b * b)]) / 12.0


@dataclass(frozen=True)
class ActuatorLimits:
    """Per-channel saturation bounds.

    ``link_structural_force`` is not a saturation: exceeding it only raises an
    event, because the link rating and the actuator limit are distinct figures.
    """

    max_body_force: float = 0.1
    max_body_torque: float = 0.2
    max_prismatic_force: float = 40.0
    max_revolute_torque: float = 0.2
    link_structural_force: float = 20.0

    def __post_init__(self):
        for name, v in vars(self).items():
            if not v > 0:
                raise ValueError(f"limit {name} must be positive")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.max_body_force, self.max_body_torque, self.max_revolute_torque,
             self.max_revolute_torque, self.max_prismatic_force, self.link_structural_force]
        )


@dataclass(frozen=True, eq=False)
class VehicleConfig:
    dry_mass: float = 27.7
    dims: tuple[float, float, float] = (0.2463, 0.2463, 0.454)
    inertia: np.ndarray | None = None
    mounts: tuple[MountFrame, ...] = ()
    limits: ActuatorLimits = field(default_factory=ActuatorLimits)

    def __post_init__(self):
        if not self.dry_mass > 0 or min(self.dims) <= 0:
            raise ValueError("dry mass and body dimensions must be positive")
        inertia = (
            derive_box_inertia(self.dry_mass, self.dims)
            if self.inertia is None
            else np.array(self.inertia, dtype=np.float64).reshape(3, 3)
        )
        if not np.allclose(inertia, inertia.T) or np.any(np.linalg.eigvalsh(inertia) <= 0):
            raise ValueError("body inertia must be symmetric positive definite")
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "mounts", tuple(self.mounts))


@dataclass(frozen=True, eq=False)
class ControlCommand:
    """Body wrench (inertial frame, force through the combined centre of mass)
    and per-unit joint efforts ``(pan N m, pitch N m, actuation N)``."""

    wrench: Wrench = field(default_factory=Wrench)
    joint_efforts: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self):
        eff = np.array(self.joint_efforts, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(eff)):
            raise ValueError("joint efforts must be finite")
        object.__setattr__(self, "joint_efforts", eff)


@njit(cache=True)
def saturate_kernel(force, torque, efforts, limits):
    """Clamp each channel; returns clamped copies and the flag bitmask."""
    flags = 0
    f = force.copy()
    t = torque.copy()
    e = efforts.copy()
    for k in range(3):
        if abs(f[k]) > limits[0]:
            f[k] = math.copysign(limits[0], f[k])
            flags |= 1 << k
        if abs(t[k]) > limits[1]:
            t[k] = math.copysign(limits[1], t[k])
            flags |= 1 << (3 + k)
    for u in range(e.shape[0]):
        for j in range(3):
            lim = limits[2 + j]
            if abs(e[u, j]) > lim:
                e[u, j] = math.copysign(lim, e[u, j])
                flags |= 1 << (6 + j)
    return f, t, e, flags


def apply_saturation(cmd: ControlCommand, limits: ActuatorLimits) -> tuple[ControlCommand, int]:
    """Clamp every channel independently.

    Returns the clamped command and a bitmask of saturated channels: bits 0-2
    body force x/y/z, 3-5 body torque, 6 pan, 7 pitch, 8 actuation (any unit).
    """
    w = cmd.wrench
    f, t, e, flags = saturate_kernel(w.force, w.torque, cmd.joint_efforts, limits.as_array())
    return ControlCommand(Wrench(f, t, w.frame), e), int(flags)


@njit(cache=True)
def wrap_pi(a):
    w = a - 2.0 * math.pi * math.floor((a + math.pi) / (2.0 * math.pi))
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


@njit(cache=True)
def _solve_or_nan(A, b):
    # a non-finite system yields a NaN answer for the caller's fault check
    # instead of a linear-algebra exception from inside compiled code
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        return np.full(b.shape[0], np.nan)
    return np.linalg.solve(A, b)


@njit(cache=True)
def coupled_step(
    xb, quat, vb, omega_b, joints, rates,
    force, torque, efforts, friction, dt, y_lo, y_hi,
    mass, a0, a1, b, half_link, base_mass, base_inertia, mount_pos, mount_rot,
):
    """One fixed step of the coupled system; see the module docstring.

    ``force`` and ``torque`` are inertial; the force acts along a line through
    the combined centre of mass. Returns the new state and a per-unit flag
    that is 1 where the actuation coordinate hit a stroke stop.
    """
    n_units = joints.shape[0]
    R = quat_to_matrix(quat)
    omega = R @ omega_b
    M, h, P, Lb, smr = system_terms(
        xb, quat, vb, omega, joints, rates, mass, a0, a1, b, half_link,
        base_mass, base_inertia, mount_pos, mount_rot,
    )
    m_tot = base_mass + n_units * mass.sum()
    com = xb + smr / m_tot

    Q = np.zeros(M.shape[0])
    Q[:3] = force
    Q[3:6] = torque + cross(com - xb, force)
    for u in range(n_units):
        for j in range(3):
            Q[6 + 3 * u + j] = efforts[u, j] - friction[j] * rates[u, j]
    acc = _solve_or_nan(M, Q - h)

    new_rates = rates.copy()
    new_joints = joints.copy()
    hits = np.zeros(n_units, dtype=np.int64)
    for u in range(n_units):
        for j in range(3):
            new_rates[u, j] = rates[u, j] + acc[6 + 3 * u + j] * dt
            new_joints[u, j] = joints[u, j] + new_rates[u, j] * dt
        new_joints[u, 0] = wrap_pi(new_joints[u, 0])
        new_joints[u, 1] = wrap_pi(new_joints[u, 1])
        if new_joints[u, 2] > y_hi:
            new_joints[u, 2] = y_hi
            new_rates[u, 2] = 0.0
            hits[u] = 1
        elif new_joints[u, 2] < y_lo:
            new_joints[u, 2] = y_lo
            new_rates[u, 2] = 0.0
            hits[u] = 1

    omega_tent = omega + acc[3:6] * dt
    new_quat = quat_normalize(quat_mul(quat_exp(omega_tent * dt), quat))

    L_origin = Lb + cross(xb, P)
    new_P = P + force * dt
    new_L = L_origin + (cross(com, force) + torque) * dt
    new_com = com + new_P * (dt / m_tot)

    zero3 = np.zeros(3)
    M2, _, _, _, smr2 = system_terms(
        zero3, new_quat, zero3, zero3, new_joints, new_rates, mass, a0, a1, b, half_link,
        base_mass, base_inertia, mount_pos, mount_rot,
    )
    new_xb = new_com - smr2 / m_tot
    rhs = np.empty(6)
    rhs[:3] = new_P
    rhs[3:] = new_L - cross(new_xb, new_P)
    nq = 3 * n_units
    for r in range(6):
        for c in range(nq):
            rhs[r] -= M2[r, 6 + c] * new_rates[c // 3, c % 3]
    twist = _solve_or_nan(M2[:6, :6].copy(), rhs)
    new_R = quat_to_matrix(new_quat)
    return new_xb, new_quat, twist[:3].copy(), new_R.T @ twist[3:], new_joints, new_rates, hits


@dataclass(frozen=True, eq=False)
class CoupledModel:
    """Everything the coupled integrator needs, packed for the compiled kernels."""

    vehicle: VehicleConfig
    params: ScissorParams
    mass_model: EhsMassModel = field(default_factory=EhsMassModel)
    friction: tuple[float, float, float] = (0.01, 0.01, 0.01)

    @property
    def n_units(self) -> int:
        return len(self.vehicle.mounts)

    @property
    def total_mass(self) -> float:
        return self.vehicle.dry_mass + self.n_units * self.mass_model.total_mass

    def kernel_args(self) -> tuple:
        lay = point_layout(self.params, self.mass_model)
        mounts = self.vehicle.mounts
        mpos = np.array([m.position for m in mounts]).reshape(-1, 3)
        mrot = np.array([m.rotation.as_matrix() for m in mounts]).reshape(-1, 3, 3)
        return (
            lay.mass, lay.a0, lay.a1, lay.b, self.params.half_link_length,
            self.vehicle.dry_mass, self.vehicle.inertia, mpos, mrot,
        )


def _joint_arrays(ehs: list[EhsDynamicState]) -> tuple[np.ndarray, np.ndarray]:
    q = np.array([e.joints.positions() for e in ehs]).reshape(-1, 3)
    qd = np.array([e.joints.rates() for e in ehs]).reshape(-1, 3)
    return q, qd


def system_momentum(
    model: CoupledModel, base: RigidBodyState, ehs: list[EhsDynamicState]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Total linear momentum, angular momentum about the origin and combined CoM."""
    q, qd = _joint_arrays(ehs)
    R = base.attitude.as_matrix()
    _, _, P, L, smr = system_terms(
        base.position, base.attitude.q, base.linear_velocity, R @ base.angular_velocity,
        q, qd, *model.kernel_args(),
    )
    return P, L + np.cross(base.position, P), base.position + smr / model.total_mass


def step_coupled(
    model: CoupledModel,
    base: RigidBodyState,
    ehs: list[EhsDynamicState],
    cmd: ControlCommand,
    dt: float,
) -> tuple[RigidBodyState, list[EhsDynamicState], list[str]]:
    """Advance base and hook systems by ``dt`` under an already saturated command.

    Returns the new base, new hook states and event messages for stroke stops.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if len(ehs) != model.n_units:
        raise ValueError(f"expected {model.n_units} hook states, got {len(ehs)}")
    for e in ehs:
        e.joints.check(model.params)
    q, qd = _joint_arrays(ehs)
    wrench = cmd.wrench.to_inertial(base.attitude)
    efforts = cmd.joint_efforts if cmd.joint_efforts.size else np.zeros((model.n_units, 3))
    p = model.params
    xb, quat, vb, wb, q2, qd2, hits = coupled_step(
        base.position, base.attitude.q, base.linear_velocity, base.angular_velocity, q, qd,
        wrench.force, wrench.torque, efforts, np.asarray(model.friction, dtype=np.float64),
        float(dt), p.y_min, p.y_max, *model.kernel_args(),
    )
    flat = np.concatenate([xb, quat, vb, wb, q2.ravel(), qd2.ravel()])
    if not np.all(np.isfinite(flat)):
        raise SimulationFault("non-finite coupled state")
    new_base = RigidBodyState(xb, Rotation(quat), vb, wb)
    new_ehs = [
        EhsDynamicState(EhsJointState(*q2[u], *qd2[u]), e.params, e.mount)
        for u, e in enumerate(ehs)
    ]
    events = [f"unit {u}: actuation stroke stop" for u in range(len(hits)) if hits[u]]
    return new_base, new_ehs, events
