"""PID regulators for the base pose and the hook joints.

The actuation joint is servoed in extension space: the error is measured on
the end-effector distance, the effort is a force on the actuation
coordinate, and the proportional and derivative gains are divided by
``max(|dx/dy|, jacobian_floor)`` so the tracking error stays uniform along
the stroke.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .scissor import ScissorParams, jacobian_kernel
from .spatial_math import RigidBodyState, Wrench, quat_conj, quat_log, quat_mul, quat_to_matrix

JACOBIAN_FLOOR = 0.5


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0
    integral_clamp: float = 1.0
    output_clamp: float = math.inf

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative, got {v}")
        if not (self.integral_clamp > 0 and self.output_clamp > 0):
            raise ValueError("clamps must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.kp, self.ki, self.kd, self.integral_clamp, self.output_clamp])


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    previous_error: float = 0.0


@njit(cache=True)
def pid_kernel(integral, error, error_rate, dt, gains):
    """One PID update with conditional integration; returns (effort, integral)."""
    kp, ki, kd, i_clamp, o_clamp = gains[0], gains[1], gains[2], gains[3], gains[4]
    trial = min(max(integral + error * dt, -i_clamp), i_clamp)
    u = kp * error + ki * trial + kd * error_rate
    if abs(u) > o_clamp and u * error > 0.0:
        # output already saturated in the direction the error pushes: freeze
        trial = integral
        u = kp * error + ki * trial + kd * error_rate
    if u > o_clamp:
        u = o_clamp
    elif u < -o_clamp:
        u = -o_clamp
    return u, trial


def pid_step(
    state: PidState, gains: PidGains, error: float, error_rate: float, dt: float
) -> tuple[float, PidState]:
    """Effort ``kp*e + ki*int(e) + kd*e_rate`` and the successor state.

    ``error_rate`` is the measured rate of the error; the error itself is never
    differentiated numerically.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    u, integral = pid_kernel(state.integral, float(error), float(error_rate), float(dt), gains.as_array())
    return float(u), PidState(float(integral), float(error))


@njit(cache=True)
def schedule_factor(y, half_link, pairs, floor):
    return 1.0 / max(abs(jacobian_kernel(y, half_link, pairs)), floor)


def scheduled_actuation_gains(
    y: float, p: ScissorParams, base_gains: PidGains, jacobian_floor: float = JACOBIAN_FLOOR
) -> PidGains:
    """Scale ``kp`` and ``kd`` by ``1 / max(|dx/dy|, jacobian_floor)``."""
    f = float(schedule_factor(y, p.half_link_length, p.pair_count, jacobian_floor))
    return replace(base_gains, kp=base_gains.kp * f, kd=base_gains.kd * f)


@njit(cache=True)
def pose_kernel(
    pos, quat, vel, omega, ref_pos, ref_quat, ref_vel, ref_omega,
    integrals, pos_gains, att_gains, mass, inertia_w, dt,
):
    """Acceleration-level PID on position and attitude, scaled by mass and inertia.

    Velocities are inertial. Returns force, torque (inertial) and the updated
    six integrators.
    """
    acc = np.zeros(3)
    alpha = np.zeros(3)
    new_int = integrals.copy()
    rot_err = quat_log(quat_mul(ref_quat, quat_conj(quat)))
    for k in range(3):
        acc[k], new_int[k] = pid_kernel(integrals[k], ref_pos[k] - pos[k], ref_vel[k] - vel[k], dt, pos_gains)
        alpha[k], new_int[3 + k] = pid_kernel(
            integrals[3 + k], rot_err[k], ref_omega[k] - omega[k], dt, att_gains
        )
    return mass * acc, inertia_w @ alpha, new_int


def pose_controller(
    state: RigidBodyState,
    reference: RigidBodyState,
    gains: tuple[PidGains, PidGains],
    mass: float,
    inertia,
    dt: float,
    integrals=None,
    feedforward_accel=(0.0, 0.0, 0.0),
    feedforward_alpha=(0.0, 0.0, 0.0),
) -> tuple[Wrench, np.ndarray]:
    """Inertial wrench command steering ``state`` onto ``reference``.

    ``gains`` are (position, attitude) acceleration-level gains; the commanded
    accelerations are multiplied by ``mass`` and the inertial-frame
    ``inertia`` and the reference accelerations are added as feedforward. The
    attitude error is the rotation vector of ``reference * state^-1``. Returns
    the wrench and the updated integrator vector.
    """
    integrals = np.zeros(6) if integrals is None else np.asarray(integrals, dtype=np.float64)
    R = quat_to_matrix(state.attitude.q)
    Rr = quat_to_matrix(reference.attitude.q)
    inertia = np.asarray(inertia, dtype=np.float64)
    force, torque, new_int = pose_kernel(
        state.position, state.attitude.q, state.linear_velocity, R @ state.angular_velocity,
        reference.position, reference.attitude.q, reference.linear_velocity,
        Rr @ reference.angular_velocity, integrals,
        gains[0].as_array(), gains[1].as_array(), float(mass), inertia, float(dt),
    )
    force = force + mass * np.asarray(feedforward_accel, dtype=np.float64)
    torque = torque + inertia @ np.asarray(feedforward_alpha, dtype=np.float64)
    return Wrench(force, torque, "inertial"), new_int
