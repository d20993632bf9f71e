"""Trapezoidal rest-to-rest references for the base pose and the hook joints."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DomainError
from .scissor import (
    EhsJointState,
    ScissorParams,
    actuation_from_extension,
    extension_from_actuation,
    jacobian_kernel,
)
from .spatial_math import RigidBodyState, Rotation, quat_exp, quat_log, quat_mul, quat_conj, quat_to_matrix


@njit(cache=True)
def trapezoid_kernel(d, t_total, t_accel, t):
    """(position, rate, accel) of a symmetric trapezoid; clamps outside [0, T]."""
    if d == 0.0 or t <= 0.0:
        return 0.0, 0.0, 0.0
    if t >= t_total:
        return d, 0.0, 0.0
    v = d / (t_total - t_accel)
    a = v / t_accel
    if t < t_accel:
        return 0.5 * a * t * t, a * t, a
    if t <= t_total - t_accel:
        return 0.5 * a * t_accel * t_accel + v * (t - t_accel), v, 0.0
    r = t_total - t
    return d - 0.5 * a * r * r, a * r, -a


@dataclass(frozen=True)
class TrapezoidProfile:
    distance: float
    total_time: float
    accel_time: float

    def __post_init__(self):
        if not self.distance >= 0:
            raise ValueError("distance must be non-negative")
        if not 0 < self.accel_time < self.total_time / 2:
            raise ValueError("need 0 < accel_time < total_time / 2")

    @property
    def plateau_rate(self) -> float:
        return self.distance / (self.total_time - self.accel_time)

    @property
    def accel(self) -> float:
        return self.plateau_rate / self.accel_time


def profile_eval(p: TrapezoidProfile, t: float) -> tuple[float, float, float]:
    """The ``(position, rate, acceleration)`` tuple at time ``t``."""
    return trapezoid_kernel(p.distance, p.total_time, p.accel_time, float(t))


@dataclass(frozen=True, eq=False)
class PoseTrajectory:
    """Straight-chord translation and fixed-axis slew sharing one unit profile.

    ``profile.distance`` is ignored; the path parameter runs from 0 to 1.
    """

    start: RigidBodyState
    goal: RigidBodyState
    profile: TrapezoidProfile

    @property
    def slew_vector(self) -> np.ndarray:
        """Inertial rotation vector taking the start attitude to the goal."""
        return quat_log(quat_mul(self.goal.attitude.q, quat_conj(self.start.attitude.q)))


@njit(cache=True)
def pose_ref_kernel(p0, p1, q0, slew, t_total, t_accel, t):
    """Reference pose with inertial rates and accelerations."""
    s, ds, dds = trapezoid_kernel(1.0, t_total, t_accel, t)
    chord = p1 - p0
    quat = quat_mul(quat_exp(slew * s), q0)
    return p0 + chord * s, quat, chord * ds, slew * ds, chord * dds, slew * dds


def pose_trajectory_eval(
    traj: PoseTrajectory, t: float
) -> tuple[RigidBodyState, np.ndarray, np.ndarray]:
    """Reference state plus inertial linear and angular feedforward accelerations."""
    pos, quat, vel, omega, acc, alpha = pose_ref_kernel(
        traj.start.position, traj.goal.position, traj.start.attitude.q, traj.slew_vector,
        traj.profile.total_time, traj.profile.accel_time, float(t),
    )
    R = quat_to_matrix(quat)
    return RigidBodyState(pos, Rotation(quat), vel, R.T @ omega), acc, alpha


def joint_trajectory_eval(
    start: EhsJointState,
    goal: EhsJointState,
    profile: TrapezoidProfile,
    t: float,
    params: ScissorParams | None = None,
) -> tuple[EhsJointState, np.ndarray]:
    """Joint reference and joint accelerations at ``t``.

    Every coordinate follows the shared unit profile between ``start`` and
    ``goal``. When ``params`` is given both endpoints are checked against the
    usable stroke.
    """
    if params is not None:
        for j in (start, goal):
            try:
                j.check(params)
            except DomainError as exc:
                raise DomainError(f"unreachable joint target: {exc}") from exc
    s, ds, dds = trapezoid_kernel(1.0, profile.total_time, profile.accel_time, float(t))
    q0, q1 = start.positions(), goal.positions()
    delta = q1 - q0
    delta[:2] = np.remainder(delta[:2] + math.pi, 2 * math.pi) - math.pi
    q = q0 + delta * s
    return EhsJointState(*q, *(delta * ds)), delta * dds


def deployment_goal(
    params: ScissorParams, pan: float, pitch: float, deployed_length: float
) -> EhsJointState:
    """Joint target that places the effector ``deployed_length`` beyond the fold."""
    x = params.folded_extension + deployed_length
    return EhsJointState(pan, pitch, actuation_from_extension(x, params))


@njit(cache=True)
def actuation_ref_kernel(y, dy, ddy, half_link, base_offset, effector_offset, pairs):
    """Extension reference (x, x', x'') from an actuation reference."""
    s2 = half_link * half_link - y * y
    s = math.sqrt(s2)
    x = effector_offset + base_offset + (2 * pairs + 3) * s
    jac = jacobian_kernel(y, half_link, pairs)
    djac = -(2 * pairs + 3) * half_link * half_link / (s2 * s)
    return x, jac * dy, jac * ddy + djac * dy * dy


@njit(cache=True)
def extension_ref_kernel(x, dx, ddx, half_link, base_offset, effector_offset, pairs):
    """Actuation reference (y, y', y'') from an extension reference."""
    ratio = (x - base_offset - effector_offset) / (2 * pairs + 3)
    y = math.sqrt(max(half_link * half_link - ratio * ratio, 0.0))
    s2 = half_link * half_link - y * y
    jac = jacobian_kernel(y, half_link, pairs)
    djac = -(2 * pairs + 3) * half_link * half_link / (s2 * math.sqrt(s2))
    dy = dx / jac
    return y, dy, (ddx - djac * dy * dy) / jac


def extension_reference(y: float, dy: float, ddy: float, p: ScissorParams) -> tuple[float, float, float]:
    """Map an actuation-space reference into extension space."""
    extension_from_actuation(y, p)
    return actuation_ref_kernel(y, dy, ddy, p.half_link_length, p.base_offset, p.effector_offset, p.pair_count)
