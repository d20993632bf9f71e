"""Vectors, rotations, wrenches and single-body integration.

Quaternions are scalar-first ``[w, x, y, z]`` and map body coordinates to
inertial coordinates. Euler triples use the intrinsic X-Y-Z sequence
(roll about body x, then pitch about the new y, then yaw about the newest z),
so ``R = Rx(alpha) @ Ry(beta) @ Rz(gamma)``.

The ``@njit`` kernels in this module are shared with the compiled
simulation loop; the dataclasses wrap them for interactive use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numba import njit

from .errors import SimulationFault

Frame = Literal["inertial", "body"]


# ---------------------------------------------------------------------------
# Compiled kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def skew(v):
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


@njit(cache=True)
def quat_mul(p, q):
    out = np.empty(4)
    out[0] = p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3]
    out[1] = p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2]
    out[2] = p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1]
    out[3] = p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0]
    return out


@njit(cache=True)
def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


@njit(cache=True)
def quat_normalize(q):
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return q / n


@njit(cache=True)
def quat_to_matrix(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    return np.array(
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    )


@njit(cache=True)
def quat_exp(v):
    """Unit quaternion of the rotation vector ``v`` (axis * angle)."""
    theta = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    out = np.empty(4)
    if theta < 1e-12:
        # second-order series keeps the map smooth through zero
        out[0] = 1.0 - theta * theta / 8.0
        out[1:] = 0.5 * v
        return quat_normalize(out)
    half = 0.5 * theta
    s = math.sin(half) / theta
    out[0] = math.cos(half)
    out[1] = s * v[0]
    out[2] = s * v[1]
    out[3] = s * v[2]
    return out


@njit(cache=True)
def quat_log(q):
    """Rotation vector of ``q``; the shorter of the two equivalent arcs."""
    w = q[0]
    v = q[1:].copy()
    if w < 0.0:
        w = -w
        v = -v
    s = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    if s < 1e-12:
        return 2.0 * v
    angle = 2.0 * math.atan2(s, w)
    return v * (angle / s)


@njit(cache=True)
def quat_rotate(q, v):
    return quat_to_matrix(q) @ v


@njit(cache=True)
def euler_xyz_to_quat(alpha, beta, gamma):
    qx = np.array([math.cos(0.5 * alpha), math.sin(0.5 * alpha), 0.0, 0.0])
    qy = np.array([math.cos(0.5 * beta), 0.0, math.sin(0.5 * beta), 0.0])
    qz = np.array([math.cos(0.5 * gamma), 0.0, 0.0, math.sin(0.5 * gamma)])
    q = quat_mul(quat_mul(qx, qy), qz)
    if q[0] < 0.0:
        q = -q
    return q


@njit(cache=True)
def quat_to_euler_xyz(q):
    r = quat_to_matrix(q)
    sb = min(1.0, max(-1.0, r[0, 2]))
    beta = math.asin(sb)
    alpha = math.atan2(-r[1, 2], r[2, 2])
    gamma = math.atan2(-r[0, 1], r[0, 0])
    return np.array([alpha, beta, gamma])


@njit(cache=True)
def rigid_step(pos, quat, vel, omega_b, mass, inertia, inertia_inv, force_i, torque_b, dt):
    """Kick-drift step for one free rigid body.

    Translation is symplectic Euler. Rotation applies the torque impulse to the
    body angular momentum, then advances torque-free motion with the implicit
    midpoint rule, which keeps both |L| and kinetic energy exact; the attitude
    is advanced with the matching Cayley increment so inertial momentum is
    preserved to rounding.
    """
    vel_new = vel + force_i * (dt / mass)
    pos_new = pos + vel_new * dt

    lb = inertia @ omega_b + torque_b * dt
    lb_new = lb.copy()
    w_mid = inertia_inv @ lb
    for _ in range(50):
        l_mid = 0.5 * (lb + lb_new)
        w_mid = inertia_inv @ l_mid
        nxt = lb - dt * cross(w_mid, l_mid)
        diff = np.abs(nxt - lb_new).max()
        lb_new = nxt
        if diff <= 1e-16 * (1.0 + np.abs(lb).max()):
            break
    l_mid = 0.5 * (lb + lb_new)
    w_mid = inertia_inv @ l_mid
    half = 0.5 * dt * w_mid
    dq = quat_normalize(np.array([1.0, half[0], half[1], half[2]]))
    quat_new = quat_normalize(quat_mul(quat, dq))
    return pos_new, quat_new, vel_new, inertia_inv @ lb_new


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


def vec3(values) -> np.ndarray:
    """Return ``values`` as a finite float64 array of shape (3,)."""
    arr = np.array(values, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite vector {arr}")
    return arr


@dataclass(frozen=True, eq=False)
class Rotation:
    """Unit quaternion attitude (scalar first, body to inertial)."""

    q: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        q = np.array(self.q, dtype=np.float64).reshape(4)
        n = np.linalg.norm(q)
        if not np.isfinite(n) or n == 0.0:
            raise ValueError("rotation quaternion must be finite and non-zero")
        object.__setattr__(self, "q", q / n)

    @classmethod
    def identity(cls) -> "Rotation":
        return cls()

    @classmethod
    def from_rotvec(cls, v) -> "Rotation":
        return cls(quat_exp(vec3(v)))

    @classmethod
    def from_matrix(cls, m) -> "Rotation":
        m = np.asarray(m, dtype=np.float64)
        # Shepperd's method, branch on the largest diagonal term
        tr = np.trace(m)
        if tr > 0:
            s = 2.0 * math.sqrt(tr + 1.0)
            q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = 2.0 * math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
            q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        elif m[1, 1] > m[2, 2]:
            s = 2.0 * math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
            q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        else:
            s = 2.0 * math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
            q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        return cls(np.array(q))

    def as_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.q)

    def as_rotvec(self) -> np.ndarray:
        return quat_log(self.q)

    def apply(self, v) -> np.ndarray:
        return quat_to_matrix(self.q) @ vec3(v)

    def inv(self) -> "Rotation":
        return Rotation(quat_conj(self.q))

    def __mul__(self, other: "Rotation") -> "Rotation":
        return Rotation(quat_mul(self.q, other.q))

    def angle_to(self, other: "Rotation") -> float:
        """Geodesic angle between two attitudes, in radians."""
        return float(np.linalg.norm(quat_log(quat_mul(other.q, quat_conj(self.q)))))


def euler_to_rotation(alpha: float, beta: float, gamma: float) -> Rotation:
    """Compose intrinsic X-Y-Z rotations by ``alpha``, ``beta``, ``gamma`` radians."""
    for a in (alpha, beta, gamma):
        if not math.isfinite(a):
            raise ValueError("Euler angles must be finite")
    return Rotation(euler_xyz_to_quat(float(alpha), float(beta), float(gamma)))


def rotation_to_euler(rot: Rotation) -> np.ndarray:
    """Inverse of :func:`euler_to_rotation`; ``beta`` lies in [-pi/2, pi/2]."""
    return quat_to_euler_xyz(rot.q)


@dataclass(frozen=True, eq=False)
class RigidBodyState:
    """Pose and twist of a rigid body.

    ``linear_velocity`` is inertial; ``angular_velocity`` is expressed in the
    body frame.
    """

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attitude: Rotation = field(default_factory=Rotation)
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("position", "linear_velocity", "angular_velocity"):
            object.__setattr__(self, name, vec3(getattr(self, name)))

    def euler(self) -> np.ndarray:
        return rotation_to_euler(self.attitude)


@dataclass(frozen=True, eq=False)
class Wrench:
    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))
    frame: Frame = "inertial"

    def __post_init__(self):
        if self.frame not in ("inertial", "body"):
            raise ValueError(f"unknown wrench frame {self.frame!r}")
        object.__setattr__(self, "force", vec3(self.force))
        object.__setattr__(self, "torque", vec3(self.torque))

    def to_inertial(self, attitude: Rotation) -> "Wrench":
        if self.frame == "inertial":
            return self
        r = attitude.as_matrix()
        return Wrench(r @ self.force, r @ self.torque, "inertial")

    def to_body(self, attitude: Rotation) -> "Wrench":
        if self.frame == "body":
            return self
        rt = attitude.as_matrix().T
        return Wrench(rt @ self.force, rt @ self.torque, "body")


def integrate_step(
    state: RigidBodyState,
    mass: float,
    inertia: np.ndarray,
    wrench: Wrench,
    dt: float,
) -> RigidBodyState:
    """Advance a single free rigid body by one fixed step ``dt``.

    Forces act at the centre of mass. Raises :class:`SimulationFault` when the
    inputs or the result are not finite.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    inertia = np.asarray(inertia, dtype=np.float64)
    if not np.allclose(inertia, inertia.T) or np.any(np.linalg.eigvalsh(inertia) <= 0):
        raise ValueError("inertia must be symmetric positive definite")
    force = wrench.to_inertial(state.attitude).force
    torque_b = wrench.to_body(state.attitude).torque
    pos, quat, vel, omega = rigid_step(
        state.position,
        state.attitude.q,
        state.linear_velocity,
        state.angular_velocity,
        float(mass),
        inertia,
        np.linalg.inv(inertia),
        force,
        torque_b,
        float(dt),
    )
    out = np.concatenate([pos, quat, vel, omega])
    if not np.all(np.isfinite(out)):
        raise SimulationFault("non-finite rigid body state")
    return RigidBodyState(pos, Rotation(quat), vel, omega)
