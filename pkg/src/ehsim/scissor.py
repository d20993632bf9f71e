"""Scissor boom geometry and kinematics.

The boom is a pantograph of ``N`` crossing link pairs. A prismatic joint on
the actuation bar sets the transverse coordinate ``y``; the end effector sits
at axial distance

    x(y) = L_E + L_B + (2N + 3) * sqrt(L_L**2 - y**2)

from the boom root. ``y = L_L`` is the folded stack, ``y = 0`` full extension.

The boom frame: +x along the boom axis, +y along the actuation bar. The boom
frame is carried by two revolute joints on the mount: ``pan`` about the mount
+z (its normal), then ``pitch`` about the panned +y axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import CalibrationError, DomainError, SingularityError
from .spatial_math import RigidBodyState, Rotation, quat_to_matrix, vec3

# fraction of L_L kept clear of each end of the stroke
Y_MIN_FRACTION = 0.005
Y_MAX_FRACTION = 0.995


@njit(cache=True)
def axial_half_span(y, half_link):
    d = half_link * half_link - y * y
    return math.sqrt(d) if d > 0.0 else 0.0


@njit(cache=True)
def extension_kernel(y, half_link, base_offset, effector_offset, pairs):
    return effector_offset + base_offset + (2 * pairs + 3) * axial_half_span(y, half_link)


@njit(cache=True)
def jacobian_kernel(y, half_link, pairs):
    return -(2 * pairs + 3) * y / math.sqrt(half_link * half_link - y * y)


@njit(cache=True)
def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@njit(cache=True)
def rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@njit(cache=True)
def boom_rotation(pan, pitch):
    """Boom frame orientation relative to the mount frame."""
    return rot_z(pan) @ rot_y(pitch)


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class ScissorParams:
    half_link_length: float
    base_offset: float
    effector_offset: float
    pair_count: int

    def __post_init__(self):
        for name in ("half_link_length", "base_offset", "effector_offset"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if int(self.pair_count) != self.pair_count or self.pair_count < 1:
            raise ValueError(f"pair_count must be a positive integer, got {self.pair_count}")
        object.__setattr__(self, "pair_count", int(self.pair_count))

    @property
    def folded_extension(self) -> float:
        return self.effector_offset + self.base_offset

    @property
    def max_extension(self) -> float:
        return extension_from_actuation(0.0, self)

    @property
    def y_min(self) -> float:
        return Y_MIN_FRACTION * self.half_link_length

    @property
    def y_max(self) -> float:
        return Y_MAX_FRACTION * self.half_link_length

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.half_link_length, self.base_offset, self.effector_offset, float(self.pair_count)]
        )


@dataclass(frozen=True)
class EhsJointState:
    """Joint coordinates of one hook system: pan, pitch (rad) and actuation y (m)."""

    pan: float = 0.0
    pitch: float = 0.0
    actuation: float = 0.0
    pan_rate: float = 0.0
    pitch_rate: float = 0.0
    actuation_rate: float = 0.0

    def __post_init__(self):
        for name in ("pan", "pitch", "actuation", "pan_rate", "pitch_rate", "actuation_rate"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "pan", wrap_angle(self.pan))
        object.__setattr__(self, "pitch", wrap_angle(self.pitch))

    @classmethod
    def folded(cls, params: ScissorParams) -> "EhsJointState":
        return cls(actuation=params.y_max)

    def positions(self) -> np.ndarray:
        return np.array([self.pan, self.pitch, self.actuation])

    def rates(self) -> np.ndarray:
        return np.array([self.pan_rate, self.pitch_rate, self.actuation_rate])

    def check(self, params: ScissorParams) -> None:
        """Raise :class:`DomainError` unless y lies in the usable stroke."""
        if not params.y_min - 1e-12 <= self.actuation <= params.y_max + 1e-12:
            raise DomainError(
                f"actuation y={self.actuation} outside [{params.y_min}, {params.y_max}]"
            )


@dataclass(frozen=True, eq=False)
class MountFrame:
    """Pose of a hook system's root on the cubesat body (body frame)."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: Rotation = field(default_factory=Rotation)

    def __post_init__(self):
        object.__setattr__(self, "position", vec3(self.position))


def extension_from_actuation(y: float, p: ScissorParams) -> float:
    """End-effector distance from the actuation bar for actuation ``y``."""
    if not 0.0 <= y <= p.half_link_length:
        raise DomainError(f"y={y} outside [0, {p.half_link_length}]")
    return float(
        extension_kernel(y, p.half_link_length, p.base_offset, p.effector_offset, p.pair_count)
    )


def actuation_from_extension(x: float, p: ScissorParams) -> float:
    """Inverse of :func:`extension_from_actuation`."""
    lo, hi = p.folded_extension, p.max_extension
    if not lo <= x <= hi:
        raise DomainError(f"extension {x} m outside reachable range [{lo}, {hi}]")
    ratio = (x - lo) / (2 * p.pair_count + 3)
    return math.sqrt(max(p.half_link_length**2 - ratio * ratio, 0.0))


def extension_jacobian(y: float, p: ScissorParams) -> float:
    """dx/dy, non-positive, unbounded at the fold ``y = L_L``."""
    if y == p.half_link_length:
        raise SingularityError("extension Jacobian is unbounded at the folded configuration")
    if not 0.0 <= y < p.half_link_length:
        raise DomainError(f"y={y} outside [0, {p.half_link_length})")
    return float(jacobian_kernel(y, p.half_link_length, p.pair_count))


def end_effector_pose(
    joints: EhsJointState,
    p: ScissorParams,
    mount: MountFrame | None = None,
    base: RigidBodyState | None = None,
) -> tuple[np.ndarray, Rotation]:
    """Inertial position and orientation of the end effector.

    Composition: base pose, mount, pan, pitch, then a translation of
    ``extension_from_actuation(y)`` along the boom axis.
    """
    mount = mount or MountFrame()
    base = base or RigidBodyState()
    x = extension_from_actuation(joints.actuation, p)
    boom = boom_rotation(joints.pan, joints.pitch)
    r_base = quat_to_matrix(base.attitude.q)
    r_mount = quat_to_matrix(mount.rotation.q)
    local = boom @ np.array([x, 0.0, 0.0])
    pos = base.position + r_base @ (mount.position + r_mount @ local)
    orient = base.attitude * mount.rotation * Rotation.from_matrix(boom)
    return pos, orient


def calibrate_from_envelope(
    max_extension: float, link_count: int, mount_clearance: float
) -> ScissorParams:
    """Solve link geometry so full extension equals ``max_extension``.

    ``link_count`` counts individual links, two per crossing pair. The
    clearance budget is split evenly between the root and effector offsets.
    """
    if link_count < 4 or link_count % 2:
        raise CalibrationError(f"link_count must be even and >= 4, got {link_count}")
    if not mount_clearance > 0:
        raise CalibrationError("mount_clearance must be positive")
    pairs = link_count // 2
    half_link = (max_extension - mount_clearance) / (2 * pairs + 3)
    if not half_link > 0:
        raise CalibrationError(
            f"max_extension {max_extension} m leaves no room beyond clearance {mount_clearance} m"
        )
    half_offset = mount_clearance / 2.0
    return ScissorParams(half_link, half_offset, half_offset, pairs)
