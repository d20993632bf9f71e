"""Lumped-mass model of the deploying hook system.

Each hook system is reduced to point masses in its boom frame, every one of
the form ``(a0 + a1 * s(y), b * y, 0)`` with ``s(y) = sqrt(L_L**2 - y**2)``:

* one mass per crossing pair at ``L_B + (2k - 1) s`` (both links of the pair
  share their midpoint pivot), carrying the link share of the total;
* the actuation carriage at lateral offset ``y`` on the boom root;
* the end effector at ``x(y)``.

Transverse link offsets cancel pairwise, so this keeps the axial momentum
exchange exact without a per-link rigid body. The compiled
:func:`system_terms` builds the free-floating mass matrix and velocity-product
terms for the base plus every hook system in generalized velocities
``nu = [v_base (inertial), omega (inertial), pan', pitch', y', ...]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .scissor import (
    EhsJointState,
    MountFrame,
    ScissorParams,
    axial_half_span,
    boom_rotation,
    extension_from_actuation,
)
from .spatial_math import RigidBodyState, Wrench, cross, quat_to_matrix


@dataclass(frozen=True)
class EhsMassModel:
    """Mass budget of one hook system.

    The fractions split ``total_mass`` between the links (shared equally by
    the crossing pivots), the actuation carriage and the end effector.
    """

    total_mass: float = 2.41
    link_fraction: float = 0.85
    bar_fraction: float = 0.10
    effector_fraction: float = 0.05

    def __post_init__(self):
        fr = (self.link_fraction, self.bar_fraction, self.effector_fraction)
        if self.total_mass < 0 or any(f < 0 for f in fr):
            raise ValueError("masses and fractions must be non-negative")
        if abs(sum(fr) - 1.0) > 1e-12:
            raise ValueError(f"mass fractions must sum to 1, got {sum(fr)}")

    def point_masses(self, p: ScissorParams) -> np.ndarray:
        """Masses ordered as in :func:`point_layout`: pivots, carriage, effector."""
        pivot = self.total_mass * self.link_fraction / p.pair_count
        return np.array(
            [pivot] * p.pair_count
            + [self.total_mass * self.bar_fraction, self.total_mass * self.effector_fraction]
        )


@dataclass(frozen=True, eq=False)
class PointLayout:
    """Per-point coefficients of the boom-frame position ``(a0 + a1 s, b y, 0)``."""

    mass: np.ndarray
    a0: np.ndarray
    a1: np.ndarray
    b: np.ndarray


def point_layout(p: ScissorParams, model: EhsMassModel) -> PointLayout:
    n = p.pair_count
    k = np.arange(1, n + 1, dtype=np.float64)
    a0 = np.concatenate([np.full(n, p.base_offset), [0.0, p.base_offset + p.effector_offset]])
    a1 = np.concatenate([2.0 * k - 1.0, [0.0, 2.0 * n + 3.0]])
    b = np.concatenate([np.zeros(n), [1.0, 0.0]])
    return PointLayout(model.point_masses(p), a0, a1, b)


@dataclass(frozen=True, eq=False)
class EhsDynamicState:
    """Joint state of one mounted hook system plus the data to place its masses."""

    joints: EhsJointState
    params: ScissorParams
    mount: MountFrame = field(default_factory=MountFrame)

    def point_positions(self, model: EhsMassModel, base: RigidBodyState) -> np.ndarray:
        """Inertial positions of the lumped masses, shape (n, 3)."""
        lay = point_layout(self.params, model)
        s = axial_half_span(self.joints.actuation, self.params.half_link_length)
        local = np.stack(
            [lay.a0 + lay.a1 * s, lay.b * self.joints.actuation, np.zeros_like(lay.a0)], axis=1
        )
        boom = boom_rotation(self.joints.pan, self.joints.pitch)
        r_m = self.mount.rotation.as_matrix()
        r_b = base.attitude.as_matrix()
        body = self.mount.position + local @ (r_m @ boom).T
        return base.position + body @ r_b.T


def link_stations(joints: EhsJointState, p: ScissorParams) -> np.ndarray:
    """Axial pivot stations ``L_B + 2k s`` for k = 0..N, then the effector station."""
    x = extension_from_actuation(joints.actuation, p)
    s = axial_half_span(joints.actuation, p.half_link_length)
    k = np.arange(p.pair_count + 1, dtype=np.float64)
    return np.concatenate([p.base_offset + 2.0 * k * s, [x]])


# ---------------------------------------------------------------------------
# Compiled multibody terms
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _cr(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


@njit(cache=True, inline="always")
def _lin(ca, a, cb, b):
    return (ca * a[0] + cb * b[0], ca * a[1] + cb * b[1], ca * a[2] + cb * b[2])


@njit(cache=True, inline="always")
def _add(a, b):
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


@njit(cache=True, inline="always")
def _col(A, j):
    return (A[0, j], A[1, j], A[2, j])


@njit(cache=True)
def _mat3(A, B):
    C = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            C[i, j] = A[i, 0] * B[0, j] + A[i, 1] * B[1, j] + A[i, 2] * B[2, j]
    return C


@njit(cache=True)
def system_terms(
    xb, quat, vb, omega, joints, rates,
    mass, a0, a1, b, half_link,
    base_mass, base_inertia, mount_pos, mount_rot,
):
    """Mass matrix, velocity-product vector and momenta of the whole system.

    ``omega`` is the inertial angular velocity of the base. Returns
    ``(M, h, P, L, smr)`` where ``M nu' + h`` equals the generalized forces,
    ``P`` is total linear momentum, ``L`` angular momentum about the base
    centre of mass and ``smr`` the mass-weighted sum of hook point offsets
    from the base centre of mass (inertial). Setting ``base_mass`` to zero
    and ``base_inertia`` to zeros yields the hook-system-only terms.
    """
    n_units = joints.shape[0]
    ndof = 6 + 3 * n_units
    M = np.zeros((ndof, ndof))
    h = np.zeros(ndof)
    P = np.zeros(3)
    L = np.zeros(3)
    smr = np.zeros(3)
    R = quat_to_matrix(quat)
    w_b = (omega[0], omega[1], omega[2])
    v_b = (vb[0], vb[1], vb[2])
    jl = np.zeros((3, 9))
    idx = np.zeros(9, dtype=np.int64)
    for c in range(6):
        idx[c] = c
    for c in range(3):
        jl[c, c] = 1.0

    # every point sits at mount + alpha e1 + beta e2, with e1, e2 the inertial
    # images of the boom x and y axes
    for u in range(n_units):
        pan, pitch, y = joints[u, 0], joints[u, 1], joints[u, 2]
        dpan, dpitch, dy = rates[u, 0], rates[u, 1], rates[u, 2]
        for c in range(3):
            idx[6 + c] = 6 + 3 * u + c
        s = math.sqrt(half_link * half_link - y * y)
        ds = -y / s
        dds = -half_link * half_link / (s * s * s)
        RM = _mat3(R, mount_rot[u])
        RB = _mat3(RM, boom_rotation(pan, pitch))
        e1 = _col(RB, 0)
        e2 = _col(RB, 1)
        ax1 = _col(RM, 2)
        ax2 = _lin(-math.sin(pan), _col(RM, 0), math.cos(pan), _col(RM, 1))
        omg_rel = _lin(dpan, ax1, dpitch, ax2)
        domg_bias = _lin(dpan * dpitch, _cr(ax1, ax2), 0.0, ax2)
        mp = (
            R[0, 0] * mount_pos[u, 0] + R[0, 1] * mount_pos[u, 1] + R[0, 2] * mount_pos[u, 2],
            R[1, 0] * mount_pos[u, 0] + R[1, 1] * mount_pos[u, 1] + R[1, 2] * mount_pos[u, 2],
            R[2, 0] * mount_pos[u, 0] + R[2, 1] * mount_pos[u, 1] + R[2, 2] * mount_pos[u, 2],
        )

        for i in range(mass.shape[0]):
            m = mass[i]
            w = _lin(a0[i] + a1[i] * s, e1, b[i] * y, e2)
            du = _lin(a1[i] * ds, e1, b[i], e2)
            uvel = _lin(dy, du, 0.0, du)
            wdot = _add(_cr(omg_rel, w), uvel)
            wdd = _add(
                _add(_cr(domg_bias, w), _cr(omg_rel, wdot)),
                _add(_cr(omg_rel, uvel), _lin(a1[i] * dds * dy * dy, e1, 0.0, e1)),
            )
            rho = _add(mp, w)
            vel = _add(_add(v_b, _cr(w_b, rho)), wdot)
            acc0 = _add(_add(_cr(w_b, _cr(w_b, rho)), _lin(2.0, _cr(w_b, wdot), 0.0, wdot)), wdd)

            # columns 3..5 are e_c x rho
            jl[0, 3], jl[1, 3], jl[2, 3] = 0.0, -rho[2], rho[1]
            jl[0, 4], jl[1, 4], jl[2, 4] = rho[2], 0.0, -rho[0]
            jl[0, 5], jl[1, 5], jl[2, 5] = -rho[1], rho[0], 0.0
            jl[0, 6], jl[1, 6], jl[2, 6] = _cr(ax1, w)
            jl[0, 7], jl[1, 7], jl[2, 7] = _cr(ax2, w)
            jl[0, 8], jl[1, 8], jl[2, 8] = du

            for r in range(9):
                h[idx[r]] += m * (jl[0, r] * acc0[0] + jl[1, r] * acc0[1] + jl[2, r] * acc0[2])
                for c in range(r, 9):
                    M[idx[r], idx[c]] += m * (
                        jl[0, r] * jl[0, c] + jl[1, r] * jl[1, c] + jl[2, r] * jl[2, c]
                    )
            lm = _cr(rho, vel)
            for k in range(3):
                P[k] += m * vel[k]
                L[k] += m * lm[k]
                smr[k] += m * rho[k]

    for r in range(ndof):
        for c in range(r):
            M[r, c] = M[c, r]
    Iw = _mat3(_mat3(R, base_inertia), R.T)
    Iw_omega = Iw @ omega
    for r in range(3):
        M[r, r] += base_mass
        for c in range(3):
            M[3 + r, 3 + c] += Iw[r, c]
    h[3:6] += cross(omega, Iw_omega)
    P += base_mass * vb
    L += Iw_omega
    return M, h, P, L, smr


@njit(cache=True)
def point_kinematics_kernel(xb, quat, vb, omega, joint, rate, a0, a1, b, half_link, mount_pos, mount_rot):
    """Inertial positions and velocities of one unit's points (omega inertial)."""
    n = a0.shape[0]
    pos = np.empty((n, 3))
    vel = np.empty((n, 3))
    R = quat_to_matrix(quat)
    pan, pitch, y = joint[0], joint[1], joint[2]
    s = math.sqrt(half_link * half_link - y * y)
    ds = -y / s
    B = boom_rotation(pan, pitch)
    a2 = np.array([-math.sin(pan), math.cos(pan), 0.0])
    omg_rel = rate[0] * np.array([0.0, 0.0, 1.0]) + rate[1] * a2
    RM = R @ mount_rot
    for i in range(n):
        w = B @ np.array([a0[i] + a1[i] * s, b[i] * y, 0.0])
        wdot = cross(omg_rel, w) + (B @ np.array([a1[i] * ds, b[i], 0.0])) * rate[2]
        rho = R @ mount_pos + RM @ w
        pos[i] = xb + rho
        vel[i] = vb + cross(omega, rho) + RM @ wdot
    return pos, vel


# ---------------------------------------------------------------------------
# Python-level operations
# ---------------------------------------------------------------------------


def _unit_args(state: EhsDynamicState, model: EhsMassModel):
    lay = point_layout(state.params, model)
    return lay, state.mount.position, state.mount.rotation.as_matrix()


def _omega_inertial(base: RigidBodyState) -> np.ndarray:
    return base.attitude.as_matrix() @ base.angular_velocity


def point_kinematics(
    state: EhsDynamicState, model: EhsMassModel, base: RigidBodyState
) -> tuple[np.ndarray, np.ndarray]:
    """Inertial positions and velocities of every lumped mass."""
    state.joints.check(state.params)
    lay, mpos, mrot = _unit_args(state, model)
    return point_kinematics_kernel(
        base.position, base.attitude.q, base.linear_velocity, _omega_inertial(base),
        state.joints.positions(), state.joints.rates(),
        lay.a0, lay.a1, lay.b, state.params.half_link_length, mpos, mrot,
    )


def ehs_momentum(
    state: EhsDynamicState, model: EhsMassModel, base: RigidBodyState
) -> tuple[np.ndarray, np.ndarray]:
    """Linear momentum and angular momentum about the base centre of mass."""
    pos, vel = point_kinematics(state, model, base)
    m = model.point_masses(state.params)[:, None]
    lin = (m * vel).sum(axis=0)
    ang = np.cross(pos - base.position, m * vel).sum(axis=0)
    return lin, ang


def _ehs_terms(state, model, base):
    lay, mpos, mrot = _unit_args(state, model)
    return system_terms(
        base.position, base.attitude.q, base.linear_velocity, _omega_inertial(base),
        state.joints.positions()[None, :], state.joints.rates()[None, :],
        lay.mass, lay.a0, lay.a1, lay.b, state.params.half_link_length,
        0.0, np.zeros((3, 3)), mpos[None, :], mrot[None, :, :],
    )


def reaction_wrench(
    state: EhsDynamicState,
    joint_accels,
    model: EhsMassModel,
    base: RigidBodyState,
) -> Wrench:
    """Wrench the moving hook system exerts on the base (body frame).

    The base is taken as non-accelerating at its current twist, so this is
    minus the rate of change of hook momentum (torque about the base centre of
    mass). The base must supply the opposite wrench to hold its course.
    """
    state.joints.check(state.params)
    M, h, _, _, _ = _ehs_terms(state, model, base)
    qdd = np.asarray(joint_accels, dtype=np.float64).reshape(3)
    gen = M[:6, 6:9] @ qdd + h[:6]
    # rows 0-2 give d/dt of hook linear momentum; rows 3-5 its moment about the
    # base centre, which for a non-accelerating base equals the mount torque
    rt = base.attitude.as_matrix().T
    return Wrench(-(rt @ gen[:3]), -(rt @ gen[3:6]), "body")


def composite_inertia(
    state: EhsDynamicState,
    model: EhsMassModel,
    base_mass: float,
    base_inertia,
) -> np.ndarray:
    """Inertia of base plus hook masses about the combined centre of mass, body frame."""
    base = RigidBodyState()
    pos, _ = point_kinematics(state, model, base)
    m = model.point_masses(state.params)
    total = base_mass + m.sum()
    com = (m[:, None] * pos).sum(axis=0) / total
    out = np.array(base_inertia, dtype=np.float64).copy()
    d0 = -com
    out += base_mass * (d0 @ d0 * np.eye(3) - np.outer(d0, d0))
    for mi, p in zip(m, pos):
        d = p - com
        out += mi * (d @ d * np.eye(3) - np.outer(d, d))
    return out
