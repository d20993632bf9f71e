import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from ehsim.ehs_dynamics import (
    EhsDynamicState,
    EhsMassModel,
    composite_inertia,
    ehs_momentum,
    link_stations,
    point_kinematics_kernel,
    point_layout,
    reaction_wrench,
    system_terms,
)
from ehsim.scissor import EhsJointState, MountFrame, ScissorParams, extension_from_actuation
from ehsim.spatial_math import RigidBodyState, euler_to_rotation, quat_exp, quat_mul, quat_to_matrix
from ehsim.trajectory import TrapezoidProfile, joint_trajectory_eval
from ehsim.vehicle import derive_box_inertia

MODEL = EhsMassModel()
MOUNT = MountFrame(np.array([0.1, -0.05, 0.2]), euler_to_rotation(-math.pi / 2, 0.0, -math.pi / 2))


def test_point_masses_sum_to_total(params):
    m = MODEL.point_masses(params)
    assert len(m) == params.pair_count + 2
    assert m.sum() == pytest.approx(2.41, rel=1e-15)
    assert np.all(m > 0)


def test_mass_fractions_must_sum_to_one():
    with pytest.raises(ValueError):
        EhsMassModel(link_fraction=0.9)


def test_stations_folded(params):
    st_ = link_stations(EhsJointState(actuation=params.half_link_length), params)
    assert np.allclose(st_[:-1], params.base_offset, atol=1e-15)
    assert st_[-1] == pytest.approx(params.folded_extension)


def test_stations_fully_extended(params):
    st_ = link_stations(EhsJointState(actuation=0.0), params)
    assert np.allclose(np.diff(st_[:-1]), 2 * params.half_link_length, rtol=1e-14)
    assert st_[-1] == pytest.approx(5.026)


def test_station_spacing_hand_value():
    p = ScissorParams(0.1, 0.05, 0.05, 2)
    st_ = link_stations(EhsJointState(actuation=0.06), p)
    assert len(st_) == 4
    assert np.allclose(np.diff(st_[:-1]), 0.16, rtol=1e-14)


def test_pivots_lie_on_their_stations(params):
    joints = EhsJointState(actuation=0.07)
    pos = EhsDynamicState(joints, params).point_positions(MODEL, RigidBodyState())
    stations = link_stations(joints, params)
    # each pivot sits midway between consecutive stations, on the boom axis
    assert np.allclose(pos[: params.pair_count, 0], 0.5 * (stations[:-2] + stations[1:-1]), atol=1e-15)
    assert np.allclose(pos[: params.pair_count, 1:], 0.0)
    assert pos[-1, 0] == pytest.approx(stations[-1])


def test_momentum_zero_at_rest(params):
    state = EhsDynamicState(EhsJointState(0.3, -0.2, 0.08), params, MOUNT)
    lin, ang = ehs_momentum(state, MODEL, RigidBodyState())
    assert not lin.any() and not ang.any()


def test_momentum_of_rigid_transport(params):
    v = np.array([0.2, -0.1, 0.05])
    state = EhsDynamicState(EhsJointState(0.3, -0.2, 0.08), params, MOUNT)
    lin, _ = ehs_momentum(state, MODEL, RigidBodyState(linear_velocity=v))
    assert np.allclose(lin, MODEL.total_mass * v, rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(
    st.floats(-3, 3), st.floats(-1.5, 1.5), st.floats(0.05, 0.9),
    st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1),
)
def test_momentum_matches_finite_difference(pan, pitch, frac, dpan, dpitch, dy):
    direction = np.array([dpan, dpitch, dy])
    if np.linalg.norm(direction) < 1e-3:
        return
    p = ScissorParams(0.182444, 0.05, 0.05, 12)
    base = RigidBodyState(position=[1.0, 2.0, -1.0], attitude=euler_to_rotation(0.2, 0.4, -0.6))
    q = np.array([pan, pitch, frac * p.half_link_length])
    # momentum is linear in the rates, so a fixed magnitude keeps the difference quotient well conditioned
    qd = direction / np.linalg.norm(direction) * np.array([0.1, 0.1, 0.01])
    m = MODEL.point_masses(p)

    def positions(t):
        j = EhsJointState(*(q + qd * t))
        return EhsDynamicState(j, p, MOUNT).point_positions(MODEL, base)

    h = 1e-5
    vel = (positions(h) - positions(-h)) / (2 * h)
    lin, ang = ehs_momentum(EhsDynamicState(EhsJointState(*q, *qd), p, MOUNT), MODEL, base)
    lin_fd = (m[:, None] * vel).sum(axis=0)
    ang_fd = np.cross(positions(0.0) - base.position, m[:, None] * vel).sum(axis=0)
    scale = max(np.linalg.norm(lin_fd), 1e-12)
    assert np.linalg.norm(lin - lin_fd) <= 1e-6 * scale + 1e-12
    assert np.linalg.norm(ang - ang_fd) <= 1e-6 * max(np.linalg.norm(ang_fd), 1e-12) + 1e-12


def _oracle_terms(xb, q, vb, om, joint, rate, args):
    """Mass matrix from velocity columns and bias from a numerical time derivative."""
    mass, a0, a1, b, hl, bm, bi, mp, mr = args

    def vel(xb, q, vb, om, joint, rate):
        return point_kinematics_kernel(xb, q, vb, om, joint, rate, a0, a1, b, hl, mp[0], mr[0])[1]

    cols = []
    for k in range(9):
        e = np.zeros(9)
        e[k] = 1.0
        cols.append(vel(xb, q, e[:3], e[3:6], joint, e[6:]))
    jac = np.stack(cols, axis=2)
    M = np.einsum("i,iak,ial->kl", mass, jac, jac)
    R = quat_to_matrix(q)
    Iw = R @ bi @ R.T
    M[:3, :3] += bm * np.eye(3)
    M[3:6, 3:6] += Iw
    eps = 1e-6

    def advanced(s):
        return vel(xb + vb * s, quat_mul(quat_exp(om * s), q), vb, om, joint + rate * s, rate)

    acc = (advanced(eps) - advanced(-eps)) / (2 * eps)
    h = np.einsum("i,iak,ia->k", mass, jac, acc)
    h[3:6] += np.cross(om, Iw @ om)
    return M, h


def test_system_terms_match_oracle(params):
    rng = np.random.default_rng(1)
    lay = point_layout(params, MODEL)
    bi = derive_box_inertia(27.7, (0.2463, 0.2463, 0.454))
    args = (lay.mass, lay.a0, lay.a1, lay.b, params.half_link_length, 27.7, bi,
            MOUNT.position[None, :], MOUNT.rotation.as_matrix()[None, :, :])
    for _ in range(5):
        xb = rng.normal(size=3)
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        vb, om = rng.normal(size=3) * 0.1, rng.normal(size=3) * 0.1
        joint = np.array([rng.uniform(-3, 3), rng.uniform(-1.5, 1.5), rng.uniform(0.02, 0.17)])
        rate = rng.normal(size=3) * 0.05
        M, h, P, L, _ = system_terms(xb, q, vb, om, joint[None], rate[None], *args)
        Mo, ho = _oracle_terms(xb, q, vb, om, joint, rate, args)
        assert np.abs(M - Mo).max() < 1e-10
        assert np.allclose(M, M.T, atol=0)
        assert np.all(np.linalg.eigvalsh(M) > 0)
        assert np.abs(h - ho).max() < 1e-7 * max(np.abs(ho).max(), 1.0)
        nu = np.concatenate([vb, om, rate])
        # momentum is the first six rows of M nu
        assert np.allclose(P, (M @ nu)[:3], atol=1e-12)


def test_reaction_wrench_zero_at_rest(params):
    state = EhsDynamicState(EhsJointState(0.3, 0.1, 0.09), params, MOUNT)
    w = reaction_wrench(state, np.zeros(3), MODEL, RigidBodyState())
    assert np.allclose(w.force, 0, atol=1e-15) and np.allclose(w.torque, 0, atol=1e-15)
    assert w.frame == "body"


def test_reaction_force_opposes_effector_acceleration(params):
    # pure deployment acceleration pushes the hook outward along +x; the base is pushed back
    state = EhsDynamicState(EhsJointState(actuation=0.09), params)
    w = reaction_wrench(state, [0.0, 0.0, -1e-3], MODEL, RigidBodyState())
    assert w.force[0] < 0
    # the carriage rides at lateral offset y, so its acceleration shows up on y
    assert w.force[1] == pytest.approx(MODEL.total_mass * MODEL.bar_fraction * 1e-3, rel=1e-12)
    assert abs(w.force[2]) < 1e-15


def test_reaction_force_integrates_to_zero(params):
    start = EhsJointState(0.0, 0.0, params.y_max)
    goal = EhsJointState(math.radians(135), 0.0, 0.05)
    prof = TrapezoidProfile(1.0, 20.0, 4.0)

    def force(t, axis):
        ref, acc = joint_trajectory_eval(start, goal, prof, t)
        return reaction_wrench(EhsDynamicState(ref, params), acc, MODEL, RigidBodyState()).force[axis]

    for axis in range(3):
        total = quad(force, 0.0, 20.0, args=(axis,), points=[4.0, 16.0], limit=200, epsabs=1e-12)[0]
        assert abs(total) < 1e-6


def test_composite_inertia_without_hook_mass(params):
    bi = derive_box_inertia(27.7, (0.2463, 0.2463, 0.454))
    state = EhsDynamicState(EhsJointState(actuation=0.01), params, MOUNT)
    out = composite_inertia(state, EhsMassModel(total_mass=0.0), 27.7, bi)
    assert np.array_equal(out, bi)


def _direct_sum_inertia(state, base_mass, base_inertia):
    pos = state.point_positions(MODEL, RigidBodyState())
    m = np.concatenate([[base_mass], MODEL.point_masses(state.params)])
    pts = np.vstack([np.zeros(3), pos])
    com = (m[:, None] * pts).sum(axis=0) / m.sum()
    out = base_inertia.copy()
    for mi, r in zip(m, pts - com):
        out += mi * (r @ r * np.eye(3) - np.outer(r, r))
    return out


@pytest.mark.parametrize("frac", [0.005, 0.3, 0.995])
def test_composite_inertia_direct_sum(params, frac):
    bi = derive_box_inertia(27.7, (0.2463, 0.2463, 0.454))
    state = EhsDynamicState(EhsJointState(0.4, -0.2, frac * params.half_link_length), params, MOUNT)
    out = composite_inertia(state, MODEL, 27.7, bi)
    assert np.allclose(out, _direct_sum_inertia(state, 27.7, bi), rtol=1e-12, atol=1e-14)


def test_composite_inertia_grows_with_deployment(params):
    bi = derive_box_inertia(27.7, (0.2463, 0.2463, 0.454))
    folded = composite_inertia(EhsDynamicState(EhsJointState(actuation=params.y_max), params), MODEL, 27.7, bi)
    deployed = composite_inertia(EhsDynamicState(EhsJointState(actuation=params.y_min), params), MODEL, 27.7, bi)
    # boom along x: the two transverse axes gain an order of magnitude, the boom axis barely moves
    assert deployed[1, 1] > 10 * folded[1, 1] and deployed[2, 2] > 10 * folded[2, 2]
    assert deployed[0, 0] == pytest.approx(folded[0, 0], rel=0.02)
