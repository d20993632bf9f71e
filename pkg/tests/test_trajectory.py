import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from ehsim.errors import DomainError
from ehsim.scissor import EhsJointState, extension_from_actuation
from ehsim.spatial_math import RigidBodyState, euler_to_rotation, rotation_to_euler
from ehsim.trajectory import (
    PoseTrajectory,
    TrapezoidProfile,
    deployment_goal,
    extension_reference,
    joint_trajectory_eval,
    pose_trajectory_eval,
    profile_eval,
)

D = math.sqrt(25**2 + 25**2 + 10**2)
PROFILE = TrapezoidProfile(D, 500.0, 153.0)
GOAL = RigidBodyState(position=[25, 25, -10], attitude=euler_to_rotation(math.pi / 8, -math.pi / 4, math.pi / 8))


def test_traverse_distance():
    assert D == pytest.approx(36.7423, abs=5e-5)


def test_zero_distance_profile():
    p = TrapezoidProfile(0.0, 10.0, 2.0)
    for t in np.linspace(-1, 11, 25):
        assert profile_eval(p, t) == (0.0, 0.0, 0.0)


def test_plateau_rate():
    assert PROFILE.plateau_rate == D / 347.0
    assert PROFILE.plateau_rate == pytest.approx(0.10588, abs=1e-5)
    assert profile_eval(PROFILE, 250.0)[1] == PROFILE.plateau_rate


def test_endpoints_and_midpoint():
    assert profile_eval(PROFILE, 0.0) == (0.0, 0.0, 0.0)
    assert profile_eval(PROFILE, 500.0) == (D, 0.0, 0.0)
    assert profile_eval(PROFILE, 250.0)[0] == pytest.approx(D / 2, rel=1e-15)


def test_clamped_outside_window():
    assert profile_eval(PROFILE, -5.0) == (0.0, 0.0, 0.0)
    assert profile_eval(PROFILE, 600.0) == (D, 0.0, 0.0)


def test_end_position_exact_just_before_T():
    pos, rate, _ = profile_eval(PROFILE, 500.0 - 1e-9)
    assert pos == pytest.approx(D, abs=1e-12)
    assert rate == pytest.approx(0.0, abs=1e-12)


def test_rate_continuous_at_knots():
    for knot in (153.0, 347.0):
        lo = profile_eval(PROFILE, knot - 1e-9)[1]
        hi = profile_eval(PROFILE, knot + 1e-9)[1]
        assert abs(hi - lo) < 1e-12


def test_rate_integrates_to_distance():
    total = quad(lambda t: profile_eval(PROFILE, t)[1], 0, 500, points=[153, 347])[0]
    assert total == pytest.approx(D, rel=1e-9)


def test_rest_to_rest_impulse_identity():
    # accelerate then decelerate: unsigned impulse 2 m v_p, net zero
    m = 30.11
    unsigned = quad(lambda t: abs(m * profile_eval(PROFILE, t)[2]), 0, 500, points=[153, 347])[0]
    net = quad(lambda t: m * profile_eval(PROFILE, t)[2], 0, 500, points=[153, 347])[0]
    assert unsigned == pytest.approx(2 * m * PROFILE.plateau_rate, rel=1e-9)
    assert abs(net) < 1e-9


def test_profile_validation():
    with pytest.raises(ValueError):
        TrapezoidProfile(1.0, 10.0, 5.0)
    with pytest.raises(ValueError):
        TrapezoidProfile(-1.0, 10.0, 2.0)


@given(
    st.floats(0.1, 100.0), st.floats(1.0, 1000.0), st.floats(0.01, 0.49),
    st.floats(0.0, 1.0), st.floats(0.0, 1.0),
)
def test_profile_bounds_and_monotone(d, total, frac, u, w):
    p = TrapezoidProfile(d, total, frac * total)
    ta, tb = sorted((u * total, w * total))
    pa, ra, aa = profile_eval(p, ta)
    pb, rb, ab = profile_eval(p, tb)
    assert pa <= pb
    assert 0 <= ra <= p.plateau_rate * (1 + 1e-12)
    assert abs(aa) <= p.accel * (1 + 1e-12)


@given(st.floats(1.0, 1000.0), st.floats(0.01, 0.49), st.floats(0.0, 1.0))
def test_profile_symmetry(total, frac, u):
    p = TrapezoidProfile(1.0, total, frac * total)
    t = u * total
    a, ra, _ = profile_eval(p, t)
    b, rb, _ = profile_eval(p, total - t)
    assert a + b == pytest.approx(1.0, abs=1e-12)
    assert ra == pytest.approx(rb, rel=1e-9, abs=1e-15)


def test_pose_trajectory_endpoints():
    traj = PoseTrajectory(RigidBodyState(), GOAL, PROFILE)
    ref, acc, alpha = pose_trajectory_eval(traj, 0.0)
    assert not ref.position.any() and not ref.linear_velocity.any()
    assert np.allclose(ref.attitude.as_matrix(), np.eye(3))
    ref, acc, alpha = pose_trajectory_eval(traj, 500.0)
    assert np.allclose(ref.position, [25, 25, -10], atol=1e-12)
    assert np.allclose(rotation_to_euler(ref.attitude), [math.pi / 8, -math.pi / 4, math.pi / 8], atol=1e-12)
    assert not ref.linear_velocity.any() and not ref.angular_velocity.any()
    assert not acc.any() and not alpha.any()


def test_pose_trajectory_midpoint():
    traj = PoseTrajectory(RigidBodyState(), GOAL, PROFILE)
    ref, _, _ = pose_trajectory_eval(traj, 250.0)
    assert np.allclose(ref.position, [12.5, 12.5, -5], atol=1e-12)
    # slew about a fixed axis: halfway in angle
    assert RigidBodyState().attitude.angle_to(ref.attitude) == pytest.approx(
        0.5 * RigidBodyState().attitude.angle_to(GOAL.attitude), rel=1e-12)


def test_pose_velocity_is_chord_direction():
    traj = PoseTrajectory(RigidBodyState(), GOAL, PROFILE)
    ref, _, _ = pose_trajectory_eval(traj, 100.0)
    v = ref.linear_velocity
    assert np.allclose(v / np.linalg.norm(v), np.array([25, 25, -10]) / D)


def test_joint_trajectory_constant_when_start_is_goal(params):
    j = EhsJointState(0.5, 0.1, 0.1)
    for t in (0.0, 50.0, 200.0):
        ref, acc = joint_trajectory_eval(j, j, TrapezoidProfile(1.0, 200.0, 40.0), t, params)
        assert np.array_equal(ref.positions(), j.positions())
        assert not ref.rates().any() and not acc.any()


def test_joint_trajectory_deployment(params):
    start = EhsJointState(actuation=params.y_max)
    goal = deployment_goal(params, math.radians(135), 0.0, 4.5)
    prof = TrapezoidProfile(1.0, 200.0, 40.0)
    mid, _ = joint_trajectory_eval(start, goal, prof, 100.0, params)
    assert math.degrees(mid.pan) == pytest.approx(67.5, rel=1e-12)
    end, _ = joint_trajectory_eval(start, goal, prof, 200.0, params)
    assert math.degrees(end.pan) == pytest.approx(135.0, rel=1e-12)
    assert extension_from_actuation(end.actuation, params) == pytest.approx(4.6, abs=1e-12)


def test_joint_trajectory_unreachable_goal(params):
    with pytest.raises(DomainError):
        joint_trajectory_eval(EhsJointState(actuation=0.1), EhsJointState(actuation=0.0),
                              TrapezoidProfile(1.0, 10.0, 2.0), 1.0, params)
    with pytest.raises(DomainError):
        deployment_goal(params, 0.0, 0.0, 6.0)


def test_extension_reference_chain_rule(params):
    y, dy, ddy = 0.1, -1e-3, 2e-4
    h = 1e-4

    def x_of(t):
        return extension_from_actuation(y + dy * t + 0.5 * ddy * t * t, params)

    x, dx, ddx = extension_reference(y, dy, ddy, params)
    assert x == x_of(0.0)
    assert dx == pytest.approx((x_of(h) - x_of(-h)) / (2 * h), rel=1e-7)
    assert ddx == pytest.approx((x_of(h) - 2 * x + x_of(-h)) / h**2, rel=1e-4)
