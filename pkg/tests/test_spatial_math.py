import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation as SciRotation

from ehsim.errors import SimulationFault
from ehsim.spatial_math import (
    RigidBodyState,
    Rotation,
    Wrench,
    euler_to_rotation,
    integrate_step,
    rotation_to_euler,
)

angle = st.floats(-math.pi, math.pi, allow_nan=False)
pitch = st.floats(-math.pi / 2 + 0.01, math.pi / 2 - 0.01, allow_nan=False)


def test_zero_euler_is_identity():
    assert np.allclose(euler_to_rotation(0, 0, 0).as_matrix(), np.eye(3), atol=0)


def test_goal_attitude_matches_intrinsic_xyz():
    rot = euler_to_rotation(math.pi / 8, -math.pi / 4, math.pi / 8)
    oracle = SciRotation.from_euler("XYZ", [math.pi / 8, -math.pi / 4, math.pi / 8]).as_matrix()
    assert np.allclose(rot.as_matrix(), oracle, atol=1e-14)


def test_half_turn_about_x_flips_y():
    v = euler_to_rotation(math.pi, 0, 0).apply([0, 1, 0])
    assert np.allclose(v, [0, -1, 0], atol=1e-15)


def test_non_finite_angle_rejected():
    with pytest.raises(ValueError):
        euler_to_rotation(math.nan, 0, 0)


@given(angle, pitch, angle)
def test_euler_matches_scipy(a, b, c):
    oracle = SciRotation.from_euler("XYZ", [a, b, c]).as_matrix()
    assert np.allclose(euler_to_rotation(a, b, c).as_matrix(), oracle, atol=1e-12)


@given(angle, pitch, angle)
def test_euler_round_trip(a, b, c):
    back = rotation_to_euler(euler_to_rotation(a, b, c))
    # alpha and gamma are only defined modulo 2 pi
    diff = np.array(back) - np.array([a, b, c])
    diff[[0, 2]] = np.remainder(diff[[0, 2]] + math.pi, 2 * math.pi) - math.pi
    assert np.all(np.abs(diff) < 1e-9)


def test_rotation_matrix_round_trip():
    rot = euler_to_rotation(0.3, -1.1, 2.9)
    assert np.allclose(Rotation.from_matrix(rot.as_matrix()).as_matrix(), rot.as_matrix(), atol=1e-14)


INERTIA = np.diag([0.6, 0.45, 0.28]) + np.array([[0, 0.02, 0], [0.02, 0, -0.01], [0, -0.01, 0]])


def test_zero_wrench_at_rest_leaves_state_unchanged():
    s0 = RigidBodyState(position=[1.0, 2.0, 3.0], attitude=euler_to_rotation(0.1, 0.2, 0.3))
    s1 = integrate_step(s0, 30.0, INERTIA, Wrench(), 0.001)
    assert np.array_equal(s1.position, s0.position)
    assert np.allclose(s1.attitude.q, s0.attitude.q, atol=1e-16)
    assert not s1.linear_velocity.any() and not s1.angular_velocity.any()


def test_constant_force_matches_parabola():
    m, f, dt, n = 30.11, np.array([0.1, -0.05, 0.02]), 0.001, 10_000
    s = RigidBodyState()
    w = Wrench(force=f)
    for _ in range(n):
        s = integrate_step(s, m, INERTIA, w, dt)
    t = n * dt
    assert np.allclose(s.linear_velocity, f * t / m, rtol=1e-9, atol=0)
    # symplectic Euler lands half a step ahead of the exact parabola
    exact = 0.5 * f / m * t * t
    assert np.allclose(s.position, exact * (1 + dt / t), rtol=1e-8, atol=0)


def test_torque_free_spin_conserves_momentum_norm():
    s = RigidBodyState(angular_velocity=[0.3, -0.2, 0.5])
    L0 = np.linalg.norm(s.attitude.apply(INERTIA @ s.angular_velocity))
    e0 = 0.5 * s.angular_velocity @ INERTIA @ s.angular_velocity
    for _ in range(100_000):
        s = integrate_step(s, 1.0, INERTIA, Wrench(), 0.001)
    L1 = np.linalg.norm(s.attitude.apply(INERTIA @ s.angular_velocity))
    e1 = 0.5 * s.angular_velocity @ INERTIA @ s.angular_velocity
    assert abs(L1 - L0) / L0 < 1e-5
    assert abs(e1 - e0) / e0 < 1e-5
    assert abs(np.linalg.norm(s.attitude.q) - 1) < 1e-9


def test_body_frame_wrench_is_rotated():
    att = euler_to_rotation(0, 0, math.pi / 2)
    s = integrate_step(RigidBodyState(attitude=att), 1.0, INERTIA, Wrench(force=[1, 0, 0], frame="body"), 1.0)
    assert np.allclose(s.linear_velocity, [0, 1, 0], atol=1e-15)


def test_non_finite_result_faults():
    with pytest.raises(SimulationFault):
        integrate_step(RigidBodyState(), 1.0, INERTIA, Wrench(force=[1e308, 0, 0]), 1e10)


def test_bad_inputs_rejected():
    with pytest.raises(ValueError):
        integrate_step(RigidBodyState(), 1.0, INERTIA, Wrench(), 0.0)
    with pytest.raises(ValueError):
        integrate_step(RigidBodyState(), 1.0, -np.eye(3), Wrench(), 0.001)
    with pytest.raises(ValueError):
        RigidBodyState(position=[math.inf, 0, 0])
