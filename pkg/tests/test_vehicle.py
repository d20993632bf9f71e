import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ehsim.ehs_dynamics import EhsDynamicState
from ehsim.scissor import EhsJointState, MountFrame
from ehsim.spatial_math import RigidBodyState, Wrench, euler_to_rotation
from ehsim.vehicle import (
    SAT_ACTUATION,
    SAT_FORCE,
    ActuatorLimits,
    ControlCommand,
    CoupledModel,
    VehicleConfig,
    apply_saturation,
    derive_box_inertia,
    step_coupled,
    system_momentum,
)

LIMITS = ActuatorLimits()


def test_unit_cube_inertia():
    assert np.allclose(derive_box_inertia(12.0, (1, 1, 1)), 2 * np.eye(3), atol=0)


def test_default_body_inertia():
    inertia = derive_box_inertia(27.7, (0.2463, 0.2463, 0.454))
    assert inertia[0, 0] == inertia[1, 1] == pytest.approx(0.6158, abs=5e-5)
    assert inertia[2, 2] == pytest.approx(0.2801, abs=5e-5)
    assert not (inertia - np.diag(np.diag(inertia))).any()


def test_thin_rod_limit():
    inertia = derive_box_inertia(3.0, (2.0, 0.0, 0.0))
    assert np.allclose(np.diag(inertia), [0.0, 1.0, 1.0])


def test_force_within_limit_is_untouched():
    cmd = ControlCommand(Wrench(force=[0.05, 0, 0]))
    out, flags = apply_saturation(cmd, LIMITS)
    assert np.array_equal(out.wrench.force, [0.05, 0, 0])
    assert flags == 0


def test_force_is_clamped_and_flagged():
    out, flags = apply_saturation(ControlCommand(Wrench(force=[0.5, 0, 0])), LIMITS)
    assert np.array_equal(out.wrench.force, [0.1, 0, 0])
    assert flags == SAT_FORCE[0]


def test_prismatic_effort_is_clamped_and_flagged():
    out, flags = apply_saturation(ControlCommand(joint_efforts=[[0.0, 0.0, 60.0]]), LIMITS)
    assert out.joint_efforts[0, 2] == 40.0
    assert flags == SAT_ACTUATION


def test_limits_must_be_positive():
    with pytest.raises(ValueError):
        ActuatorLimits(max_body_force=0.0)


finite = st.floats(-1e3, 1e3, allow_nan=False)
vec = st.tuples(finite, finite, finite)


@given(vec, vec, vec)
def test_saturation_bounds_and_idempotence(force, torque, effort):
    cmd = ControlCommand(Wrench(force=force, torque=torque), [effort])
    once, _ = apply_saturation(cmd, LIMITS)
    twice, flags2 = apply_saturation(once, LIMITS)
    assert np.all(np.abs(once.wrench.force) <= LIMITS.max_body_force)
    assert np.all(np.abs(once.wrench.torque) <= LIMITS.max_body_torque)
    assert np.all(np.abs(once.joint_efforts[0, :2]) <= LIMITS.max_revolute_torque)
    assert abs(once.joint_efforts[0, 2]) <= LIMITS.max_prismatic_force
    assert np.array_equal(twice.wrench.force, once.wrench.force)
    assert np.array_equal(twice.joint_efforts, once.joint_efforts)
    assert flags2 == 0
    # clamping never flips a sign
    assert np.all(np.sign(once.wrench.force) == np.sign(force))


@given(finite, finite)
def test_saturation_is_monotone(a, b):
    lo, hi = sorted((a, b))
    f_lo = apply_saturation(ControlCommand(Wrench(force=[lo, 0, 0])), LIMITS)[0].wrench.force[0]
    f_hi = apply_saturation(ControlCommand(Wrench(force=[hi, 0, 0])), LIMITS)[0].wrench.force[0]
    assert f_lo <= f_hi


@pytest.fixture(scope="module")
def model(params):
    mount = MountFrame(np.array([0.0, 0.1, 0.0]), euler_to_rotation(-math.pi / 2, 0.0, -math.pi / 2))
    return CoupledModel(VehicleConfig(mounts=(mount,)), params)


def test_total_mass(model):
    assert model.total_mass == pytest.approx(30.11)


def test_rest_stays_at_rest(model, params):
    base = RigidBodyState(position=[1.0, 2.0, 3.0], attitude=euler_to_rotation(0.1, 0.2, 0.3))
    ehs = [EhsDynamicState(EhsJointState(0.2, 0.1, 0.1), params, model.vehicle.mounts[0])]
    b1, e1, events = step_coupled(model, base, ehs, ControlCommand(joint_efforts=[[0, 0, 0]]), 0.001)
    assert np.allclose(b1.position, base.position, atol=1e-15)
    assert np.allclose(b1.attitude.q, base.attitude.q, atol=1e-15)
    assert np.allclose(b1.linear_velocity, 0, atol=1e-15)
    assert e1[0].joints.actuation == pytest.approx(0.1, abs=1e-15)
    assert events == []


def test_constant_prismatic_effort_keeps_momentum_zero(model, params):
    base = RigidBodyState()
    ehs = [EhsDynamicState(EhsJointState(0.0, 0.0, 0.15), params, model.vehicle.mounts[0])]
    cmd = ControlCommand(joint_efforts=[[0.0, 0.0, -0.05]])
    P0, L0, c0 = system_momentum(model, base, ehs)
    for _ in range(2000):
        base, ehs, _ = step_coupled(model, base, ehs, cmd, 0.001)
    P1, L1, c1 = system_momentum(model, base, ehs)
    assert ehs[0].joints.actuation < 0.15
    assert np.linalg.norm(base.linear_velocity) > 0
    assert np.linalg.norm(P1 - P0) < 1e-12
    assert np.linalg.norm(L1 - L0) < 1e-12
    assert np.linalg.norm(c1 - c0) < 1e-12


def test_free_tumble_conserves_momentum(model, params):
    base = RigidBodyState(linear_velocity=[0.01, -0.02, 0.005], angular_velocity=[0.02, 0.05, -0.03])
    ehs = [EhsDynamicState(EhsJointState(0.3, -0.4, 0.1, 0.01, -0.02, 0.001), params, model.vehicle.mounts[0])]
    cmd = ControlCommand(joint_efforts=[[0, 0, 0]])
    P0, L0, c0 = system_momentum(model, base, ehs)
    for _ in range(2000):
        base, ehs, _ = step_coupled(model, base, ehs, cmd, 0.001)
    P1, L1, c1 = system_momentum(model, base, ehs)
    assert np.linalg.norm(P1 - P0) < 1e-12
    assert np.linalg.norm(L1 - L0) < 1e-12
    assert np.allclose(c1, c0 + P0 / model.total_mass * 2.0, atol=1e-12)


def test_external_force_changes_momentum_by_impulse(model, params):
    base = RigidBodyState()
    ehs = [EhsDynamicState(EhsJointState(actuation=0.1), params, model.vehicle.mounts[0])]
    cmd = ControlCommand(Wrench(force=[0.1, 0.0, -0.05]), [[0, 0, 0]])
    for _ in range(1000):
        base, ehs, _ = step_coupled(model, base, ehs, cmd, 0.001)
    P, _, _ = system_momentum(model, base, ehs)
    assert np.allclose(P, [0.1, 0.0, -0.05], rtol=1e-12, atol=1e-15)


def test_stroke_stop_clamps_and_reports(model, params):
    ehs = [EhsDynamicState(EhsJointState(0.0, 0.0, params.y_min, 0.0, 0.0, -0.01), params, model.vehicle.mounts[0])]
    _, e1, events = step_coupled(model, RigidBodyState(), ehs, ControlCommand(joint_efforts=[[0, 0, 0]]), 0.01)
    assert e1[0].joints.actuation == params.y_min
    assert e1[0].joints.actuation_rate == 0.0
    assert events == ["unit 0: actuation stroke stop"]


def test_step_is_deterministic(model, params):
    def go():
        base = RigidBodyState(angular_velocity=[0.01, 0.02, 0.03])
        ehs = [EhsDynamicState(EhsJointState(0.1, 0.2, 0.1, 0.01, 0.0, 0.001), params, model.vehicle.mounts[0])]
        for _ in range(200):
            base, ehs, _ = step_coupled(model, base, ehs, ControlCommand(joint_efforts=[[0.001, 0, 0.01]]), 0.001)
        return np.concatenate([base.position, base.attitude.q, ehs[0].joints.positions()])

    assert np.array_equal(go(), go())
