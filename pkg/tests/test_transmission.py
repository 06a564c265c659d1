import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qddsim.transmission import (FingerGeometry, JointState, TorqueMapMode, TransmissionParams,
                                 forward_kinematics, inverse_kinematics, jacobian,
                                 joint_to_motor, joint_torque_to_motor_torque, motor_to_joint,
                                 motor_torque_to_joint_torque, sample_workspace)

N1 = 2.57
LITERAL = TransmissionParams(N1, 1.0, TorqueMapMode.LITERAL)
ENERGY = TransmissionParams(N1, 1.0, TorqueMapMode.ENERGY_CONSISTENT)
GEOM = FingerGeometry()

angles = st.floats(-10.0, 10.0, allow_nan=False)
ratios = st.floats(0.1, 20.0)


def test_motor_to_joint_examples():
    assert np.array_equal(motor_to_joint((0.0, 0.0), LITERAL), [0.0, 0.0])
    np.testing.assert_allclose(motor_to_joint((2.57, -2.57), LITERAL), [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(motor_to_joint((5.14, 5.14), LITERAL), [0.0, 2.0], atol=1e-15)


def test_joint_to_motor_examples():
    assert np.array_equal(joint_to_motor((0.0, 0.0), LITERAL), [0.0, 0.0])
    np.testing.assert_allclose(joint_to_motor((1.0, 0.0), LITERAL), [2.57, -2.57], atol=1e-15)
    np.testing.assert_allclose(joint_to_motor((0.0, 2.0), LITERAL), [5.14, 5.14], atol=1e-15)


def test_torque_map_examples():
    np.testing.assert_array_equal(joint_torque_to_motor_torque((0.0, 0.0), LITERAL), [0.0, 0.0])
    np.testing.assert_allclose(joint_torque_to_motor_torque((1.0, 0.0), LITERAL),
                               [0.389, -0.389], atol=5e-4)
    np.testing.assert_allclose(joint_torque_to_motor_torque((0.0, 1.0), LITERAL),
                               [0.389, 0.389], atol=5e-4)
    # frozen: 1/2.57
    assert joint_torque_to_motor_torque((1.0, 0.0), LITERAL)[0] == pytest.approx(0.38910505836575876,
                                                                               abs=1e-15)


def test_literal_map_is_twice_energy_map():
    np.testing.assert_allclose(LITERAL.torque_matrix(), 2.0 * ENERGY.torque_matrix(), atol=1e-15)


def test_motor_torque_to_joint_torque_inverts():
    tau = np.array([0.3, -0.7])
    for p in (LITERAL, ENERGY):
        back = motor_torque_to_joint_torque(joint_torque_to_motor_torque(tau, p), p)
        np.testing.assert_allclose(back, tau, atol=1e-15)


def test_rejects_bad_ratios():
    with pytest.raises(ValueError):
        TransmissionParams(0.0, 1.0)
    with pytest.raises(ValueError):
        TransmissionParams(1.0, -1.0)


def test_joint_state_consistency():
    s = JointState.from_motor((1.0, 0.4), (0.2, -0.3), LITERAL)
    np.testing.assert_allclose(s.theta, motor_to_joint((1.0, 0.4), LITERAL))
    np.testing.assert_allclose(s.theta_dot, motor_to_joint((0.2, -0.3), LITERAL))


@settings(max_examples=1000, deadline=None)
@given(angles, angles, ratios, ratios)
def test_round_trip(q1, q2, n1, n2):
    p = TransmissionParams(n1, n2)
    q = np.array([q1, q2])
    np.testing.assert_allclose(joint_to_motor(motor_to_joint(q, p), p), q, atol=1e-12, rtol=0)


@settings(max_examples=1000, deadline=None)
@given(angles, angles, angles, angles, ratios, ratios)
def test_energy_consistent_power(t1, t2, qd1, qd2, n1, n2):
    p = TransmissionParams(n1, n2, TorqueMapMode.ENERGY_CONSISTENT)
    tau = np.array([t1, t2])
    qd = np.array([qd1, qd2])
    p_motor = joint_torque_to_motor_torque(tau, p) @ qd
    p_joint = tau @ motor_to_joint(qd, p)
    assert abs(p_motor - p_joint) <= 1e-12 * max(1.0, abs(tau).max() * abs(qd).max())


def test_forward_kinematics_examples():
    np.testing.assert_allclose(forward_kinematics((0.0, 0.0), GEOM), [0.09, 0.0], atol=1e-15)
    np.testing.assert_allclose(forward_kinematics((math.pi / 2, 0.0), GEOM), [0.0, 0.09],
                               atol=1e-15)
    np.testing.assert_allclose(forward_kinematics((math.pi / 2, math.pi / 2), GEOM),
                               [-0.04, 0.05], atol=1e-15)


def test_jacobian_examples():
    np.testing.assert_allclose(jacobian((0.0, 0.0), GEOM), [[0.0, 0.0], [0.09, 0.04]], atol=1e-15)
    np.testing.assert_allclose(jacobian((math.pi / 2, math.pi / 2), GEOM),
                               [[-0.05, 0.0], [-0.04, -0.04]], atol=1e-15)
    np.testing.assert_array_equal(jacobian((0.3, 1.1), GEOM) @ np.zeros(2), [0.0, 0.0])


def _fd_jacobian(theta, geom, h=1e-6):
    J = np.zeros((2, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        J[:, k] = (forward_kinematics(theta + e, geom) - forward_kinematics(theta - e, geom)) / (2 * h)
    return J


@settings(max_examples=1000, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(-math.pi / 2, 3 * math.pi / 4))
def test_jacobian_matches_finite_differences(t1, t2):
    theta = np.array([t1, t2])
    J = jacobian(theta, GEOM)
    err = np.abs(J - _fd_jacobian(theta, GEOM)).max()
    assert err < 1e-6 * np.linalg.norm(J)


def test_sample_workspace_corners():
    pts = sample_workspace(GEOM, 2)
    assert pts.shape == (4, 2)
    lo1, hi1 = GEOM.theta1_limits
    lo2, hi2 = GEOM.theta2_limits
    corners = [(lo1, lo2), (lo1, hi2), (hi1, lo2), (hi1, hi2)]
    for p, c in zip(pts, corners):
        np.testing.assert_allclose(p, forward_kinematics(c, GEOM), atol=1e-15)


@pytest.mark.parametrize("n", [2, 7, 40])
def test_workspace_radius_bound(n):
    r = np.hypot(*sample_workspace(GEOM, n).T)
    assert r.max() <= GEOM.l1 + GEOM.l2 + 1e-15
    assert r.min() >= abs(GEOM.l1 - GEOM.l2) - 1e-15


def test_workspace_rejects_small_grid():
    with pytest.raises(ValueError):
        sample_workspace(GEOM, 1)


def test_geometry_validation():
    with pytest.raises(ValueError):
        FingerGeometry(l1=0.0)
    with pytest.raises(ValueError):
        FingerGeometry(theta1_limits=(1.0, 1.0))


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.05, 2.3))
def test_inverse_kinematics_round_trip(t1, t2):
    p = forward_kinematics((t1, t2), GEOM)
    th = inverse_kinematics(p, GEOM)
    assert th[1] == pytest.approx(t2, abs=1e-9)
    np.testing.assert_allclose(forward_kinematics(th, GEOM), p, atol=1e-12)
