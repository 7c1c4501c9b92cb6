"""Symmetry group: axioms, actions, equivariance, and the velocity lift."""

import numpy as np
import pytest

from eqslam.errors import (CountMismatchError, DegenerateConfigurationError,
                           TangencyError)
from eqslam.group import (AlgebraElement, GroupElement, Output, TotalState,
                          VelocityMeasurement, enforce_tangency, group_exp,
                          output_action, predicted_flow, state_action,
                          velocity_lift)
from eqslam.lie import Pose, Twist, random_rotation, vee
from eqslam.system import measure

RNG = np.random.default_rng(2718)


def random_state(rng, n):
    pose = Pose.random(rng)
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return TotalState(pose, pose.apply(dirs * rng.uniform(0.4, 3.0, n)[:, None]))


def random_element(rng, n):
    return GroupElement(Pose.random(rng), random_rotation(rng, n),
                        rng.uniform(0.3, 3.0, n))


def element_close(a, b, tol):
    return (np.abs(a.pose.matrix() - b.pose.matrix()).max() < tol
            and np.abs(a.rotations - b.rotations).max() < tol
            and np.abs(a.scales - b.scales).max() < tol)


def test_group_identity_and_inverse():
    x = random_element(RNG, 5)
    ident = GroupElement.identity(5)
    assert element_close(x @ ident, x, 1e-15)
    assert element_close(x @ x.inverse(), ident, 1e-10)


def test_group_inverse_scale_and_double_inverse():
    x = random_element(RNG, 3)
    x = GroupElement(x.pose, x.rotations, np.array([2.0, 0.5, 1.0]))
    assert np.allclose(x.inverse().scales, [0.5, 2.0, 1.0])
    assert element_close(x.inverse().inverse(), x, 1e-12)


def test_group_associativity():
    for _ in range(30):
        a, b, c = (random_element(RNG, 4) for _ in range(3))
        assert element_close((a @ b) @ c, a @ (b @ c), 1e-10)


def test_group_count_mismatch():
    with pytest.raises(CountMismatchError):
        random_element(RNG, 3).compose(random_element(RNG, 4))


def test_state_action_identity():
    state = random_state(RNG, 6)
    moved = state_action(GroupElement.identity(6), state)
    assert np.abs(moved.pose.matrix() - state.pose.matrix()).max() < 1e-15
    assert np.abs(moved.landmarks - state.landmarks).max() < 1e-12


def test_state_action_pure_scale_hand_case():
    state = TotalState(Pose.identity(), np.array([[0.0, 0.0, 4.0]]))
    x = GroupElement(Pose.identity(), np.eye(3)[None], np.array([2.0]))
    moved = state_action(x, state)
    assert np.allclose(moved.landmarks, [[0.0, 0.0, 2.0]], atol=1e-15)


def test_state_action_right_composition_law():
    for _ in range(40):
        state = random_state(RNG, 5)
        x1, x2 = random_element(RNG, 5), random_element(RNG, 5)
        lhs = state_action(x2, state_action(x1, state))
        rhs = state_action(x1 @ x2, state)
        assert np.abs(lhs.pose.matrix() - rhs.pose.matrix()).max() < 1e-9
        assert np.abs(lhs.landmarks - rhs.landmarks).max() < 1e-9


def test_state_action_degenerate_output_rejected():
    state = TotalState(Pose.identity(), np.array([[0.0, 0.0, 1.0]]))
    x = GroupElement(Pose.identity(), np.eye(3)[None], np.array([1e8]))
    with pytest.raises(DegenerateConfigurationError):
        state_action(x, state)


def test_output_action_identity_and_scale():
    out = measure(random_state(RNG, 4))
    same = output_action(GroupElement.identity(4), out)
    assert np.abs(same.bearings - out.bearings).max() < 1e-15
    assert np.array_equal(same.inverse_depths, out.inverse_depths)
    x = GroupElement(Pose.identity(), np.broadcast_to(np.eye(3), (4, 3, 3)),
                     np.full(4, 3.0))
    scaled = output_action(x, Output(out.bearings, np.full(4, 0.5)))
    assert np.allclose(scaled.inverse_depths, 1.5)


def test_measurement_map_is_equivariant():
    worst = 0.0
    for _ in range(200):
        state = random_state(RNG, 5)
        x = random_element(RNG, 5)
        lhs = output_action(x, measure(state))
        rhs = measure(state_action(x, state))
        worst = max(worst,
                    np.abs(lhs.bearings - rhs.bearings).max(),
                    np.abs(lhs.inverse_depths - rhs.inverse_depths).max())
    assert worst < 1e-9


def test_lift_zero_case():
    out = measure(random_state(RNG, 3))
    alg = velocity_lift(out, VelocityMeasurement(Twist.zero(), np.zeros((3, 3))))
    assert np.array_equal(alg.rotation_rates, np.zeros((3, 3)))
    assert np.array_equal(alg.scale_rates, np.zeros(3))


def test_lift_hand_case():
    out = Output(np.array([[0.0, 0.0, 1.0]]), np.array([1.0]))
    vel = VelocityMeasurement(Twist(np.zeros(3), np.array([0.0, 0.0, 1.0])),
                              np.zeros((1, 3)))
    alg = velocity_lift(out, vel)
    assert np.array_equal(alg.rotation_rates, np.zeros((1, 3)))
    assert np.allclose(alg.scale_rates, [1.0])


def test_lift_condition_finite_difference():
    """Directional derivative of the action along the lift equals the true
    state velocity (the module's strongest correctness oracle)."""
    step = 1e-5
    worst = 0.0
    for _ in range(60):
        state = random_state(RNG, 5)
        out = measure(state)
        tw = Twist(RNG.normal(scale=0.5, size=3), RNG.normal(scale=0.5, size=3))
        alg = velocity_lift(out, VelocityMeasurement(tw, predicted_flow(out, tw)))
        plus = state_action(group_exp(alg, step), state)
        minus = state_action(group_exp(alg, -step), state)
        pose_rate = (plus.pose.matrix() - minus.pose.matrix()) / (2 * step)
        point_rate = (plus.landmarks - minus.landmarks) / (2 * step)
        worst = max(worst,
                    np.abs(pose_rate - state.pose.matrix() @ tw.wedge()).max(),
                    np.abs(point_rate).max())
    assert worst < 1e-6


def test_lift_stabiliser_component_is_zero():
    for _ in range(30):
        state = random_state(RNG, 4)
        out = measure(state)
        tw = Twist(RNG.normal(size=3), RNG.normal(size=3))
        alg = velocity_lift(out, VelocityMeasurement(tw, predicted_flow(out, tw)))
        along = np.einsum("ni,ni->n", alg.rotation_rates, out.bearings)
        assert np.abs(along).max() < 1e-12


def test_predicted_flow_axis_cases():
    out = Output(np.array([[0.0, 0.0, 1.0]]), np.array([1.0]))
    still = predicted_flow(out, Twist.zero())
    assert np.array_equal(still, np.zeros((1, 3)))
    sideways = predicted_flow(out, Twist(np.zeros(3), np.array([1.0, 0, 0])))
    assert np.allclose(sideways, [[-1.0, 0.0, 0.0]], atol=1e-15)
    toward = predicted_flow(out, Twist(np.zeros(3), np.array([0.0, 0, 1.0])))
    assert np.allclose(toward, np.zeros((1, 3)), atol=1e-15)


def test_predicted_flow_is_tangent():
    state = random_state(RNG, 8)
    out = measure(state)
    tw = Twist(RNG.normal(size=3), RNG.normal(size=3))
    flows = predicted_flow(out, tw)
    assert np.abs(np.einsum("ni,ni->n", flows, out.bearings)).max() < 1e-12


def test_tangency_reprojection_and_rejection():
    y = np.array([[0.0, 0.0, 1.0]])
    slightly_off = np.array([[0.1, 0.0, 1e-7]])
    fixed = enforce_tangency(y, slightly_off)
    assert abs(fixed[0] @ y[0]) < 1e-18
    with pytest.raises(TangencyError):
        enforce_tangency(y, np.array([[0.1, 0.0, 0.1]]))


def test_output_validation():
    with pytest.raises(ValueError):
        Output(np.array([[1.0, 1.0, 0.0]]), np.array([1.0]))
    with pytest.raises(ValueError):
        Output(np.array([[1.0, 0.0, 0.0]]), np.array([0.0]))


def test_total_state_separation():
    with pytest.raises(DegenerateConfigurationError):
        TotalState(Pose.identity(), np.array([[0.0, 0.0, 1e-9]]))


def test_group_exp_componentwise():
    alg = AlgebraElement(Twist(RNG.normal(size=3), RNG.normal(size=3)),
                         RNG.normal(size=(3, 3)), RNG.normal(size=3))
    el = group_exp(alg, 0.3)
    assert np.allclose(el.scales, np.exp(alg.scale_rates * 0.3))
    # rotation component solves the left-invariant ODE direction
    rate = vee((el.rotations[0] - np.eye(3)))
    assert np.abs(rate - 0.3 * alg.rotation_rates[0]).max() < 0.05
