"""Ground-truth system: measurement map, propagation, sensor simulation."""

import math

import numpy as np
import pytest

from eqslam.group import Output, TotalState
from eqslam.lie import Pose, Twist
from eqslam.system import (MeasurementFrame, SystemParams, Z_MIN, measure,
                           propagate, sense)
from eqslam.group import output_action, state_action, predicted_flow
from eqslam.lie import random_rotation

RNG = np.random.default_rng(512)

CIRCLE_TWIST = Twist(np.array([0.0, 0.0, 0.02 * np.pi]), np.array([0.1, 0.0, 0.0]))


def test_measure_axis_cases():
    state = TotalState(Pose.identity(), np.array([[0.0, 0.0, 2.0]]))
    out = measure(state)
    assert np.allclose(out.bearings, [[0.0, 0.0, 1.0]], atol=1e-15)
    assert np.allclose(out.inverse_depths, [0.5])
    unit = TotalState(Pose.identity(), np.array([[1.0, 0.0, 0.0]]))
    assert np.allclose(measure(unit).inverse_depths, [1.0])


def test_measure_equivariance_oracle():
    from eqslam.group import GroupElement
    for _ in range(50):
        pose = Pose.random(RNG)
        dirs = RNG.normal(size=(4, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        state = TotalState(pose, pose.apply(dirs * RNG.uniform(0.5, 2, 4)[:, None]))
        x = GroupElement(Pose.random(RNG), random_rotation(RNG, 4),
                         RNG.uniform(0.3, 3, 4))
        lhs = measure(state_action(x, state))
        rhs = output_action(x, measure(state))
        assert np.abs(lhs.bearings - rhs.bearings).max() < 1e-9
        assert np.abs(lhs.inverse_depths - rhs.inverse_depths).max() < 1e-9


def test_propagate_zero_twist_and_translation():
    state = TotalState(Pose.identity(), np.array([[0.0, 3.0, 0.0]]))
    unchanged = propagate(state, Twist.zero(), 1.0)
    assert np.array_equal(unchanged.pose.matrix(), np.eye(4))
    assert np.array_equal(unchanged.landmarks, state.landmarks)
    shifted = propagate(state, Twist(np.zeros(3), np.array([1.0, 0, 0])), 1.0)
    assert np.allclose(shifted.pose.translation, [1.0, 0, 0])
    assert np.array_equal(shifted.landmarks, state.landmarks)


def test_propagate_requires_positive_dt():
    state = TotalState(Pose.identity(), np.array([[0.0, 3.0, 0.0]]))
    with pytest.raises(ValueError):
        propagate(state, Twist.zero(), 0.0)


def test_circular_motion_closes_after_one_lap():
    """Period is 2 pi / |angular rate| = 100 s for the standard circle."""
    state = TotalState(Pose.identity(), np.array([[0.0, 3.0, 0.0]]))
    for _ in range(200):
        state = propagate(state, CIRCLE_TWIST, 0.5)
    assert np.linalg.norm(state.pose.translation) < 1e-6


def test_noise_free_sense_is_exact():
    state = TotalState(Pose.identity(),
                       np.array([[0.0, 0.0, 2.0], [1.0, 0.5, -0.2]]))
    params = SystemParams(n=2)
    out = measure(state)
    frame = sense(state, CIRCLE_TWIST, params, np.random.default_rng(0))
    assert np.array_equal(frame.bearings, out.bearings)
    assert np.array_equal(frame.inverse_depths, out.inverse_depths)
    assert np.array_equal(frame.flows, predicted_flow(out, CIRCLE_TWIST))
    assert np.array_equal(frame.twist.as_vector(), CIRCLE_TWIST.as_vector())
    assert frame.visible.all() and frame.flow_valid.all()
    assert frame.clamp_count == 0


def test_sense_range_cut():
    state = TotalState(Pose.identity(),
                       np.array([[0.0, 0.0, 1.5], [0.5, 0.0, 0.0]]))
    params = SystemParams(n=2, sensor_range=1.0)
    frame = sense(state, Twist.zero(), params, np.random.default_rng(0))
    assert not frame.visible[0] and frame.visible[1]
    assert np.isnan(frame.bearings[0]).all()
    assert not np.isnan(frame.bearings[1]).any()


def test_sense_seeded_runs_are_bit_identical():
    state = TotalState(Pose.random(RNG), RNG.normal(size=(5, 3)) * 2 + 5)
    params = SystemParams(n=5, var_linear_vel=0.2, var_angular_vel=0.1,
                          var_flow=0.02, var_bearing=0.01, var_inverse_depth=0.4)
    frames = []
    for _ in range(2):
        rng = np.random.default_rng(1234)
        frames.append(sense(state, CIRCLE_TWIST, params, rng))
    a, b = frames
    assert np.array_equal(a.bearings, b.bearings, equal_nan=True)
    assert np.array_equal(a.inverse_depths, b.inverse_depths, equal_nan=True)
    assert np.array_equal(a.flows, b.flows, equal_nan=True)
    assert np.array_equal(a.twist.as_vector(), b.twist.as_vector())


def test_sense_clamps_inverse_depth():
    state = TotalState(Pose.identity(), np.array([[0.0, 0.0, 5.0]] * 50))
    params = SystemParams(n=50, var_inverse_depth=0.4)
    frame = sense(state, Twist.zero(), params, np.random.default_rng(7))
    assert frame.clamp_count > 0
    assert np.nanmin(frame.inverse_depths) >= Z_MIN


def test_noisy_bearings_stay_unit():
    state = TotalState(Pose.random(RNG), RNG.normal(size=(30, 3)) * 2 + 4)
    params = SystemParams(n=30, var_bearing=0.01)
    frame = sense(state, Twist.zero(), params, np.random.default_rng(3))
    norms = np.linalg.norm(frame.bearings, axis=1)
    assert np.abs(norms - 1.0).max() < 1e-12


def test_finite_difference_flow_converges_linearly():
    landmarks = np.array([[0.5, 1.0, 0.0], [-0.3, 0.8, 0.2], [1.2, -0.4, 0.1]])
    errors = []
    for dt in (0.5, 0.05, 0.005):
        state = TotalState(Pose.identity(), landmarks)
        params = SystemParams(n=3)
        rng = np.random.default_rng(0)
        prev = sense(state, CIRCLE_TWIST, params, rng, flow_mode="finite-difference",
                     timestamp=0.0)
        assert not prev.flow_valid.any()
        nxt = propagate(state, CIRCLE_TWIST, dt)
        frame = sense(nxt, CIRCLE_TWIST, params, rng, prev_frame=prev,
                      flow_mode="finite-difference", timestamp=dt)
        assert frame.flow_valid.all()
        exact = predicted_flow(measure(nxt), CIRCLE_TWIST)
        errors.append(np.abs(frame.flows - exact).max())
    assert errors[0] / errors[1] > 5
    assert errors[1] / errors[2] > 5


def test_noise_free_lap_returns_to_initial_frame():
    state = TotalState(Pose.identity(),
                       np.array([[0.0, 2.0, 0.0], [1.5, 3.0, 0.3]]))
    params = SystemParams(n=2)
    rng = np.random.default_rng(0)
    first = sense(state, CIRCLE_TWIST, params, rng, timestamp=0.0)
    for k in range(200):
        state = propagate(state, CIRCLE_TWIST, 0.5)
    last = sense(state, CIRCLE_TWIST, params, rng, timestamp=100.0)
    assert np.abs(last.bearings - first.bearings).max() < 1e-6
    assert np.abs(last.inverse_depths - first.inverse_depths).max() < 1e-6
    assert np.abs(last.flows - first.flows).max() < 1e-6


def test_params_validation():
    with pytest.raises(ValueError):
        SystemParams(n=0)
    with pytest.raises(ValueError):
        SystemParams(n=1, sensor_range=0.0)
    with pytest.raises(ValueError):
        SystemParams(n=1, var_bearing=-0.1)


def test_frame_output_accessors():
    state = TotalState(Pose.identity(), np.array([[0.0, 0.0, 2.0]]))
    frame = sense(state, Twist.zero(), SystemParams(n=1), np.random.default_rng(0))
    out = frame.output()
    assert isinstance(out, Output)
    far = TotalState(Pose.identity(), np.array([[0.0, 0.0, 2.0]]))
    blocked = sense(far, Twist.zero(), SystemParams(n=1, sensor_range=1.0),
                    np.random.default_rng(0))
    with pytest.raises(ValueError):
        blocked.output()
