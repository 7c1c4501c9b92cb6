"""Randomised algebraic property checks behind the ``verify`` command.

Each check draws seeded random inputs, evaluates an identity that must hold
exactly in real arithmetic, and reports the worst residual against a fixed
tolerance.  The output-action hook exists so a deliberately corrupted action
can be injected to prove the checks have teeth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import group as grp
from .group import (AlgebraElement, GroupElement, Output, TotalState,
                    VelocityMeasurement, group_exp, predicted_flow,
                    state_action, velocity_lift)
from .lie import Pose, Twist, projector, random_rotation, rotation_defect, skew, so3_exp, vee
from .system import measure

DEFAULT_SEED = 202402


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tolerance


def _random_state(rng, n) -> TotalState:
    pose = Pose.random(rng)
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    dist = rng.uniform(0.4, 3.0, size=n)
    return TotalState(pose, pose.apply(dirs * dist[:, None]))


def _random_element(rng, n) -> GroupElement:
    return GroupElement(Pose.random(rng), random_rotation(rng, n),
                        rng.uniform(0.3, 3.0, size=n))


def _random_twist(rng, scale=0.5) -> Twist:
    return Twist(rng.normal(scale=scale, size=3), rng.normal(scale=scale, size=3))


def run_checks(samples: int = 1000, seed: int = DEFAULT_SEED, n: int = 10,
               output_action_fn: Callable[[GroupElement, Output], Output] | None = None,
               ) -> list[CheckResult]:
    """Run every property check; returns one result per check."""
    act_out = output_action_fn or grp.output_action
    rng = np.random.default_rng(seed)
    results = []

    # cross-product identity of the skew operator
    worst = 0.0
    vs = rng.normal(size=(samples, 3))
    ws = rng.normal(size=(samples, 3))
    worst = float(np.abs(np.einsum("nij,nj->ni", skew(vs), ws)
                         - np.cross(vs, ws)).max())
    results.append(CheckResult("skew matches cross product", worst, 1e-12))

    # projector equals minus the squared skew of the bearing
    ys = rng.normal(size=(samples, 3))
    ys /= np.linalg.norm(ys, axis=1, keepdims=True)
    sk = skew(ys)
    worst = float(np.abs(projector(ys) + sk @ sk).max())
    results.append(CheckResult("projector is -skew(y) skew(y)", worst, 1e-12))

    # rotation exponential stays on the group for large angles
    axes = rng.normal(size=(samples, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = rng.uniform(0.0, 10.0 * np.pi, size=samples)
    rots = so3_exp(axes * angles[:, None])
    worst = max(rotation_defect(rots), float(np.abs(np.linalg.det(rots) - 1).max()))
    results.append(CheckResult("rotation exponential stays orthogonal", worst, 1e-9))

    # pose composition associativity
    worst = 0.0
    for _ in range(max(samples // 10, 20)):
        a, b, c = (Pose.random(rng) for _ in range(3))
        worst = max(worst, float(np.abs(((a @ b) @ c).matrix()
                                        - (a @ (b @ c)).matrix()).max()))
    results.append(CheckResult("pose composition associativity", worst, 1e-10))

    # adjoint is a homomorphism and matches conjugation
    worst = 0.0
    for _ in range(max(samples // 10, 20)):
        a, b = Pose.random(rng), Pose.random(rng)
        worst = max(worst, float(np.abs((a @ b).adjoint()
                                        - a.adjoint() @ b.adjoint()).max()))
        u = _random_twist(rng)
        conj = a.matrix() @ u.wedge() @ a.inverse().matrix()
        worst = max(worst, float(np.abs(a.adjoint() @ u.as_vector()
                                        - Twist.from_wedge(conj).as_vector()).max()))
    results.append(CheckResult("adjoint homomorphism and conjugation", worst, 1e-10))

    # group axioms on the product group
    worst = 0.0
    for _ in range(max(samples // 20, 10)):
        x1, x2, x3 = (_random_element(rng, n) for _ in range(3))
        ident = GroupElement.identity(n)
        worst = max(worst, _element_distance(x1 @ ident, x1))
        worst = max(worst, _element_distance(x1 @ x1.inverse(), ident))
        worst = max(worst, _element_distance((x1 @ x2) @ x3, x1 @ (x2 @ x3)))
    results.append(CheckResult("group axioms", worst, 1e-10))

    # right-action composition law on configurations
    worst = 0.0
    for _ in range(max(samples // 20, 10)):
        state = _random_state(rng, n)
        x1, x2 = _random_element(rng, n), _random_element(rng, n)
        lhs = state_action(x2, state_action(x1, state))
        rhs = state_action(x1 @ x2, state)
        worst = max(worst, _state_distance(lhs, rhs))
    results.append(CheckResult("configuration action composition", worst, 1e-9))

    # right-action composition law on outputs
    worst = 0.0
    for _ in range(max(samples // 20, 10)):
        state = _random_state(rng, n)
        out = measure(state)
        x1, x2 = _random_element(rng, n), _random_element(rng, n)
        lhs = act_out(x2, act_out(x1, out))
        rhs = act_out(x1 @ x2, out)
        worst = max(worst, _output_distance(lhs, rhs))
    results.append(CheckResult("output action composition", worst, 1e-9))

    # the measurement map intertwines the two actions
    worst = 0.0
    for _ in range(samples):
        state = _random_state(rng, n)
        x = _random_element(rng, n)
        lhs = act_out(x, measure(state))
        rhs = measure(state_action(x, state))
        worst = max(worst, _output_distance(lhs, rhs))
    results.append(CheckResult("measurement equivariance", worst, 1e-9))

    # the lifted velocity projects onto the true state velocity
    worst = 0.0
    for _ in range(min(max(samples // 5, 50), 400)):
        worst = max(worst, lift_condition_residual(rng, n))
    results.append(CheckResult("velocity lift condition", worst, 1e-6))

    # the lift leaves the stabiliser direction at zero
    worst = 0.0
    for _ in range(max(samples // 20, 10)):
        state = _random_state(rng, n)
        out = measure(state)
        u = _random_twist(rng)
        vel = VelocityMeasurement(u, predicted_flow(out, u))
        alg = velocity_lift(out, vel)
        worst = max(worst, float(np.abs(np.einsum(
            "ni,ni->n", alg.rotation_rates, out.bearings)).max()))
    results.append(CheckResult("lift stabiliser component vanishes", worst, 1e-12))

    return results


def lift_condition_residual(rng: np.random.Generator, n: int,
                            step: float = 1e-5) -> float:
    """Central-difference check that the lift reproduces the state velocity.

    The directional derivative of the action along the lifted velocity must
    equal (pose times twist, zero landmark velocities) when the flows are the
    physical optical flows of the measured twist.
    """
    state = _random_state(rng, n)
    out = measure(state)
    u = _random_twist(rng)
    vel = VelocityMeasurement(u, predicted_flow(out, u))
    alg = velocity_lift(out, vel)
    plus = state_action(group_exp(alg, step), state)
    minus = state_action(group_exp(alg, -step), state)
    pose_rate = (plus.pose.matrix() - minus.pose.matrix()) / (2 * step)
    point_rate = (plus.landmarks - minus.landmarks) / (2 * step)
    expected = state.pose.matrix() @ u.wedge()
    return max(float(np.abs(pose_rate - expected).max()),
               float(np.abs(point_rate).max()))


def _element_distance(a: GroupElement, b: GroupElement) -> float:
    return max(float(np.abs(a.pose.matrix() - b.pose.matrix()).max()),
               float(np.abs(a.rotations - b.rotations).max()),
               float(np.abs(a.scales - b.scales).max()))


def _state_distance(a: TotalState, b: TotalState) -> float:
    return max(float(np.abs(a.pose.matrix() - b.pose.matrix()).max()),
               float(np.abs(a.landmarks - b.landmarks).max()))


def _output_distance(a: Output, b: Output) -> float:
    return max(float(np.abs(a.bearings - b.bearings).max()),
               float(np.abs(a.inverse_depths - b.inverse_depths).max()))


def corrupted_output_action(element: GroupElement, output: Output) -> Output:
    """Output action with a flipped rotation sign; used to prove checks fail."""
    y = np.einsum("nij,nj->ni", element.rotations, output.bearings)
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    return Output(-y, element.scales * output.inverse_depths)
