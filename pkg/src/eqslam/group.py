"""The symmetry group of landmark-bearing SLAM and its actions.

The group is the direct product SE(3) x (SO(3) x R+)^n: one rigid-body
element shared by the pose, plus an independent rotation and positive scale
per landmark.  It acts on the right both on raw configurations (pose plus
inertial landmark positions) and on the measured outputs (body-frame unit
bearings plus inverse depths), and the measurement map intertwines the two
actions.  The velocity lift turns measured velocities (body twist and
per-landmark optical flow) into a group velocity whose induced trajectory
projects onto the true state trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CountMismatchError, DegenerateConfigurationError, TangencyError
from .lie import (
    Pose,
    Twist,
    UNIT_TOL,
    ORTHOGONALITY_TOL,
    rotation_defect,
    se3_exp,
    skew,
    so3_exp,
)

# Minimum landmark-to-camera separation (metres) that keeps bearings defined.
# Violating inputs are rejected rather than perturbed, so failures are loud.
MIN_SEPARATION = 1e-6

# Flow vectors with a tangency defect |y . flow| below this are silently
# reprojected onto the tangent plane; anything larger is rejected.
TANGENCY_REPROJECT_TOL = 1e-6


def _require_matching(n_a: int, n_b: int, what: str) -> None:
    if n_a != n_b:
        raise CountMismatchError(f"{what}: landmark counts differ ({n_a} vs {n_b})")


@dataclass(frozen=True, eq=False)
class GroupElement:
    """Element (pose part, per-landmark rotations, per-landmark scales)."""

    pose: Pose
    rotations: np.ndarray  # (n, 3, 3)
    scales: np.ndarray     # (n,), strictly positive

    def __post_init__(self):
        rot = np.array(self.rotations, dtype=float)
        sc = np.array(self.scales, dtype=float)
        if rot.ndim != 3 or rot.shape[1:] != (3, 3):
            raise ValueError("rotations must have shape (n, 3, 3)")
        if sc.shape != (rot.shape[0],):
            raise ValueError("scales must have shape (n,)")
        if rot.shape[0] and rotation_defect(rot) > ORTHOGONALITY_TOL:
            raise ValueError("per-landmark rotations are not orthogonal "
                             f"within {ORTHOGONALITY_TOL}")
        if np.any(sc <= 0.0):
            raise ValueError("scales must be strictly positive")
        object.__setattr__(self, "rotations", rot)
        object.__setattr__(self, "scales", sc)

    @property
    def n(self) -> int:
        return self.rotations.shape[0]

    @classmethod
    def identity(cls, n: int) -> "GroupElement":
        return cls(Pose.identity(), np.broadcast_to(np.eye(3), (n, 3, 3)).copy(),
                   np.ones(n))

    def compose(self, other: "GroupElement") -> "GroupElement":
        """Componentwise product (direct-product group structure)."""
        _require_matching(self.n, other.n, "compose")
        return GroupElement(self.pose @ other.pose,
                            self.rotations @ other.rotations,
                            self.scales * other.scales)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return self.compose(other)

    def inverse(self) -> "GroupElement":
        return GroupElement(self.pose.inverse(),
                            np.swapaxes(self.rotations, 1, 2),
                            1.0 / self.scales)


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """Group velocity: body twist plus per-landmark rotation/scale rates."""

    twist: Twist
    rotation_rates: np.ndarray  # (n, 3), axis-angle rate vectors
    scale_rates: np.ndarray     # (n,), log-scale rates

    def __post_init__(self):
        rr = np.array(self.rotation_rates, dtype=float)
        sr = np.array(self.scale_rates, dtype=float)
        if rr.ndim != 2 or rr.shape[1] != 3 or sr.shape != (rr.shape[0],):
            raise ValueError("rates must have shapes (n, 3) and (n,)")
        object.__setattr__(self, "rotation_rates", rr)
        object.__setattr__(self, "scale_rates", sr)

    @property
    def n(self) -> int:
        return self.rotation_rates.shape[0]

    @classmethod
    def zero(cls, n: int) -> "AlgebraElement":
        return cls(Twist.zero(), np.zeros((n, 3)), np.zeros(n))


def group_exp(alg: AlgebraElement, dt: float = 1.0) -> GroupElement:
    """Exponential of dt * alg (componentwise, direct-product group)."""
    return GroupElement(se3_exp(alg.twist, dt),
                        so3_exp(alg.rotation_rates, dt),
                        np.exp(alg.scale_rates * dt))


@dataclass(frozen=True, eq=False)
class TotalState:
    """Raw configuration: robot pose plus inertial landmark positions."""

    pose: Pose
    landmarks: np.ndarray  # (n, 3), metres

    def __post_init__(self):
        pts = np.array(self.landmarks, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("landmarks must have shape (n, 3)")
        sep = np.linalg.norm(pts - self.pose.translation, axis=1)
        if np.any(sep < MIN_SEPARATION):
            raise DegenerateConfigurationError(
                f"landmark within {MIN_SEPARATION} m of the camera centre "
                f"(min separation {sep.min():.3e})")
        object.__setattr__(self, "landmarks", pts)

    @property
    def n(self) -> int:
        return self.landmarks.shape[0]


@dataclass(frozen=True, eq=False)
class Output:
    """Measured outputs: unit bearings (body frame) and inverse depths (1/m)."""

    bearings: np.ndarray        # (n, 3), unit norm
    inverse_depths: np.ndarray  # (n,), strictly positive

    def __post_init__(self):
        y = np.array(self.bearings, dtype=float)
        z = np.array(self.inverse_depths, dtype=float)
        if y.ndim != 2 or y.shape[1] != 3 or z.shape != (y.shape[0],):
            raise ValueError("bearings (n, 3) and inverse_depths (n,) required")
        if y.shape[0]:
            defect = np.abs(np.linalg.norm(y, axis=1) - 1.0).max()
            if defect > UNIT_TOL:
                raise ValueError(f"bearings must be unit vectors (defect {defect:.3e})")
        if np.any(z <= 0.0):
            raise ValueError("inverse depths must be strictly positive")
        object.__setattr__(self, "bearings", y)
        object.__setattr__(self, "inverse_depths", z)

    @property
    def n(self) -> int:
        return self.bearings.shape[0]


@dataclass(frozen=True, eq=False)
class VelocityMeasurement:
    """Measured velocities: body twist plus per-landmark optical flow.

    Flows are stored in ambient 3-space coordinates and must be tangent to
    the sphere at the matching bearings; tangency is enforced where outputs
    and velocities meet (see :func:`enforce_tangency`).
    """

    twist: Twist
    flows: np.ndarray  # (n, 3)

    def __post_init__(self):
        f = np.array(self.flows, dtype=float)
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError("flows must have shape (n, 3)")
        object.__setattr__(self, "flows", f)

    @property
    def n(self) -> int:
        return self.flows.shape[0]


def enforce_tangency(bearings: np.ndarray, flows: np.ndarray) -> np.ndarray:
    """Reproject flows onto the tangent planes at the bearings.

    Defects up to TANGENCY_REPROJECT_TOL are repaired silently; anything
    larger raises, since it indicates mismatched bearings and flows.
    """
    bearings = np.asarray(bearings, dtype=float)
    flows = np.asarray(flows, dtype=float)
    along = np.einsum("ni,ni->n", bearings, flows)
    worst = np.abs(along).max() if along.size else 0.0
    if worst > TANGENCY_REPROJECT_TOL:
        raise TangencyError(f"flow tangency defect {worst:.3e} exceeds "
                            f"{TANGENCY_REPROJECT_TOL}")
    return flows - along[:, None] * bearings


def state_action(element: GroupElement, state: TotalState) -> TotalState:
    """Right action on raw configurations.

    The pose is transformed by the rigid-body part.  Each landmark is read in
    the old body frame, rotated by the transpose of its rotation component,
    shrunk by the inverse of its scale, and rewritten in the inertial frame
    using the new pose.
    """
    _require_matching(element.n, state.n, "state_action")
    new_pose = state.pose @ element.pose
    body = (state.landmarks - state.pose.translation) @ state.pose.rotation
    # rows are body-frame coordinates; apply Qt then the new pose
    twisted = np.einsum("nij,ni->nj", element.rotations, body) / element.scales[:, None]
    moved = twisted @ new_pose.rotation.T + new_pose.translation
    return TotalState(new_pose, moved)


def output_action(element: GroupElement, output: Output) -> Output:
    """Right action on outputs: bearings rotate by Qt, depths scale by a."""
    _require_matching(element.n, output.n, "output_action")
    y = np.einsum("nij,ni->nj", element.rotations, output.bearings)
    # renormalise so norm drift cannot accumulate across repeated actions
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    return Output(y, element.scales * output.inverse_depths)


def predicted_flow(output: Output, twist: Twist) -> np.ndarray:
    """Optical flow of static landmarks for a given body twist.

    flow_i = -angular x y_i - z_i (I - y_i y_i^T) V, tangent at y_i.
    """
    y = output.bearings
    z = output.inverse_depths
    v_tangent = twist.linear - y * (y @ twist.linear)[:, None]
    return -np.cross(twist.angular, y) - z[:, None] * v_tangent


def velocity_lift(output: Output, velocity: VelocityMeasurement) -> AlgebraElement:
    """Lift measured velocities to the group's Lie algebra.

    Per landmark the rotation rate is flow x bearing and the log-scale rate
    is z * (bearing . linear velocity).  The component about the bearing axis
    itself is unconstrained (stabiliser direction) and left at zero.
    """
    _require_matching(output.n, velocity.n, "velocity_lift")
    flows = enforce_tangency(output.bearings, velocity.flows)
    y = output.bearings
    rotation_rates = np.cross(flows, y)
    scale_rates = output.inverse_depths * (y @ velocity.twist.linear)
    return AlgebraElement(velocity.twist, rotation_rates, scale_rates)
