"""Ground-truth SLAM system: kinematics, measurement map, sensor simulation.

The world is static: the robot pose integrates a body twist while landmarks
stay put.  Measurements are body-frame unit bearings and inverse depths per
landmark, a per-landmark optical flow, and the (noisy) body twist itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .group import Output, TotalState, VelocityMeasurement, predicted_flow
from .lie import Twist, se3_exp, tangent_basis

# Inverse depths are clamped at this floor after additive noise so that the
# output invariant z > 0 survives; clamp events are counted on the frame.
Z_MIN = 1e-4


@dataclass(frozen=True)
class SystemParams:
    """Landmark count, sensing range, and per-axis noise variances."""

    n: int
    sensor_range: float = math.inf
    var_linear_vel: float = 0.0
    var_angular_vel: float = 0.0
    var_flow: float = 0.0
    var_bearing: float = 0.0
    var_inverse_depth: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one landmark")
        if self.sensor_range <= 0:
            raise ValueError("sensor range must be positive")
        for name in ("var_linear_vel", "var_angular_vel", "var_flow",
                     "var_bearing", "var_inverse_depth"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True, eq=False)
class MeasurementFrame:
    """One sensing instant: visibility, noisy outputs, noisy velocities.

    Invisible landmarks carry NaN in the per-landmark arrays.  ``flow_valid``
    can lag ``visible`` by one frame in finite-difference flow mode, where a
    flow needs two consecutive sightings.
    """

    timestamp: float
    twist: Twist                 # noisy body twist
    visible: np.ndarray          # (n,) bool
    bearings: np.ndarray         # (n, 3), unit where visible
    inverse_depths: np.ndarray   # (n,), positive where visible
    flows: np.ndarray            # (n, 3), tangent where flow_valid
    flow_valid: np.ndarray       # (n,) bool
    clamp_count: int = 0

    @property
    def n(self) -> int:
        return self.visible.shape[0]

    def output(self) -> Output:
        """Outputs as a validated object; requires all landmarks visible."""
        if not bool(self.visible.all()):
            raise ValueError("frame has invisible landmarks; mask before use")
        return Output(self.bearings, self.inverse_depths)

    def velocity(self) -> VelocityMeasurement:
        if not bool(self.flow_valid.all()):
            raise ValueError("frame has landmarks without a valid flow")
        return VelocityMeasurement(self.twist, self.flows)


def measure(state: TotalState) -> Output:
    """Exact measurement map: body-frame bearings and inverse depths."""
    offsets = state.landmarks - state.pose.translation
    dist = np.linalg.norm(offsets, axis=1)
    bearings = (offsets / dist[:, None]) @ state.pose.rotation
    return Output(bearings, 1.0 / dist)


def propagate(state: TotalState, twist: Twist, dt: float) -> TotalState:
    """Advance the pose by the body twist; landmarks are static."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return TotalState(state.pose @ se3_exp(twist, dt), state.landmarks)


def _project_tangent(bearings: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    along = np.einsum("ni,ni->n", bearings, vectors)
    return vectors - along[:, None] * bearings


def sense(state: TotalState,
          twist: Twist,
          params: SystemParams,
          rng: np.random.Generator,
          prev_frame: MeasurementFrame | None = None,
          flow_mode: str = "analytic",
          timestamp: float = 0.0) -> MeasurementFrame:
    """Simulate one sensing instant.

    Visibility is a hard range cut.  Bearing noise is drawn per tangent axis
    and the bearing renormalised; inverse-depth noise is clamped at ``Z_MIN``.
    Flows are either the exact static-landmark flow plus tangent noise
    (``analytic``) or the projected difference of consecutive noisy bearings
    (``finite-difference``).
    """
    if flow_mode not in ("analytic", "finite-difference"):
        raise ValueError(f"unknown flow mode {flow_mode!r}")
    exact = measure(state)
    n = exact.n
    dist = 1.0 / exact.inverse_depths
    visible = dist <= params.sensor_range

    # noise is drawn unconditionally (stable draw counts across noise levels)
    # but zero-variance channels keep the exact values bit for bit
    angular_noise = rng.normal(scale=math.sqrt(params.var_angular_vel), size=3)
    linear_noise = rng.normal(scale=math.sqrt(params.var_linear_vel), size=3)
    noisy_twist = Twist(
        twist.angular + angular_noise if params.var_angular_vel else twist.angular,
        twist.linear + linear_noise if params.var_linear_vel else twist.linear)

    # bearings: tangent-plane Gaussian per axis, then renormalise onto the sphere
    offsets = rng.normal(scale=math.sqrt(params.var_bearing), size=(n, 2))
    if params.var_bearing:
        basis = tangent_basis(exact.bearings)
        bearings = exact.bearings + np.einsum("nij,nj->ni", basis, offsets)
        bearings /= np.linalg.norm(bearings, axis=1, keepdims=True)
    else:
        bearings = exact.bearings.copy()

    depth_noise = rng.normal(scale=math.sqrt(params.var_inverse_depth), size=n)
    depths = exact.inverse_depths + depth_noise if params.var_inverse_depth \
        else exact.inverse_depths.copy()
    clamp_count = int(np.count_nonzero((depths < Z_MIN) & visible))
    depths = np.maximum(depths, Z_MIN)

    flow_noise = rng.normal(scale=math.sqrt(params.var_flow), size=(n, 3))
    if flow_mode == "analytic":
        flows = predicted_flow(exact, twist)
        if params.var_flow or params.var_bearing:
            flows = _project_tangent(bearings, flows + flow_noise)
        flow_valid = visible.copy()
    else:
        if prev_frame is None:
            flows = np.full((n, 3), np.nan)
            flow_valid = np.zeros(n, dtype=bool)
        else:
            dt = timestamp - prev_frame.timestamp
            if dt <= 0:
                raise ValueError("finite-difference flow needs increasing timestamps")
            flow_valid = visible & prev_frame.visible
            raw = (bearings - prev_frame.bearings) / dt
            flows = np.where(flow_valid[:, None],
                             _project_tangent(bearings, np.nan_to_num(raw)),
                             np.nan)

    invisible = ~visible
    bearings[invisible] = np.nan
    depths = np.where(visible, depths, np.nan)
    flows = np.where(flow_valid[:, None], flows, np.nan)

    return MeasurementFrame(timestamp=timestamp, twist=noisy_twist,
                            visible=visible, bearings=bearings,
                            inverse_depths=depths, flows=flows,
                            flow_valid=flow_valid, clamp_count=clamp_count)
