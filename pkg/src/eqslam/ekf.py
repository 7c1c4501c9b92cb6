"""Extended Kalman Filter baseline on the raw pose-plus-landmarks state.

The mean is the pose and the inertial landmark positions; the covariance
lives in a local chart with the pose error in right-invariant exponential
coordinates (theta, tau), P_true = exp(wedge(theta, tau)) @ P_hat, and plain
Euclidean landmark errors.  In this chart the propagation Jacobian of the
static-world kinematics is exactly the identity, and process noise enters
the pose block through the adjoint of the propagated pose.

Measurements are the per-landmark bearing (residual projected onto the
tangent plane at the prediction) and inverse depth.  Updates use stacked
analytic Jacobians and a Joseph-form covariance update; frozen landmarks are
excluded from the update subspace so their rows and columns stay untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import LifecycleError
from .group import MIN_SEPARATION
from .lie import Pose, Twist, se3_exp, se3_log, skew, tangent_basis
from .observer import LandmarkStatus
from .system import MeasurementFrame

POSE_DIM = 6


@dataclass(frozen=True, eq=False)
class EkfState:
    """Filter mean, covariance over initialised landmarks, lifecycle status."""

    pose: Pose
    landmarks: np.ndarray    # (n, 3), NaN until initialised
    covariance: np.ndarray   # (6 + 3m, 6 + 3m), m = len(order)
    order: tuple[int, ...]   # landmark ids in covariance block order
    status: np.ndarray       # (n,) of LandmarkStatus
    update_failures: int = 0

    def __post_init__(self):
        dim = POSE_DIM + 3 * len(self.order)
        if self.covariance.shape != (dim, dim):
            raise ValueError("covariance shape does not match landmark order")

    @property
    def n(self) -> int:
        return self.landmarks.shape[0]

    @property
    def dim(self) -> int:
        return POSE_DIM + 3 * len(self.order)

    def block(self, landmark_id: int) -> slice:
        """Covariance row/column slice of an initialised landmark."""
        i = self.order.index(landmark_id)
        start = POSE_DIM + 3 * i
        return slice(start, start + 3)


def create(pose: Pose, n: int, pose_var: float = 1e-10) -> EkfState:
    """Fresh filter with no landmarks; the pose anchors the gauge."""
    return EkfState(pose=pose, landmarks=np.full((n, 3), np.nan),
                    covariance=np.eye(POSE_DIM) * pose_var, order=(),
                    status=np.full(n, LandmarkStatus.UNINITIALIZED, dtype=int))


def apply_delta(state: EkfState, delta: np.ndarray) -> EkfState:
    """Retract a local-chart correction onto the mean."""
    delta = np.asarray(delta, dtype=float)
    pose = se3_exp(Twist.from_vector(delta[:POSE_DIM])) @ state.pose
    landmarks = state.landmarks.copy()
    for i, lm in enumerate(state.order):
        landmarks[lm] += delta[POSE_DIM + 3 * i: POSE_DIM + 3 * i + 3]
    return replace(state, pose=pose, landmarks=landmarks)


def local_difference(state_a: EkfState, state_b: EkfState) -> np.ndarray:
    """Chart coordinates of state_a relative to state_b (same landmark order)."""
    if state_a.order != state_b.order:
        raise ValueError("states have different landmark orders")
    parts = [se3_log(state_a.pose @ state_b.pose.inverse()).as_vector()]
    for lm in state_a.order:
        parts.append(state_a.landmarks[lm] - state_b.landmarks[lm])
    return np.concatenate(parts)


def ekf_predict(state: EkfState, twist: Twist, dt: float,
                var_angular_vel: float, var_linear_vel: float) -> EkfState:
    """Propagate the mean pose and inject velocity noise into the pose block.

    With the right-invariant chart the state-transition Jacobian is the
    identity; the held velocity noise maps to the pose error through the
    adjoint of the new pose, scaled by dt.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    pose = state.pose @ se3_exp(twist, dt)
    cov = state.covariance.copy()
    if var_angular_vel or var_linear_vel:
        ad = pose.adjoint()
        noise = np.diag([var_angular_vel] * 3 + [var_linear_vel] * 3)
        cov[:POSE_DIM, :POSE_DIM] += dt ** 2 * (ad @ noise @ ad.T)
    return replace(state, pose=pose, covariance=cov)


def _body_point(state: EkfState, landmark_id: int) -> np.ndarray:
    return state.pose.rotation.T @ (state.landmarks[landmark_id]
                                    - state.pose.translation)


def measurement_function(state: EkfState, landmark_id: int,
                         basis: np.ndarray) -> np.ndarray:
    """(2 tangent coords of the bearing, inverse depth) for one landmark."""
    q = _body_point(state, landmark_id)
    dist = np.linalg.norm(q)
    y = q / dist
    return np.concatenate([basis.T @ y, [1.0 / dist]])


def measurement_jacobian(state: EkfState, landmark_id: int,
                         basis: np.ndarray,
                         sub_order: tuple[int, ...]) -> np.ndarray:
    """Rows of the stacked Jacobian for one landmark over a state subspace.

    Chain rule through the body-frame point q = Rt (p - x):
      dq/dtheta = Rt skew(p),  dq/dtau = -Rt,  dq/dp = Rt,
      dy/dq = z (I - y yt),    dz/dq = -z^2 yt.
    """
    q = _body_point(state, landmark_id)
    dist = np.linalg.norm(q)
    z = 1.0 / dist
    y = q * z
    rt = state.pose.rotation.T
    dq_dtheta = rt @ skew(state.landmarks[landmark_id])
    dy_dq = z * (np.eye(3) - np.outer(y, y))
    dz_dq = -(z ** 2) * y

    dim = POSE_DIM + 3 * len(sub_order)
    rows = np.zeros((3, dim))
    top = basis.T @ dy_dq
    rows[:2, :3] = top @ dq_dtheta
    rows[:2, 3:6] = -top @ rt
    rows[2, :3] = dz_dq @ dq_dtheta
    rows[2, 3:6] = -dz_dq @ rt
    j = sub_order.index(landmark_id)
    cols = slice(POSE_DIM + 3 * j, POSE_DIM + 3 * j + 3)
    rows[:2, cols] = top @ rt
    rows[2, cols] = dz_dq @ rt
    return rows


def ekf_update(state: EkfState, frame: MeasurementFrame,
               var_bearing: float, var_inverse_depth: float) -> EkfState:
    """Joseph-form update with every visible active landmark of the frame.

    Frozen landmarks are excluded from the update subspace entirely, so
    their mean and covariance rows/columns are untouched.  A failed
    innovation-covariance solve skips the update and bumps a counter.
    """
    active_ids = tuple(lm for lm in state.order
                       if state.status[lm] == LandmarkStatus.ACTIVE)
    measured = [lm for lm in active_ids
                if frame.visible[lm]
                and np.linalg.norm(_body_point(state, lm)) > MIN_SEPARATION]
    if not measured:
        return state

    sub_idx = np.concatenate([np.arange(POSE_DIM)]
                             + [np.arange(state.block(lm).start,
                                          state.block(lm).stop)
                                for lm in active_ids]).astype(int)
    cov_sub = state.covariance[np.ix_(sub_idx, sub_idx)]
    dim = POSE_DIM + 3 * len(active_ids)

    h = np.zeros((3 * len(measured), dim))
    residual = np.zeros(3 * len(measured))
    for k, lm in enumerate(measured):
        q = _body_point(state, lm)
        dist = np.linalg.norm(q)
        y_pred = q / dist
        basis = tangent_basis(y_pred)
        h[3 * k: 3 * k + 3] = measurement_jacobian(state, lm, basis, active_ids)
        residual[3 * k: 3 * k + 2] = basis.T @ (frame.bearings[lm] - y_pred)
        residual[3 * k + 2] = frame.inverse_depths[lm] - 1.0 / dist

    noise = np.tile([var_bearing, var_bearing, var_inverse_depth], len(measured))
    hc = h @ cov_sub
    s = hc @ h.T + np.diag(noise)
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        return replace(state, update_failures=state.update_failures + 1)
    # K = C Ht S^-1 via two triangular solves
    gain = np.linalg.solve(chol.T, np.linalg.solve(chol, hc)).T

    delta = np.zeros(state.dim)
    delta[sub_idx] = gain @ residual
    new_state = apply_delta(state, delta)

    # Joseph form expanded: C - K(HC) - (HC)t Kt + K S Kt
    m = gain @ hc
    cov_new = cov_sub - m - m.T + gain @ s @ gain.T
    cov_new = 0.5 * (cov_new + cov_new.T)
    cov = state.covariance.copy()
    cov[np.ix_(sub_idx, sub_idx)] = cov_new
    return replace(new_state, covariance=cov)


def ekf_init_landmark(state: EkfState, landmark_id: int, frame: MeasurementFrame,
                      var_bearing: float, var_inverse_depth: float,
                      floor: float = 1e-4) -> EkfState:
    """Append a landmark triangulated from its first sighting.

    The new block's covariance comes from the insertion Jacobians of
    p = x + R (y / z) with respect to the pose chart and the measurement,
    with an eigenvalue floor so the block never starts singular.
    """
    if state.status[landmark_id] != LandmarkStatus.UNINITIALIZED:
        raise LifecycleError(f"landmark {landmark_id} is already initialised")
    if not frame.visible[landmark_id]:
        raise LifecycleError(f"landmark {landmark_id} is not visible")
    y = frame.bearings[landmark_id]
    z = frame.inverse_depths[landmark_id]
    point = state.pose.apply(y / z)

    j_pose = np.zeros((3, POSE_DIM))
    j_pose[:, :3] = -skew(point)
    j_pose[:, 3:] = np.eye(3)
    basis = tangent_basis(y)
    j_meas = np.zeros((3, 3))
    j_meas[:, :2] = state.pose.rotation @ basis / z
    j_meas[:, 2] = -(state.pose.rotation @ y) / z ** 2
    r_meas = np.diag([var_bearing, var_bearing, var_inverse_depth])

    cov_pp = state.covariance[:POSE_DIM, :POSE_DIM]
    block = j_pose @ cov_pp @ j_pose.T + j_meas @ r_meas @ j_meas.T
    bump = floor - np.linalg.eigvalsh(block).min()
    if bump > 0:
        block = block + bump * np.eye(3)
    cross = j_pose @ state.covariance[:POSE_DIM, :]

    dim = state.dim
    cov = np.zeros((dim + 3, dim + 3))
    cov[:dim, :dim] = state.covariance
    cov[dim:, :dim] = cross
    cov[:dim, dim:] = cross.T
    cov[dim:, dim:] = block

    landmarks = state.landmarks.copy()
    landmarks[landmark_id] = point
    status = state.status.copy()
    status[landmark_id] = LandmarkStatus.ACTIVE
    return replace(state, landmarks=landmarks, covariance=cov,
                   order=state.order + (landmark_id,), status=status)


def ekf_freeze(state: EkfState, landmark_id: int) -> EkfState:
    """Exclude a landmark from further updates; its estimate stays fixed."""
    if state.status[landmark_id] != LandmarkStatus.ACTIVE:
        raise LifecycleError(f"landmark {landmark_id} is not active")
    status = state.status.copy()
    status[landmark_id] = LandmarkStatus.FROZEN
    return replace(state, status=status)


def ekf_unfreeze(state: EkfState, landmark_id: int) -> EkfState:
    if state.status[landmark_id] != LandmarkStatus.FROZEN:
        raise LifecycleError(f"landmark {landmark_id} is not frozen")
    status = state.status.copy()
    status[landmark_id] = LandmarkStatus.ACTIVE
    return replace(state, status=status)
