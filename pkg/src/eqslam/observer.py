"""Equivariant nonlinear observer on the SLAM symmetry group.

The estimator state is a group element anchored to a fixed reference
configuration.  Each step lifts the measured velocities to the Lie algebra
(internal model) and subtracts an innovation built from the output error
e = rho(X^-1, measured outputs):

  - per-landmark bearing correction  -k_bearing * (e_y x ref_bearing)
  - per-landmark depth correction    -k_depth * (e_z - ref_depth) / e_z
  - pose correction from the least-squares twist that best explains the
    measured flows given the estimated outputs, minus the measured twist.

Constant gains only; no covariance is propagated.  Per-step cost is linear
in the number of landmarks.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from .errors import DegenerateConfigurationError, LifecycleError
from .group import (
    GroupElement,
    Output,
    TotalState,
    VelocityMeasurement,
    enforce_tangency,
    output_action,
    MIN_SEPARATION,
)
from .lie import ORTHOGONALITY_TOL, Pose, Twist, orthonormalize, rotation_defect, se3_exp, skew, so3_exp
from .system import MeasurementFrame, Z_MIN, measure

# Condition-number guard on the 6x6 normal-equation matrix of the pose
# correction.  Beyond this the correction is zeroed and a degeneracy flagged,
# so degenerate geometry (too few or collinear landmarks) degrades gracefully.
KAPPA_MAX = 1e8

# Trust region on the applied per-step log-scale correction.  The depth
# correction divides by the output error, so a single clamped inverse-depth
# outlier can request a correction rate in the thousands; integrating that
# with a held step would underflow the multiplicative scale update.  Honest
# corrections are bounded by the gain (|correction| <= k_depth times an O(1)
# factor away from outliers), so the cap is a small multiple of k_depth * dt
# with an absolute ceiling.
DEPTH_TRUST_FACTOR = 5.0
MAX_DEPTH_LOG_STEP = 2.0


class LandmarkStatus(IntEnum):
    UNINITIALIZED = 0
    ACTIVE = 1
    FROZEN = 2


@dataclass(frozen=True, eq=False)
class Innovation:
    """Correction terms in the Lie algebra; zero rows for idle landmarks."""

    pose_correction: Twist
    bearing_corrections: np.ndarray  # (n, 3), axis-angle rate vectors
    depth_corrections: np.ndarray    # (n,)
    pose_degenerate: bool = False


@dataclass(frozen=True, eq=False)
class ObserverState:
    """Group-valued estimate plus the reference configuration it is anchored to.

    ``ref_bearings`` / ``ref_inverse_depths`` cache the reference outputs of
    each landmark (fixed once the landmark is created).  Frozen landmarks keep
    their last reconstructed inertial position in ``frozen_positions``.
    """

    element: GroupElement
    ref_pose: Pose
    ref_landmarks: np.ndarray       # (n, 3), NaN until initialised
    ref_bearings: np.ndarray        # (n, 3)
    ref_inverse_depths: np.ndarray  # (n,)
    frozen_positions: np.ndarray    # (n, 3), NaN unless frozen
    status: np.ndarray              # (n,) of LandmarkStatus
    k_bearing: float
    k_depth: float
    k_pose: float
    degeneracy_count: int = 0

    def __post_init__(self):
        if min(self.k_bearing, self.k_depth, self.k_pose) <= 0:
            raise ValueError("gains must be positive")

    @property
    def n(self) -> int:
        return self.element.n

    @property
    def active(self) -> np.ndarray:
        return self.status == LandmarkStatus.ACTIVE

    @property
    def initialized(self) -> np.ndarray:
        return self.status != LandmarkStatus.UNINITIALIZED


def from_reference(reference: TotalState, k_bearing: float, k_depth: float,
                   k_pose: float) -> ObserverState:
    """Observer with every landmark active, anchored to a full reference."""
    ref_out = measure(reference)
    n = reference.n
    return ObserverState(
        element=GroupElement.identity(n),
        ref_pose=reference.pose,
        ref_landmarks=reference.landmarks.copy(),
        ref_bearings=ref_out.bearings,
        ref_inverse_depths=ref_out.inverse_depths,
        frozen_positions=np.full((n, 3), np.nan),
        status=np.full(n, LandmarkStatus.ACTIVE, dtype=int),
        k_bearing=k_bearing, k_depth=k_depth, k_pose=k_pose)


def empty(ref_pose: Pose, n: int, k_bearing: float, k_depth: float,
          k_pose: float) -> ObserverState:
    """Observer with no landmarks yet; they join via initialize_landmark."""
    return ObserverState(
        element=GroupElement.identity(n),
        ref_pose=ref_pose,
        ref_landmarks=np.full((n, 3), np.nan),
        ref_bearings=np.full((n, 3), np.nan),
        ref_inverse_depths=np.full(n, np.nan),
        frozen_positions=np.full((n, 3), np.nan),
        status=np.full(n, LandmarkStatus.UNINITIALIZED, dtype=int),
        k_bearing=k_bearing, k_depth=k_depth, k_pose=k_pose)


def estimated_pose(state: ObserverState) -> Pose:
    return state.ref_pose @ state.element.pose


def _estimated_output_arrays(state: ObserverState) -> tuple[np.ndarray, np.ndarray]:
    """(bearing, inverse depth) estimates for all slots, NaN where uninitialised."""
    y = np.einsum("nji,nj->ni", state.element.rotations, state.ref_bearings)
    norms = np.linalg.norm(y, axis=1, keepdims=True)
    y = y / np.where(norms > 0, norms, 1.0)
    z = state.element.scales * state.ref_inverse_depths
    return y, z


def estimated_output(state: ObserverState) -> Output:
    """Outputs the current estimate predicts for the reference landmarks."""
    if not bool(state.initialized.all()):
        raise LifecycleError("estimated_output requires all landmarks initialised")
    return output_action(state.element,
                         Output(state.ref_bearings, state.ref_inverse_depths))


def output_error(state: ObserverState, output: Output) -> Output:
    """Right-translated output error e = rho(X^-1, measured outputs)."""
    if output.n != state.n:
        raise LifecycleError("output landmark count does not match observer")
    if not bool(state.initialized.all()):
        raise LifecycleError("output_error requires all landmarks initialised")
    return output_action(state.element.inverse(), output)


def lyapunov_components(state: ObserverState,
                        frame: MeasurementFrame) -> tuple[np.ndarray, np.ndarray]:
    """Per-landmark storages (bearing, inverse depth); NaN where not measured.

    bearing storage = |e_y - ref_bearing|^2 / 2, depth storage analogous.
    """
    mask = state.active & frame.visible
    l_y = np.full(state.n, np.nan)
    l_z = np.full(state.n, np.nan)
    if not mask.any():
        return l_y, l_z
    rot = state.element.rotations[mask]
    e_y = np.einsum("nij,nj->ni", rot, frame.bearings[mask])
    e_z = frame.inverse_depths[mask] / state.element.scales[mask]
    l_y[mask] = 0.5 * np.sum((e_y - state.ref_bearings[mask]) ** 2, axis=1)
    l_z[mask] = 0.5 * (e_z - state.ref_inverse_depths[mask]) ** 2
    return l_y, l_z


def _participating(state: ObserverState, frame: MeasurementFrame) -> np.ndarray:
    """Landmarks that take part in this step: active, visible, flow in hand."""
    return state.active & frame.visible & frame.flow_valid


def innovation(state: ObserverState, frame: MeasurementFrame) -> Innovation:
    """Correction terms for one frame.

    Landmarks that are frozen, invisible, or lack a valid flow contribute
    nothing and are excluded from the pose-correction sums.  The 6x6
    normal-equation matrix of the pose correction is guarded by a condition
    number cap; a degenerate system yields a zero pose correction and a flag.
    """
    mask = _participating(state, frame)
    if not mask.any():
        raise LifecycleError("innovation needs at least one active visible landmark")

    n = state.n
    y = frame.bearings[mask]
    z = frame.inverse_depths[mask]
    rot = state.element.rotations[mask]
    scale = state.element.scales[mask]
    ref_y = state.ref_bearings[mask]
    ref_z = state.ref_inverse_depths[mask]

    e_y = np.einsum("nij,nj->ni", rot, y)
    e_z = z / scale

    bearing = np.zeros((n, 3))
    depth = np.zeros(n)
    bearing[mask] = -state.k_bearing * np.cross(e_y, ref_y)
    depth[mask] = -state.k_depth * (e_z - ref_z) / np.maximum(e_z, Z_MIN)

    # estimated outputs drive the pose correction
    y_hat = np.einsum("nji,nj->ni", rot, ref_y)
    y_hat /= np.linalg.norm(y_hat, axis=1, keepdims=True)
    z_hat = scale * ref_z

    flows = enforce_tangency(y, frame.flows[mask])
    y_sk = skew(y_hat)
    proj = np.eye(3) - y_hat[:, :, None] * y_hat[:, None, :]
    gram = np.zeros((6, 6))
    gram[:3, :3] = proj.sum(axis=0)
    gram[:3, 3:] = (z_hat[:, None, None] * y_sk).sum(axis=0)
    gram[3:, :3] = -gram[:3, 3:]
    gram[3:, 3:] = ((z_hat ** 2)[:, None, None] * proj).sum(axis=0)
    rhs = np.concatenate([
        -np.einsum("nij,nj->i", y_sk, flows),
        -(z_hat[:, None] * flows).sum(axis=0)])

    # the normal-equation matrix is symmetric PSD, so one eigendecomposition
    # gives both the rank and the conditioning
    eigvals = np.linalg.eigvalsh(gram)
    degenerate = bool(eigvals[0] <= eigvals[-1] / KAPPA_MAX)
    if degenerate:
        pose_corr = Twist.zero()
    else:
        residual_twist = np.linalg.solve(gram, rhs) - frame.twist.as_vector()
        pose_corr = Twist.from_vector(
            -state.k_pose * (state.element.pose.adjoint() @ residual_twist))
    return Innovation(pose_correction=pose_corr, bearing_corrections=bearing,
                      depth_corrections=depth, pose_degenerate=bool(degenerate))


def step(state: ObserverState, frame: MeasurementFrame, dt: float,
         integrator: str = "geometric") -> ObserverState:
    """One integration step driven by a measurement frame.

    The pose part always propagates with the measured twist.  Landmarks
    propagate and correct only when they participate in this frame; frozen
    and unseen landmarks are untouched.  ``geometric`` updates move along
    group exponentials so the state stays exactly on the group; ``additive``
    is a plain Euler step followed by reprojection.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if integrator not in ("geometric", "additive"):
        raise ValueError(f"unknown integrator {integrator!r}")

    mask = _participating(state, frame)
    if mask.any():
        innov = innovation(state, frame)
        degenerate_step = innov.pose_degenerate
    else:
        # nothing measurable this frame: propagate the pose, flag degeneracy
        innov = Innovation(Twist.zero(), np.zeros((state.n, 3)), np.zeros(state.n))
        degenerate_step = True

    # lift of the measured velocities (internal model), participating slots only
    lift_rot = np.zeros((state.n, 3))
    lift_scale = np.zeros(state.n)
    if mask.any():
        y = frame.bearings[mask]
        flows = enforce_tangency(y, frame.flows[mask])
        lift_rot[mask] = np.cross(flows, y)
        lift_scale[mask] = frame.inverse_depths[mask] * (y @ frame.twist.linear)

    cap = min(DEPTH_TRUST_FACTOR * state.k_depth * dt, MAX_DEPTH_LOG_STEP)
    raw_depth_step = innov.depth_corrections[mask] * dt
    depth_step = np.clip(raw_depth_step, -cap, cap)
    guard_events = int(degenerate_step) + int(np.count_nonzero(
        raw_depth_step != depth_step))

    rotations = state.element.rotations
    scales = state.element.scales
    if integrator == "geometric":
        corr = se3_exp(innov.pose_correction, -dt)
        advance = se3_exp(frame.twist, dt)
        half_rot = corr.rotation @ state.element.pose.rotation
        pose = Pose(half_rot @ advance.rotation,
                    half_rot @ advance.translation
                    + corr.rotation @ state.element.pose.translation
                    + corr.translation)
        new_rot = rotations.copy()
        m = int(np.count_nonzero(mask))
        exps = so3_exp(np.concatenate([-innov.bearing_corrections[mask],
                                       lift_rot[mask]]), dt)
        new_rot[mask] = exps[:m] @ rotations[mask] @ exps[m:]
        new_scale = scales.copy()
        new_scale[mask] = scales[mask] * np.exp(lift_scale[mask] * dt - depth_step)
    else:
        pose_mat = state.element.pose.matrix()
        pose_mat = pose_mat + dt * (pose_mat @ frame.twist.wedge()
                                    - innov.pose_correction.wedge() @ pose_mat)
        pose = Pose(orthonormalize(pose_mat[:3, :3]), pose_mat[:3, 3])
        new_rot = rotations.copy()
        upd = (rotations[mask] @ skew(lift_rot[mask])
               - skew(innov.bearing_corrections[mask]) @ rotations[mask])
        new_rot[mask] = orthonormalize(rotations[mask] + dt * upd)
        new_scale = scales.copy()
        new_scale[mask] = np.maximum(
            scales[mask] * (1.0 + dt * lift_scale[mask] - depth_step), 1e-12)

    if mask.any() and rotation_defect(new_rot[mask]) > ORTHOGONALITY_TOL:
        new_rot[mask] = orthonormalize(new_rot[mask])
    if rotation_defect(pose.rotation) > ORTHOGONALITY_TOL:
        pose = pose.renormalized()

    element = GroupElement(pose, new_rot, new_scale)
    return replace(state, element=element,
                   degeneracy_count=state.degeneracy_count + guard_events)


def initialize_landmark(state: ObserverState, index: int,
                        frame: MeasurementFrame) -> ObserverState:
    """Create a landmark from its first sighting.

    The reference configuration gains the point whose reconstruction through
    the current group element equals the triangulation of the measurement
    with the current pose estimate; its group components start at identity,
    so the estimated output right after initialisation equals the measurement.
    """
    if state.status[index] != LandmarkStatus.UNINITIALIZED:
        raise LifecycleError(f"landmark {index} is already initialised")
    if not frame.visible[index]:
        raise LifecycleError(f"landmark {index} is not visible in this frame")
    y = frame.bearings[index]
    z = frame.inverse_depths[index]
    ref_landmarks = state.ref_landmarks.copy()
    ref_landmarks[index] = state.ref_pose.apply(y / z)
    ref_bearings = state.ref_bearings.copy()
    ref_bearings[index] = y
    ref_depths = state.ref_inverse_depths.copy()
    ref_depths[index] = z
    status = state.status.copy()
    status[index] = LandmarkStatus.ACTIVE
    return replace(state, ref_landmarks=ref_landmarks, ref_bearings=ref_bearings,
                   ref_inverse_depths=ref_depths, status=status)


def freeze(state: ObserverState, index: int) -> ObserverState:
    """Pin the landmark's current inertial estimate until it is seen again."""
    if state.status[index] != LandmarkStatus.ACTIVE:
        raise LifecycleError(f"landmark {index} is not active")
    _, positions = estimated_positions(state)
    frozen = state.frozen_positions.copy()
    frozen[index] = positions[index]
    status = state.status.copy()
    status[index] = LandmarkStatus.FROZEN
    return replace(state, frozen_positions=frozen, status=status)


def unfreeze(state: ObserverState, index: int) -> ObserverState:
    """Resume estimation of a frozen landmark from its pinned position.

    The reference point is re-anchored so that the reconstruction through the
    current group element (with identity landmark components) reproduces the
    pinned position exactly; the observer equations then pull it toward the
    new measurements.
    """
    if state.status[index] != LandmarkStatus.FROZEN:
        raise LifecycleError(f"landmark {index} is not frozen")
    pinned = state.frozen_positions[index]
    pose = estimated_pose(state)
    body = pose.rotation.T @ (pinned - pose.translation)
    dist = np.linalg.norm(body)
    if dist < MIN_SEPARATION:
        raise DegenerateConfigurationError(
            "frozen landmark coincides with the current pose estimate")
    ref_landmarks = state.ref_landmarks.copy()
    ref_landmarks[index] = state.ref_pose.apply(body)
    ref_bearings = state.ref_bearings.copy()
    ref_bearings[index] = body / dist
    ref_depths = state.ref_inverse_depths.copy()
    ref_depths[index] = 1.0 / dist
    rotations = state.element.rotations.copy()
    rotations[index] = np.eye(3)
    scales = state.element.scales.copy()
    scales[index] = 1.0
    frozen = state.frozen_positions.copy()
    frozen[index] = np.nan
    status = state.status.copy()
    status[index] = LandmarkStatus.ACTIVE
    element = GroupElement(state.element.pose, rotations, scales)
    return replace(state, element=element, ref_landmarks=ref_landmarks,
                   ref_bearings=ref_bearings, ref_inverse_depths=ref_depths,
                   frozen_positions=frozen, status=status)


def estimated_positions(state: ObserverState) -> tuple[Pose, np.ndarray]:
    """Pose estimate and per-landmark inertial estimates (NaN if uninitialised).

    Active landmarks reconstruct through the group action; frozen landmarks
    report their pinned positions.
    """
    pose = estimated_pose(state)
    positions = np.full((state.n, 3), np.nan)
    act = state.active
    if act.any():
        body = ((state.ref_landmarks[act] - state.ref_pose.translation)
                @ state.ref_pose.rotation)
        twisted = np.einsum("nij,ni->nj", state.element.rotations[act], body)
        twisted /= state.element.scales[act][:, None]
        positions[act] = twisted @ pose.rotation.T + pose.translation
    fro = state.status == LandmarkStatus.FROZEN
    positions[fro] = state.frozen_positions[fro]
    return pose, positions


def reconstruct(state: ObserverState) -> TotalState:
    """Current configuration estimate; requires every landmark initialised."""
    if not bool(state.initialized.all()):
        raise LifecycleError("reconstruct requires all landmarks initialised")
    pose, positions = estimated_positions(state)
    return TotalState(pose, positions)
