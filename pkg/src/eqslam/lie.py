"""Matrix Lie-group primitives for SO(3) and SE(3).

Rotations are stored as plain 3x3 matrices because every formula downstream
(bearing rotations, skew products, adjoints) is written in matrix form.
All functions accept batched input where it is natural: a trailing axis of
size 3 for vectors, trailing (3, 3) for rotation stacks.

Conventions: 6-vectors for twists and adjoints are ordered (angular, linear).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Fixed library tolerances, exposed so tests can assert against the same values.
ORTHOGONALITY_TOL = 1e-9   # max |R Rt - I| entry before renormalisation is due
DETERMINANT_TOL = 1e-9     # |det R - 1| bound for a valid rotation
UNIT_TOL = 1e-9            # bearing vectors must be unit within this
SMALL_ANGLE = 1e-8         # below this angle, series replace the closed forms


def skew(v: np.ndarray) -> np.ndarray:
    """Map vectors to antisymmetric matrices so that skew(v) @ w = v x w."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


def vee(m: np.ndarray) -> np.ndarray:
    """Inverse of :func:`skew`."""
    m = np.asarray(m, dtype=float)
    return np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


def projector(y: np.ndarray) -> np.ndarray:
    """Orthogonal projector I - y yt onto the tangent plane of a unit vector."""
    y = np.asarray(y, dtype=float)
    norms = np.linalg.norm(y, axis=-1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOL):
        raise ValueError("projector requires unit vectors "
                         f"(max norm defect {np.abs(norms - 1.0).max():.3e})")
    return np.eye(3) - y[..., :, None] * y[..., None, :]


def _sin_coeffs(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rodrigues coefficients sin(t)/t and (1-cos(t))/t^2 with series fallback."""
    theta = np.asarray(theta, dtype=float)
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    t2 = theta * theta
    a = np.where(small, 1.0 - t2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - t2 / 24.0, (1.0 - np.cos(safe)) / (safe * safe))
    return a, b


def so3_exp(omega: np.ndarray, dt: float = 1.0) -> np.ndarray:
    """Rodrigues exponential of dt * skew(omega); batched over leading axes."""
    w = np.asarray(omega, dtype=float) * dt
    theta = np.linalg.norm(w, axis=-1)
    a, b = _sin_coeffs(theta)
    k = skew(w)
    k2 = k @ k
    eye = np.zeros(k.shape)
    eye[..., 0, 0] = eye[..., 1, 1] = eye[..., 2, 2] = 1.0
    return eye + a[..., None, None] * k + b[..., None, None] * k2


def so3_left_jacobian(omega: np.ndarray) -> np.ndarray:
    """Left Jacobian of SO(3), used by the closed-form SE(3) exponential."""
    w = np.asarray(omega, dtype=float)
    theta = np.linalg.norm(w, axis=-1)
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    t2 = theta * theta
    b = np.where(small, 0.5 - t2 / 24.0, (1.0 - np.cos(safe)) / (safe * safe))
    c = np.where(small, 1.0 / 6.0 - t2 / 120.0, (safe - np.sin(safe)) / (safe ** 3))
    k = skew(w)
    k2 = k @ k
    eye = np.zeros(k.shape)
    eye[..., 0, 0] = eye[..., 1, 1] = eye[..., 2, 2] = 1.0
    return eye + b[..., None, None] * k + c[..., None, None] * k2


def so3_log(rot: np.ndarray) -> np.ndarray:
    """Rotation vector of a single rotation matrix (angle in [0, pi])."""
    rot = np.asarray(rot, dtype=float)
    cos_angle = np.clip(0.5 * (np.trace(rot) - 1.0), -1.0, 1.0)
    angle = float(np.arccos(cos_angle))
    axis_times_sin = 0.5 * np.array(
        [rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]])
    if angle < SMALL_ANGLE:
        return axis_times_sin
    if np.pi - angle < 1e-6:
        # near pi the off-diagonal differences vanish; recover the axis from
        # the symmetric part R + I = 2 (a at + ...) / ...
        diag = np.diag(rot)
        idx = int(np.argmax(diag))
        axis = np.zeros(3)
        axis[idx] = np.sqrt(max(0.0, (diag[idx] + 1.0) / 2.0))
        for j in range(3):
            if j != idx:
                axis[j] = rot[idx, j] / (2.0 * axis[idx])
        axis /= np.linalg.norm(axis)
        if axis @ axis_times_sin < 0:
            axis = -axis
        return axis * angle
    return axis_times_sin * angle / np.sin(angle)


def orthonormalize(rot: np.ndarray) -> np.ndarray:
    """Project to the nearest rotation (polar factor via SVD); batched."""
    u, _, vt = np.linalg.svd(np.asarray(rot, dtype=float))
    d = u @ vt
    det = np.linalg.det(d)
    flip = np.ones(u.shape[:-2] + (3,))
    flip[..., 2] = np.sign(det)
    return (u * flip[..., None, :]) @ vt


def rotation_defect(rot: np.ndarray) -> float:
    """Worst orthogonality defect max |R Rt - I| over a batch."""
    rot = np.asarray(rot, dtype=float)
    err = rot @ np.swapaxes(rot, -1, -2) - np.eye(3)
    return float(np.abs(err).max())


def tangent_basis(y: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis (..., 3, 2) of the tangent plane at y."""
    y = np.asarray(y, dtype=float)
    helper = np.zeros_like(y)
    use_z = np.abs(y[..., 2]) < 0.9
    helper[..., 2] = np.where(use_z, 1.0, 0.0)
    helper[..., 0] = np.where(use_z, 0.0, 1.0)
    b1 = np.cross(helper, y)
    b1 /= np.linalg.norm(b1, axis=-1, keepdims=True)
    b2 = np.cross(y, b1)
    return np.stack([b1, b2], axis=-1)


def random_rotation(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-ish random rotations via QR of a Gaussian matrix."""
    shape = (3, 3) if size is None else (size, 3, 3)
    q, r = np.linalg.qr(rng.normal(size=shape))
    sign = np.sign(np.einsum("...ii->...i", r))
    sign = np.where(sign == 0, 1.0, sign)
    q = q * sign[..., None, :]
    det = np.linalg.det(q)
    flip = np.ones(q.shape[:-2] + (3,))
    flip[..., 2] = det
    return q * flip[..., None, :]


def _validate_rotation(rot: np.ndarray, what: str) -> None:
    if rot.shape != (3, 3):
        raise ValueError(f"{what} must be a 3x3 matrix, got shape {rot.shape}")
    if rotation_defect(rot) > ORTHOGONALITY_TOL:
        raise ValueError(f"{what} is not orthogonal within {ORTHOGONALITY_TOL}")
    if abs(np.linalg.det(rot) - 1.0) > DETERMINANT_TOL:
        raise ValueError(f"{what} does not have unit determinant")


@dataclass(frozen=True, eq=False)
class Twist:
    """Body-frame velocity: angular rate (rad/s) and linear velocity (m/s)."""

    angular: np.ndarray
    linear: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "angular", np.array(self.angular, dtype=float))
        object.__setattr__(self, "linear", np.array(self.linear, dtype=float))
        if self.angular.shape != (3,) or self.linear.shape != (3,):
            raise ValueError("Twist components must be 3-vectors")

    @classmethod
    def zero(cls) -> "Twist":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "Twist":
        v = np.asarray(v, dtype=float)
        return cls(v[:3], v[3:6])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.angular, self.linear])

    def wedge(self) -> np.ndarray:
        """4x4 matrix form [[skew(angular), linear], [0, 0]]."""
        out = np.zeros((4, 4))
        out[:3, :3] = skew(self.angular)
        out[:3, 3] = self.linear
        return out

    @classmethod
    def from_wedge(cls, m: np.ndarray) -> "Twist":
        m = np.asarray(m, dtype=float)
        return cls(vee(m[:3, :3]), m[:3, 3])


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid-body transform: rotation matrix plus translation (metres)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=float)
        trans = np.array(self.translation, dtype=float)
        _validate_rotation(rot, "Pose.rotation")
        if trans.shape != (3,):
            raise ValueError("Pose.translation must be a 3-vector")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def random(cls, rng: np.random.Generator, translation_scale: float = 1.0) -> "Pose":
        return cls(random_rotation(rng), rng.normal(scale=translation_scale, size=3))

    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4) or np.abs(m[3] - np.array([0, 0, 0, 1.0])).max() > 1e-9:
            raise ValueError("expected a homogeneous 4x4 matrix")
        return cls(m[:3, :3], m[:3, 3])

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points (..., 3) by R p + x."""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def adjoint(self) -> np.ndarray:
        """6x6 adjoint in (angular, linear) ordering: Ad @ vee(U) = vee(A U A^-1)."""
        out = np.zeros((6, 6))
        out[:3, :3] = self.rotation
        out[3:, :3] = skew(self.translation) @ self.rotation
        out[3:, 3:] = self.rotation
        return out

    def renormalized(self) -> "Pose":
        """Reproject the rotation onto SO(3); use when defects accumulate."""
        return Pose(orthonormalize(self.rotation), self.translation)


def se3_exp(twist: Twist, dt: float = 1.0) -> Pose:
    """Closed-form SE(3) exponential of dt * wedge(twist)."""
    w = twist.angular * dt
    v = twist.linear * dt
    return Pose(so3_exp(w), so3_left_jacobian(w) @ v)


def se3_log(pose: Pose) -> Twist:
    """Inverse of :func:`se3_exp` (dt = 1)."""
    w = so3_log(pose.rotation)
    theta = np.linalg.norm(w)
    if theta < SMALL_ANGLE:
        jinv = np.eye(3) - 0.5 * skew(w) + skew(w) @ skew(w) / 12.0
    else:
        k = skew(w)
        coeff = (1.0 - theta * np.sin(theta) / (2.0 * (1.0 - np.cos(theta)))) / theta ** 2
        jinv = np.eye(3) - 0.5 * k + coeff * (k @ k)
    return Twist(w, jinv @ pose.translation)
