"""Rigid transforms, their twist parameterization, and pinhole projection.

Twists are ordered (tx, ty, tz, rx, ry, rz): translation in meters first,
then rotation-vector coordinates in radians. The exponential map uses the
closed form (Rodrigues rotation, left-Jacobian translation) with a series
fallback below ``SMALL_ANGLE``. Pose gradients are always taken with
respect to a left-multiplied local increment exp(delta) at the identity,
which keeps the derivative exact without differentiating the series.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import kernels
from .errors import DegenerateRotationError, InvalidArgumentError

EPS_DEPTH = 1e-6
SMALL_ANGLE = 1e-8
_ORTHO_TOL = 1e-9


def _basis() -> np.ndarray:
    gens = np.zeros((6, 4, 4))
    for i in range(3):
        gens[i, i, 3] = 1.0
    gens[3, 1, 2], gens[3, 2, 1] = -1.0, 1.0
    gens[4, 0, 2], gens[4, 2, 0] = 1.0, -1.0
    gens[5, 0, 1], gens[5, 1, 0] = -1.0, 1.0
    return gens


#: Generator matrices B_i of the twist parameterization, translation first.
SE3_GENERATORS = _basis()
SE3_GENERATORS.setflags(write=False)


def _skew(w: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


@dataclasses.dataclass(frozen=True)
class Twist:
    """Six-vector twist coordinates (tx, ty, tz, rx, ry, rz)."""

    vec: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vec, dtype=np.float64).reshape(-1)
        if vec.shape != (6,):
            raise InvalidArgumentError(f"twist must have 6 components, got {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise InvalidArgumentError("twist components must be finite")
        object.__setattr__(self, "vec", vec)

    @property
    def translation(self) -> np.ndarray:
        return self.vec[:3]

    @property
    def rotation(self) -> np.ndarray:
        return self.vec[3:]

    @classmethod
    def zero(cls) -> "Twist":
        return cls(np.zeros(6))


@dataclasses.dataclass(frozen=True)
class Pose:
    """Rigid transform p_out = R @ p + t with orthonormality enforced."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64)
        t = np.asarray(self.t, dtype=np.float64).reshape(-1)
        if R.shape != (3, 3) or t.shape != (3,):
            raise InvalidArgumentError("pose needs a 3x3 rotation and a 3-vector")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise InvalidArgumentError("pose entries must be finite")
        if np.max(np.abs(R.T @ R - np.eye(3))) > _ORTHO_TOL:
            raise InvalidArgumentError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise InvalidArgumentError("rotation determinant differs from 1")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise InvalidArgumentError("expected a 4x4 matrix")
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.R
        out[:3, 3] = self.t
        return out

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other: (self o other)(p) = self(other(p))."""
        return Pose(self.R @ other.R, self.R @ other.t + self.t)

    def inverse(self) -> "Pose":
        return Pose(self.R.T, -self.R.T @ self.t)

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.R.T + self.t


@dataclasses.dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; distances in pixels, image size in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidArgumentError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise InvalidArgumentError("principal point must lie inside the image")

    @property
    def fov_h_deg(self) -> float:
        return float(np.degrees(2.0 * np.arctan(self.width / (2.0 * self.fx))))

    @property
    def fov_v_deg(self) -> float:
        return float(np.degrees(2.0 * np.arctan(self.height / (2.0 * self.fy))))


@dataclasses.dataclass(frozen=True)
class ProjectedPoints:
    """Continuous pixel coordinates, camera-frame depth, and validity mask.

    Rows stay index-aligned with the input points; out-of-view points are
    masked, never dropped.
    """

    uv: np.ndarray
    depth: np.ndarray
    valid: np.ndarray

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.valid))


def _as_twist_vec(v) -> np.ndarray:
    if isinstance(v, Twist):
        return v.vec
    vec = np.asarray(v, dtype=np.float64).reshape(-1)
    if vec.shape != (6,):
        raise InvalidArgumentError(f"twist must have 6 components, got {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise InvalidArgumentError("twist components must be finite")
    return vec


def _rotation_terms(r: np.ndarray):
    """Rodrigues and left-Jacobian coefficient pairs, series-safe near 0."""
    theta = float(np.linalg.norm(r))
    if theta < SMALL_ANGLE:
        # leading series terms; error O(theta^4) is below double roundoff here
        a = 1.0 - theta**2 / 6.0
        b = 0.5 - theta**2 / 24.0
        c = 1.0 / 6.0 - theta**2 / 120.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta**2
        c = (theta - np.sin(theta)) / theta**3
    return theta, a, b, c


def se3_exp(v) -> Pose:
    """Exponential map of a twist: exp(sum_i v_i B_i) as a Pose."""
    vec = _as_twist_vec(v)
    rho, r = vec[:3], vec[3:]
    _, a, b, c = _rotation_terms(r)
    K = _skew(r)
    K2 = K @ K
    R = np.eye(3) + a * K + b * K2
    V = np.eye(3) + b * K + c * K2
    return Pose(R, V @ rho)


def se3_log(p: Pose) -> Twist:
    """Inverse of se3_exp; rejects rotations at or within 1e-6 of pi."""
    trace = float(np.trace(p.R))
    cos_theta = np.clip((trace - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    if theta >= np.pi - 1e-6:
        raise DegenerateRotationError("rotation angle too close to pi for a unique log")
    vee = np.array([
        p.R[2, 1] - p.R[1, 2],
        p.R[0, 2] - p.R[2, 0],
        p.R[1, 0] - p.R[0, 1],
    ])
    if theta < SMALL_ANGLE:
        r = 0.5 * vee * (1.0 + theta**2 / 6.0)
    else:
        r = theta / (2.0 * np.sin(theta)) * vee
    K = _skew(r)
    if theta < SMALL_ANGLE:
        coeff = 1.0 / 12.0
    else:
        coeff = (1.0 - theta * np.cos(theta / 2.0) / (2.0 * np.sin(theta / 2.0))) / theta**2
    V_inv = np.eye(3) - 0.5 * K + coeff * (K @ K)
    out = np.empty(6)
    out[:3] = V_inv @ p.t
    out[3:] = r
    return Twist(out)


def project(points: np.ndarray, pose: Pose, intrinsics: CameraIntrinsics) -> ProjectedPoints:
    """Transform points by pose and pinhole-project them.

    A point is valid iff its transformed depth exceeds EPS_DEPTH and its
    pixel falls inside the closed rectangle [0, W-1] x [0, H-1].
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
        raise InvalidArgumentError("points must be a nonempty (N, 3) array")
    uv, depth, valid = kernels.project_points(
        pts, np.ascontiguousarray(pose.R), np.ascontiguousarray(pose.t),
        intrinsics.fx, intrinsics.fy, intrinsics.cx, intrinsics.cy,
        intrinsics.width, intrinsics.height, EPS_DEPTH,
    )
    return ProjectedPoints(uv=uv, depth=depth, valid=valid)


def project_pullback(points: np.ndarray, pose: Pose, intrinsics: CameraIntrinsics,
                     grad_uv: np.ndarray, valid: np.ndarray | None = None) -> np.ndarray:
    """Pull pixel-space gradients back to the six local pose coordinates.

    Returns d(sum_i <grad_uv[i], uv[i]>)/d(delta) evaluated at delta = 0
    for the reparameterization pose' = se3_exp(delta) o pose. Rows where
    valid is False are ignored; valid defaults to the projection's own
    validity mask.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    grad = np.ascontiguousarray(grad_uv, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidArgumentError("points must be (N, 3)")
    if grad.shape != (pts.shape[0], 2):
        raise InvalidArgumentError("grad_uv must align with points as (N, 2)")
    if valid is None:
        valid = project(pts, pose, intrinsics).valid
    valid = np.ascontiguousarray(valid)
    if valid.shape != (pts.shape[0],):
        raise InvalidArgumentError("valid mask must align with points")
    return kernels.project_pullback(
        pts, np.ascontiguousarray(pose.R), np.ascontiguousarray(pose.t),
        intrinsics.fx, intrinsics.fy, grad, valid.view(np.uint8),
    )
