"""Procedural labeled scenes with ray-cast LiDAR and camera views.

Scenes are a ground plane plus randomly placed boxes and cylinders, each
carrying a class ID. Both sensors see the same geometry through
nearest-hit ray casting, so LiDAR point labels and camera pixel labels
are consistent up to genuine occlusion and pixel quantization. Pixels
whose ray escapes the scene get the ground/background class 0.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .calibrator import CalibFrame, PointCloudFrame
from .errors import InvalidArgumentError
from .geometry import CameraIntrinsics, Pose, se3_exp, se3_log
from .initializer import SphericalConfig
from .sampling import LabelImage, to_one_hot

GROUND_CLASS = 0
_TMIN = 0.35


def canonical_sensor_rotation() -> np.ndarray:
    """LiDAR (x fwd, y left, z up) to camera (x right, y down, z fwd)."""
    return np.array([
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0],
    ])


def default_ground_truth_pose() -> Pose:
    """Camera near the LiDAR, slightly rotated off the canonical mount."""
    base = Pose(canonical_sensor_rotation(), np.array([0.06, -0.04, -0.11]))
    return se3_exp([0.0, 0.0, 0.0, 0.02, -0.015, 0.01]).compose(base)


def default_intrinsics() -> CameraIntrinsics:
    # moderate field of view keeps the range-image registration honest
    return CameraIntrinsics(fx=1000.0, fy=1000.0, cx=640.0, cy=360.0,
                            width=1280, height=720)


def default_lidar_config(intrinsics: CameraIntrinsics | None = None) -> SphericalConfig:
    intr = intrinsics if intrinsics is not None else default_intrinsics()
    return SphericalConfig.with_camera(
        lidar_fov_h_deg=360.0, lidar_fov_v_deg=70.0,
        lidar_rows=64, lidar_cols=800, intrinsics=intr,
    )


@dataclasses.dataclass(frozen=True)
class SceneSpec:
    """Everything needed to reproduce a synthetic bundle."""

    seed: int = 0
    num_classes: int = 8
    n_objects: tuple = (8, 14)
    object_distance: tuple = (4.5, 22.0)
    ground_z: float = -1.6
    max_range: float = 70.0
    gt_pose: Pose = dataclasses.field(default_factory=default_ground_truth_pose)
    intrinsics: CameraIntrinsics = dataclasses.field(default_factory=default_intrinsics)
    lidar: SphericalConfig = None

    def __post_init__(self):
        if self.num_classes < 2:
            raise InvalidArgumentError("need at least 2 classes for any MI signal")
        if self.lidar is None:
            object.__setattr__(self, "lidar", default_lidar_config(self.intrinsics))
        lo, hi = self.object_distance
        if not (0 < lo <= hi < self.max_range):
            raise InvalidArgumentError("object distances must fit inside max_range")


@dataclasses.dataclass(frozen=True)
class GroundTruthBundle:
    """Frames plus the pose that generated them and per-frame depth maps."""

    frames: list
    gt_pose: Pose
    manifest: dict
    camera_depths: list


@dataclasses.dataclass(frozen=True)
class _Box:
    cx: float
    cy: float
    half_x: float
    half_y: float
    z0: float
    z1: float
    yaw: float
    class_id: int

    def to_dict(self):
        return {"kind": "box", **{k: getattr(self, k) for k in
                ("cx", "cy", "half_x", "half_y", "z0", "z1", "yaw", "class_id")}}


@dataclasses.dataclass(frozen=True)
class _Cylinder:
    cx: float
    cy: float
    radius: float
    z0: float
    z1: float
    class_id: int

    def to_dict(self):
        return {"kind": "cylinder", **{k: getattr(self, k) for k in
                ("cx", "cy", "radius", "z0", "z1", "class_id")}}


def _ray_plane_z(origin, dirs, z0):
    dz = dirs[:, 2]
    t = np.where(np.abs(dz) > 1e-12, (z0 - origin[2]) / np.where(dz == 0, 1.0, dz), np.inf)
    return np.where(t > _TMIN, t, np.inf)


def _ray_box(origin, dirs, box: _Box):
    c, s = math.cos(-box.yaw), math.sin(-box.yaw)
    ox = c * (origin[0] - box.cx) - s * (origin[1] - box.cy)
    oy = s * (origin[0] - box.cx) + c * (origin[1] - box.cy)
    oz = origin[2]
    dx = c * dirs[:, 0] - s * dirs[:, 1]
    dy = s * dirs[:, 0] + c * dirs[:, 1]
    dz = dirs[:, 2]
    t0 = np.full(dirs.shape[0], -np.inf)
    t1 = np.full(dirs.shape[0], np.inf)
    for o, d, lo, hi in ((ox, dx, -box.half_x, box.half_x),
                         (oy, dy, -box.half_y, box.half_y),
                         (oz, dz, box.z0, box.z1)):
        d_safe = np.where(d == 0, 1e-300, d)
        ta = (lo - o) / d_safe
        tb = (hi - o) / d_safe
        near = np.minimum(ta, tb)
        far = np.maximum(ta, tb)
        # parallel ray outside the slab never hits
        outside = (d == 0) & ((o < lo) | (o > hi))
        near = np.where(outside, np.inf, near)
        t0 = np.maximum(t0, near)
        t1 = np.minimum(t1, far)
    hit = (t0 <= t1) & (t0 > _TMIN)
    return np.where(hit, t0, np.inf)


def _ray_cylinder(origin, dirs, cyl: _Cylinder):
    ox, oy, oz = origin[0] - cyl.cx, origin[1] - cyl.cy, origin[2]
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    a = dx * dx + dy * dy
    b = 2.0 * (ox * dx + oy * dy)
    cc = ox * ox + oy * oy - cyl.radius * cyl.radius
    disc = b * b - 4.0 * a * cc
    sqrt_disc = np.sqrt(np.maximum(disc, 0.0))
    a_safe = np.where(a == 0, 1e-300, a)
    t_side0 = (-b - sqrt_disc) / (2.0 * a_safe)
    t_side1 = (-b + sqrt_disc) / (2.0 * a_safe)
    best = np.full(dirs.shape[0], np.inf)
    for t in (t_side0, t_side1):
        z = oz + t * dz
        ok = (disc >= 0) & (a > 0) & (t > _TMIN) & (z >= cyl.z0) & (z <= cyl.z1)
        best = np.where(ok & (t < best), t, best)
    # top cap
    dz_safe = np.where(dz == 0, 1e-300, dz)
    t_cap = (cyl.z1 - oz) / dz_safe
    r2 = (ox + t_cap * dx) ** 2 + (oy + t_cap * dy) ** 2
    ok = (dz != 0) & (t_cap > _TMIN) & (r2 <= cyl.radius ** 2)
    best = np.where(ok & (t_cap < best), t_cap, best)
    return best


def _raycast(origin, dirs, objects, ground_z, max_range):
    """Nearest hit along each ray: (range, class); class -1 where no hit."""
    n = dirs.shape[0]
    best_t = _ray_plane_z(origin, dirs, ground_z)
    best_c = np.where(np.isfinite(best_t), GROUND_CLASS, -1)
    for obj in objects:
        if isinstance(obj, _Box):
            t = _ray_box(origin, dirs, obj)
        else:
            t = _ray_cylinder(origin, dirs, obj)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_c = np.where(closer, obj.class_id, best_c)
    out_of_range = best_t > max_range
    best_t = np.where(out_of_range, np.inf, best_t)
    best_c = np.where(out_of_range, -1, best_c)
    return best_t, best_c.astype(np.int32)


def _sample_scene(rng, spec: SceneSpec):
    lo, hi = spec.n_objects
    count = int(rng.integers(lo, hi + 1)) if hi > lo else int(lo)
    # aim half the objects at the camera's sector so its view stays busy
    cam_dir = spec.gt_pose.R.T @ np.array([0.0, 0.0, 1.0])
    cam_az = math.atan2(cam_dir[1], cam_dir[0])
    objects = []
    for k in range(count):
        if k % 2 == 0:
            az = cam_az + rng.uniform(-0.62, 0.62)
        else:
            az = rng.uniform(-math.pi, math.pi)
        dist = rng.uniform(*spec.object_distance)
        cx, cy = dist * math.cos(az), dist * math.sin(az)
        class_id = int(rng.integers(1, spec.num_classes))
        height = float(rng.uniform(1.2, 5.0))
        if rng.random() < 0.6:
            objects.append(_Box(
                cx=cx, cy=cy,
                half_x=float(rng.uniform(0.5, 2.4)),
                half_y=float(rng.uniform(0.5, 2.4)),
                z0=spec.ground_z, z1=spec.ground_z + height,
                yaw=float(rng.uniform(0.0, 2.0 * math.pi)),
                class_id=class_id,
            ))
        else:
            objects.append(_Cylinder(
                cx=cx, cy=cy,
                radius=float(rng.uniform(0.4, 1.6)),
                z0=spec.ground_z, z1=spec.ground_z + height,
                class_id=class_id,
            ))
    return objects


def _lidar_directions(cfg: SphericalConfig):
    rows = np.arange(cfg.lidar_rows)
    cols = np.arange(cfg.lidar_cols)
    fov_h = math.radians(cfg.lidar_fov_h_deg)
    fov_v = math.radians(cfg.lidar_fov_v_deg)
    # bin centers of the spherical grid; kept consistent with
    # initializer.spherical_project so points rebin to their own cell
    az = (0.5 - (cols + 0.5) / cfg.lidar_cols) * fov_h
    el = (0.5 - (rows + 0.5) / cfg.lidar_rows) * fov_v
    az_g, el_g = np.meshgrid(az, el)
    cos_el = np.cos(el_g)
    dirs = np.stack([cos_el * np.cos(az_g), cos_el * np.sin(az_g), np.sin(el_g)], axis=-1)
    return dirs.reshape(-1, 3)


def _camera_directions(intr: CameraIntrinsics):
    u = np.arange(intr.width, dtype=np.float64)
    v = np.arange(intr.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    dirs = np.stack([(uu - intr.cx) / intr.fx, (vv - intr.cy) / intr.fy,
                     np.ones_like(uu)], axis=-1)
    return dirs.reshape(-1, 3)


def generate(spec: SceneSpec, n_frames: int) -> GroundTruthBundle:
    """Ray-cast n_frames independent layouts into a ground-truth bundle."""
    if n_frames < 1:
        raise InvalidArgumentError("need at least one frame")
    lidar_dirs = _lidar_directions(spec.lidar)
    cam_dirs_c = _camera_directions(spec.intrinsics)
    # camera rays expressed in the LiDAR frame
    cam_origin = -spec.gt_pose.R.T @ spec.gt_pose.t
    cam_dirs = cam_dirs_c @ spec.gt_pose.R
    frames = []
    depths = []
    objects_per_frame = []
    seeds = np.random.SeedSequence(spec.seed).spawn(n_frames)
    for fi in range(n_frames):
        rng = np.random.default_rng(seeds[fi])
        objects = _sample_scene(rng, spec)
        objects_per_frame.append([o.to_dict() for o in objects])

        t, cls = _raycast(np.zeros(3), lidar_dirs, objects, spec.ground_z, spec.max_range)
        hit = np.isfinite(t)
        points = lidar_dirs[hit] * t[hit][:, None]
        cloud = PointCloudFrame(points=points, labels=cls[hit])

        t_c, cls_c = _raycast(cam_origin, cam_dirs, objects, spec.ground_z, spec.max_range)
        img = np.where(cls_c >= 0, cls_c, GROUND_CLASS).astype(np.int32)
        img = img.reshape(spec.intrinsics.height, spec.intrinsics.width)
        planes = to_one_hot(LabelImage(img, spec.num_classes))
        depths.append(t_c.reshape(spec.intrinsics.height, spec.intrinsics.width))

        frames.append(CalibFrame(cloud=cloud, image_planes=planes, intrinsics=spec.intrinsics))
    manifest = {
        "seed": spec.seed,
        "n_frames": n_frames,
        "num_classes": spec.num_classes,
        "noise_rate": 0.0,
        "ground_z": spec.ground_z,
        "max_range": spec.max_range,
        "intrinsics": dataclasses.asdict(spec.intrinsics),
        "lidar": dataclasses.asdict(spec.lidar),
        "ground_truth": {
            "matrix": spec.gt_pose.matrix().tolist(),
            "twist": se3_log(spec.gt_pose).vec.tolist(),
        },
        "objects_per_frame": objects_per_frame,
    }
    return GroundTruthBundle(frames=frames, gt_pose=spec.gt_pose, manifest=manifest,
                             camera_depths=depths)


def corrupt_labels(bundle: GroundTruthBundle, rate: float, seed: int) -> GroundTruthBundle:
    """Flip each point and pixel label to a random other class w.p. rate."""
    if not 0.0 <= rate <= 1.0:
        raise InvalidArgumentError("noise rate must be in [0, 1]")
    rng = np.random.default_rng(seed)
    frames = []
    for frame in bundle.frames:
        c = frame.image_planes.num_classes

        pl = frame.cloud.labels.copy()
        flip = rng.random(pl.shape) < rate
        offs = rng.integers(1, c, size=pl.shape)
        pl[flip] = (pl[flip] + offs[flip]) % c
        cloud = PointCloudFrame(points=frame.cloud.points.copy(), labels=pl)

        il = frame.image_planes.labels.copy()
        flip = rng.random(il.shape) < rate
        offs = rng.integers(1, c, size=il.shape)
        il[flip] = (il[flip] + offs[flip]) % c
        planes = to_one_hot(LabelImage(il.astype(np.int32), c))

        frames.append(CalibFrame(cloud=cloud, image_planes=planes, intrinsics=frame.intrinsics))
    manifest = dict(bundle.manifest)
    manifest["noise_rate"] = float(rate)
    manifest["noise_seed"] = int(seed)
    return GroundTruthBundle(frames=frames, gt_pose=bundle.gt_pose, manifest=manifest,
                             camera_depths=bundle.camera_depths)


def pose_error(est: Pose, gt: Pose):
    """(rotation error deg, translation error m) between two poses."""
    rel = est.R @ gt.R.T
    cos_theta = np.clip((np.trace(rel) - 1.0) / 2.0, -1.0, 1.0)
    rot_deg = float(np.degrees(np.arccos(cos_theta)))
    trans_m = float(np.linalg.norm(est.t - gt.t))
    return rot_deg, trans_m


def label_consistency(bundle: GroundTruthBundle) -> float:
    """Fraction of visible LiDAR points whose class matches their pixel.

    Points are counted only when they project inside the image and the
    camera depth map shows them unoccluded (nearest-pixel depth within
    2.5% or 0.25 m of the point's camera depth).
    """
    from .geometry import project

    agree = 0
    total = 0
    for frame, depth_map in zip(bundle.frames, bundle.camera_depths):
        pr = project(frame.cloud.points, bundle.gt_pose, frame.intrinsics)
        idx = np.flatnonzero(pr.valid)
        if idx.size == 0:
            continue
        u = np.rint(pr.uv[idx, 0]).astype(np.int64)
        v = np.rint(pr.uv[idx, 1]).astype(np.int64)
        z = pr.depth[idx]
        cam_z = depth_map[v, u]
        vis = np.isfinite(cam_z) & (np.abs(cam_z - z) < np.maximum(0.25, 0.025 * z))
        labels_img = frame.image_planes.labels[v[vis], u[vis]]
        agree += int(np.sum(labels_img == frame.cloud.labels[idx][vis]))
        total += int(vis.sum())
    return agree / total if total else 0.0
