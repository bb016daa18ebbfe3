"""Semantic initial calibration: range-image registration plus PnP.

The LiDAR cloud is binned into a spherical label image, the camera label
image is resized to the LiDAR's angular resolution, the two are
registered by exhaustive discrete-MI search over integer offsets (the
spherical image is horizontally cyclic), class-agreeing bins become
3D-2D correspondences, and a RANSAC-wrapped DLT + Gauss-Newton PnP turns
them into a pose. Multi-scan results are fused with modified z-score
outlier rejection.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import kernels
from .errors import (DegenerateGeometryError, DegenerateSceneError,
                     InsufficientCorrespondencesError, InvalidArgumentError,
                     InvalidConfigError)
from .geometry import CameraIntrinsics, Pose, project, se3_exp, se3_log

REGISTER_MIN_PAIRS = 16
Z_SCORE_THRESHOLD = 3.5
MAX_OUTLIER_FRACTION = 0.6


@dataclasses.dataclass(frozen=True)
class SphericalConfig:
    """LiDAR grid geometry and the camera field of view it is matched to."""

    lidar_fov_h_deg: float
    lidar_fov_v_deg: float
    lidar_rows: int
    lidar_cols: int
    camera_fov_h_deg: float
    camera_fov_v_deg: float

    def __post_init__(self):
        for name in ("lidar_fov_h_deg", "lidar_fov_v_deg", "camera_fov_h_deg", "camera_fov_v_deg"):
            val = getattr(self, name)
            if not 0.0 < val <= 360.0:
                raise InvalidConfigError(f"{name} must be in (0, 360]")
        if self.lidar_rows < 1 or self.lidar_cols < 1:
            raise InvalidConfigError("grid dimensions must be positive")

    @classmethod
    def with_camera(cls, lidar_fov_h_deg, lidar_fov_v_deg, lidar_rows, lidar_cols,
                    intrinsics: CameraIntrinsics) -> "SphericalConfig":
        return cls(
            lidar_fov_h_deg=lidar_fov_h_deg,
            lidar_fov_v_deg=lidar_fov_v_deg,
            lidar_rows=lidar_rows,
            lidar_cols=lidar_cols,
            camera_fov_h_deg=intrinsics.fov_h_deg,
            camera_fov_v_deg=intrinsics.fov_v_deg,
        )


@dataclasses.dataclass(frozen=True)
class SphericalLabelImage:
    """Range-image view of a labeled cloud.

    labels holds class IDs with num_classes as the empty-bin sentinel;
    point_index maps each labeled bin back to the source point (-1 when
    empty); ranges holds the per-bin winning range in meters.
    """

    labels: np.ndarray
    point_index: np.ndarray
    ranges: np.ndarray
    num_classes: int
    n_skipped: int = 0

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclasses.dataclass(frozen=True)
class ZoomedLabelImage:
    """Nearest-neighbor resized label image with its inverse pixel maps."""

    labels: np.ndarray
    num_classes: int
    src_rows: np.ndarray
    src_cols: np.ndarray

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclasses.dataclass(frozen=True)
class RegistrationResult:
    """Best integer offset of the moving image over the fixed image."""

    du: int
    dv: int
    score: float
    score_map: np.ndarray
    du_start: int
    dv_start: int


@dataclasses.dataclass(frozen=True)
class InitAggregate:
    """Multi-scan fusion: per-scan twists, their z-scores, and the mean."""

    twists: np.ndarray
    z_scores: np.ndarray
    inlier_mask: np.ndarray
    pose: Pose | None
    failed: bool


def spherical_project(points, labels, cfg: SphericalConfig, num_classes: int) -> SphericalLabelImage:
    """Bin labeled points into the spherical grid; nearest point wins a bin.

    Columns follow azimuth clockwise from the +x axis at the center
    column (matching pinhole image orientation); rows run from maximum
    elevation at the top. Out-of-FoV points are dropped; zero-norm points
    are skipped and counted.
    """
    pts = np.asarray(points, dtype=np.float64)
    lab = np.asarray(labels)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
        raise InvalidArgumentError("points must be a nonempty (N, 3) array")
    if lab.shape != (pts.shape[0],):
        raise InvalidArgumentError("labels must align with points")

    h, w = cfg.lidar_rows, cfg.lidar_cols
    fov_h = math.radians(cfg.lidar_fov_h_deg)
    fov_v = math.radians(cfg.lidar_fov_v_deg)
    r = np.linalg.norm(pts, axis=1)
    ok = r > 1e-12
    n_skipped = int(np.sum(~ok))

    az = np.arctan2(pts[ok, 1], pts[ok, 0])
    el = np.arcsin(np.clip(pts[ok, 2] / r[ok], -1.0, 1.0))
    colf = (0.5 - az / fov_h) * w
    rowf = (0.5 - el / fov_v) * h
    cyclic = cfg.lidar_fov_h_deg >= 360.0

    col = np.floor(colf).astype(np.int64)
    row = np.floor(rowf).astype(np.int64)
    if cyclic:
        col %= w
        keep_c = np.ones(col.shape, dtype=bool)
    else:
        keep_c = (colf >= 0.0) & (colf <= w)
        col = np.clip(col, 0, w - 1)
    keep_r = (rowf >= 0.0) & (rowf <= h)
    row = np.clip(row, 0, h - 1)
    keep = keep_c & keep_r

    idx_all = np.flatnonzero(ok)[keep]
    row, col, rr = row[keep], col[keep], r[ok][keep]

    label_img = np.full((h, w), num_classes, dtype=np.int32)
    index_img = np.full((h, w), -1, dtype=np.int64)
    range_img = np.full((h, w), np.inf)
    # write farthest first so the nearest point ends up owning the bin
    order = np.argsort(-rr, kind="stable")
    label_img[row[order], col[order]] = lab[idx_all[order]]
    index_img[row[order], col[order]] = idx_all[order]
    range_img[row[order], col[order]] = rr[order]
    return SphericalLabelImage(labels=label_img, point_index=index_img,
                               ranges=range_img, num_classes=num_classes,
                               n_skipped=n_skipped)


def zoom_label_image(img, cfg: SphericalConfig) -> ZoomedLabelImage:
    """Resize the camera label image to the LiDAR's angular resolution.

    Target size is round(lidar_cols * camera_fov_h / lidar_fov_h) by
    round(lidar_rows * camera_fov_v / lidar_fov_v); nearest-neighbor, so
    class IDs are never blended. The source row/column of every output
    pixel is recorded for the inverse mapping.
    """
    labels = np.asarray(img.labels, dtype=np.int32)
    num_classes = img.num_classes
    h_src, w_src = labels.shape
    w_z = int(np.round(cfg.lidar_cols * cfg.camera_fov_h_deg / cfg.lidar_fov_h_deg))
    h_z = int(np.round(cfg.lidar_rows * cfg.camera_fov_v_deg / cfg.lidar_fov_v_deg))
    if w_z < 2 or h_z < 2:
        raise InvalidConfigError(f"zoom target {w_z}x{h_z} is smaller than 2x2")
    src_cols = np.minimum((np.arange(w_z) + 0.5) * (w_src / w_z), w_src - 1).astype(np.int64)
    src_rows = np.minimum((np.arange(h_z) + 0.5) * (h_src / h_z), h_src - 1).astype(np.int64)
    zoomed = labels[src_rows[:, None], src_cols[None, :]]
    return ZoomedLabelImage(labels=np.ascontiguousarray(zoomed), num_classes=num_classes,
                            src_rows=src_rows, src_cols=src_cols)


def _label_array(img):
    return img.labels if hasattr(img, "labels") else np.asarray(img)


def discrete_mi(a, b, num_classes: int | None = None, sentinel: int | None = None) -> float:
    """Exact plug-in MI (nats) of two equally shaped label arrays.

    Pixels whose label equals sentinel (or is >= num_classes) on either
    side are excluded; an empty remainder is an error.
    """
    aa = np.asarray(_label_array(a), dtype=np.int64).ravel()
    bb = np.asarray(_label_array(b), dtype=np.int64).ravel()
    if aa.shape != bb.shape or aa.size == 0:
        raise InvalidArgumentError("inputs must be nonempty and equally shaped")
    if num_classes is None:
        num_classes = int(max(aa.max(), bb.max())) + 1
        if sentinel is not None and sentinel == num_classes - 1:
            num_classes -= 1
    mask = (aa >= 0) & (bb >= 0) & (aa < num_classes) & (bb < num_classes)
    if sentinel is not None:
        mask &= (aa != sentinel) & (bb != sentinel)
    total = int(mask.sum())
    if total == 0:
        raise InvalidArgumentError("empty overlap after sentinel exclusion")
    joint = np.bincount(aa[mask] * num_classes + bb[mask],
                        minlength=num_classes * num_classes)
    return kernels.mi_from_counts(joint.reshape(num_classes, num_classes), total)


def register_2d(fixed: SphericalLabelImage, moving) -> RegistrationResult:
    """Exhaustive discrete-MI search over integer offsets.

    moving pixel (r, c) is matched to fixed pixel (r+dv, (c+du) mod W).
    The search covers every du (cyclic) and dv in [-H/2, H/2] whose row
    overlap keeps at least half of the moving image inside. Ties are
    broken by the smallest offset norm, then lexicographically on
    (du, dv).
    """
    mov = np.ascontiguousarray(_label_array(moving), dtype=np.int32)
    hm, wm = mov.shape
    h, w = fixed.labels.shape
    if hm > h or wm > w:
        raise InvalidArgumentError("moving image must fit inside the fixed image")
    du0 = -(w // 2)
    n_du = w
    min_rows = (hm + 1) // 2
    dv_cands = [dv for dv in range(-(h // 2), h // 2 + 1)
                if min(hm, h - dv) - max(0, -dv) >= min_rows]
    if not dv_cands:
        raise InvalidArgumentError("no vertical offset keeps 50% of the moving image inside")
    dv0, n_dv = dv_cands[0], len(dv_cands)

    score_map = kernels.mi_score_map(fixed.labels, mov, fixed.num_classes,
                                     du0, n_du, dv0, n_dv, REGISTER_MIN_PAIRS)
    finite = np.isfinite(score_map)
    if not finite.any():
        raise DegenerateSceneError("no offset produced enough label overlap")
    smax = score_map[finite].max()
    smin = score_map[finite].min()
    if smax - smin < 1e-9:
        raise DegenerateSceneError("registration score map is flat")
    ties = np.argwhere(score_map == smax)
    offsets = [(dv0 + int(r), du0 + int(c)) for r, c in ties]
    dv, du = min(offsets, key=lambda o: (o[0] ** 2 + o[1] ** 2, o[1], o[0]))
    return RegistrationResult(du=du, dv=dv, score=float(smax), score_map=score_map,
                              du_start=du0, dv_start=dv0)


def sample_correspondences(fixed: SphericalLabelImage, moving: ZoomedLabelImage,
                           reg: RegistrationResult, points, n: int = 200,
                           seed: int = 0):
    """Class-agreeing bins of the registered overlap as 3D-2D pairs.

    Returns (points3d, pixels2d): the source LiDAR point of each fixed
    bin and the original-resolution pixel center of each moving pixel.
    Samples n bins without replacement, spread evenly across the agreeing
    classes so one dominant class (typically ground) cannot swamp the
    pose solve; all bins are returned when fewer than n are available, as
    long as at least 6 agree.
    """
    pts = np.asarray(points, dtype=np.float64)
    h, w = fixed.labels.shape
    hm, wm = moving.labels.shape
    r0, r1 = max(0, -reg.dv), min(hm, h - reg.dv)
    if r1 <= r0:
        raise InvalidArgumentError("registration offset leaves no row overlap")
    cc = (np.arange(wm) + reg.du) % w
    fsub = fixed.labels[r0 + reg.dv:r1 + reg.dv][:, cc]
    msub = moving.labels[r0:r1]
    agree = (fsub == msub) & (fsub < fixed.num_classes)
    rows, cols = np.nonzero(agree)
    if rows.size < 6:
        raise InsufficientCorrespondencesError(
            f"only {rows.size} class-agreeing bins (need 6)")
    if rows.size > n:
        rng = np.random.default_rng(seed)
        classes = fsub[rows, cols]
        pools = {int(cl): rng.permutation(np.flatnonzero(classes == cl))
                 for cl in np.unique(classes)}
        take = dict.fromkeys(pools, 0)
        remaining = n
        # grant classes equal shares of what remains; classes that run dry
        # spill their share onto the others in the next pass
        while remaining > 0:
            open_classes = [cl for cl in pools if take[cl] < pools[cl].size]
            if not open_classes:
                break
            share = max(1, remaining // len(open_classes))
            for cl in open_classes:
                grant = min(share, pools[cl].size - take[cl], remaining)
                take[cl] += grant
                remaining -= grant
                if remaining == 0:
                    break
        pick = np.sort(np.concatenate([pools[cl][:take[cl]]
                                       for cl in pools if take[cl] > 0]))
        rows, cols = rows[pick], cols[pick]
    src_idx = fixed.point_index[rows + r0 + reg.dv, cc[cols]]
    points3d = pts[src_idx]
    pixels2d = np.stack([moving.src_cols[cols], moving.src_rows[rows + r0]], axis=1).astype(np.float64)
    return points3d, pixels2d


def _hartley_normalize(x):
    centroid = x.mean(axis=0)
    centered = x - centroid
    mean_dist = np.mean(np.linalg.norm(centered, axis=1))
    scale = np.sqrt(x.shape[1]) / mean_dist if mean_dist > 0 else 1.0
    T = np.eye(x.shape[1] + 1)
    T[:-1, :-1] *= scale
    T[:-1, -1] = -scale * centroid
    return centered * scale, T


def _is_coplanar(points3d, tol=1e-9):
    centered = points3d - points3d.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    return svals[-1] <= tol * max(svals[0], 1.0)


def _dlt_pose(points3d, xn):
    """Direct linear transform for [R|t] from normalized image coords."""
    m = points3d.shape[0]
    X, T3 = _hartley_normalize(points3d)
    x2, T2 = _hartley_normalize(xn)
    A = np.zeros((2 * m, 12))
    Xh = np.hstack([X, np.ones((m, 1))])
    A[0::2, 0:4] = Xh
    A[0::2, 8:12] = -x2[:, 0:1] * Xh
    A[1::2, 4:8] = Xh
    A[1::2, 8:12] = -x2[:, 1:2] * Xh
    try:
        _, svals, vt = np.linalg.svd(A)
    except np.linalg.LinAlgError:
        return None
    if svals[-2] < 1e-12 * svals[0]:
        return None
    M = vt[-1].reshape(3, 4)
    M = np.linalg.inv(T2) @ M @ T3
    best = None
    for sign in (1.0, -1.0):
        Ms = sign * M
        U, S, Vt = np.linalg.svd(Ms[:, :3])
        if S[-1] < 1e-12 * S[0]:
            continue
        R = U @ np.diag([1.0, 1.0, np.linalg.det(U @ Vt)]) @ Vt
        scale = S.mean()
        t = Ms[:, 3] / scale
        depths = points3d @ R.T[:, 2] + t[2]
        n_front = int(np.sum(depths > 0))
        if best is None or n_front > best[0]:
            best = (n_front, R, t)
    if best is None or best[0] < points3d.shape[0] // 2:
        return None
    try:
        return Pose(best[1], best[2])
    except InvalidArgumentError:
        return None


def _reprojection_residuals(pose, points3d, pixels2d, intr):
    q = points3d @ pose.R.T + pose.t
    z = np.where(q[:, 2] > 1e-9, q[:, 2], 1e-9)
    u = intr.fx * q[:, 0] / z + intr.cx
    v = intr.fy * q[:, 1] / z + intr.cy
    res = np.stack([u - pixels2d[:, 0], v - pixels2d[:, 1]], axis=1)
    res[q[:, 2] <= 1e-9] = 1e6
    return res


def _gauss_newton(pose, points3d, pixels2d, intr, iterations=50):
    """Damped (Levenberg) refinement on the pixel reprojection error."""
    lam = 1e-6
    res = _reprojection_residuals(pose, points3d, pixels2d, intr)
    cost = float(np.sum(res ** 2))
    for _ in range(iterations):
        q = points3d @ pose.R.T + pose.t
        z = q[:, 2]
        J = np.zeros((points3d.shape[0], 2, 6))
        J[:, 0, 0] = intr.fx / z
        J[:, 0, 2] = -intr.fx * q[:, 0] / z ** 2
        J[:, 1, 1] = intr.fy / z
        J[:, 1, 2] = -intr.fy * q[:, 1] / z ** 2
        # rotation block: d q / d delta_r = -[q]x
        Ju_q = np.stack([J[:, 0, 0], np.zeros(len(z)), J[:, 0, 2]], axis=1)
        Jv_q = np.stack([np.zeros(len(z)), J[:, 1, 1], J[:, 1, 2]], axis=1)
        J[:, 0, 3:] = np.cross(Ju_q, q) * -1.0
        J[:, 1, 3:] = np.cross(Jv_q, q) * -1.0
        Jf = J.reshape(-1, 6)
        rf = res.reshape(-1)
        JtJ = Jf.T @ Jf
        g = Jf.T @ rf
        for _ in range(8):
            try:
                delta = np.linalg.solve(JtJ + lam * np.eye(6), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = se3_exp(delta).compose(pose)
            cand_res = _reprojection_residuals(cand, points3d, pixels2d, intr)
            cand_cost = float(np.sum(cand_res ** 2))
            if cand_cost < cost:
                pose, res, cost = cand, cand_res, cand_cost
                lam = max(lam * 0.25, 1e-12)
                break
            lam *= 10.0
        else:
            break
        if np.linalg.norm(delta) < 1e-14:
            break
    return pose


@dataclasses.dataclass(frozen=True)
class PnpDiagnostics:
    inlier_mask: np.ndarray
    n_inliers: int
    mean_inlier_residual_px: float


def pnp_solve(points3d, pixels2d, intrinsics: CameraIntrinsics, *,
              ransac_iterations: int = 100, inlier_threshold_px: float = 5.0,
              seed: int = 0, full_output: bool = False):
    """Pose from 3D-2D correspondences: RANSAC over DLT, then refinement.

    Each consensus round fits a normalized DLT on 6 sampled pairs and
    counts reprojection inliers; the best inlier set is refit with DLT
    and polished with damped Gauss-Newton.
    """
    pts = np.asarray(points3d, dtype=np.float64)
    pix = np.asarray(pixels2d, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or pix.shape != (pts.shape[0], 2):
        raise InvalidArgumentError("need (N, 3) points and aligned (N, 2) pixels")
    m = pts.shape[0]
    if m < 6:
        raise InvalidArgumentError(f"PnP needs at least 6 correspondences, got {m}")
    if _is_coplanar(pts, tol=1e-9):
        raise DegenerateGeometryError("correspondences are coplanar")
    xn = np.stack([(pix[:, 0] - intrinsics.cx) / intrinsics.fx,
                   (pix[:, 1] - intrinsics.cy) / intrinsics.fy], axis=1)
    rng = np.random.default_rng(seed)
    # a 6-point sample always explains itself, so demand real support
    min_consensus = max(6, m // 20)
    best_count = -1
    best_mask = None
    best_cand = None
    for _ in range(ransac_iterations):
        sample = rng.choice(m, size=6, replace=False)
        if _is_coplanar(pts[sample], tol=1e-7):
            continue
        cand = _dlt_pose(pts[sample], xn[sample])
        if cand is None:
            continue
        res = np.linalg.norm(_reprojection_residuals(cand, pts, pix, intrinsics), axis=1)
        mask = res < inlier_threshold_px
        count = int(mask.sum())
        if count > best_count:
            best_count, best_mask, best_cand = count, mask, cand
    if best_mask is None or best_count < 6:
        raise DegenerateGeometryError(
            f"consensus failed: best model explains {max(best_count, 0)} of {m} points")
    # refit on the consensus set and re-collect inliers until the set
    # stabilizes; a minimal-sample fit under pixel noise is too wobbly to
    # gather its full support in one pass
    inlier_mask = best_mask
    current = best_cand
    final = (best_count, best_cand)
    for _ in range(10):
        idx = np.flatnonzero(inlier_mask)
        if idx.size < 6:
            break
        base = None
        if not _is_coplanar(pts[idx], tol=1e-9):
            base = _dlt_pose(pts[idx], xn[idx])
        if base is None:
            base = current
        cand = _gauss_newton(base, pts[idx], pix[idx], intrinsics)
        res = np.linalg.norm(_reprojection_residuals(cand, pts, pix, intrinsics), axis=1)
        new_mask = res < inlier_threshold_px
        count = int(new_mask.sum())
        if count > final[0]:
            final = (count, cand)
        if np.array_equal(new_mask, inlier_mask):
            break
        inlier_mask = new_mask
        current = cand
    if final[0] < min_consensus:
        raise DegenerateGeometryError(
            f"refined pose explains only {final[0]} of {m} points")
    pose = final[1]
    res = np.linalg.norm(_reprojection_residuals(pose, pts, pix, intrinsics), axis=1)
    mask = res < inlier_threshold_px
    if not full_output:
        return pose
    diag = PnpDiagnostics(
        inlier_mask=mask,
        n_inliers=int(mask.sum()),
        mean_inlier_residual_px=float(res[mask].mean()),
    )
    return pose, diag


def modified_z_scores(xs) -> np.ndarray:
    """Robust outlier scores 0.6745 * (x - median) / MAD.

    A zero MAD falls back to 1e-12, except that an all-equal input yields
    all-zero scores.
    """
    arr = np.asarray(xs, dtype=np.float64).reshape(-1)
    if arr.size < 3:
        raise InvalidArgumentError("need at least 3 values")
    med = np.median(arr)
    mad = np.median(np.abs(arr - med))
    if mad == 0.0:
        if np.all(arr == arr[0]):
            return np.zeros(arr.size)
        mad = 1e-12
    return 0.6745 * (arr - med) / mad


def aggregate_inits(poses, z_threshold: float = Z_SCORE_THRESHOLD,
                    max_outlier_fraction: float = MAX_OUTLIER_FRACTION) -> InitAggregate:
    """Fuse per-scan poses: reject per-component z-score outliers, mean the rest.

    A pose is an outlier when any of its six twist components scores
    above the threshold in absolute value. More than max_outlier_fraction
    outliers marks the whole initialization as failed.
    """
    if len(poses) < 3:
        raise InvalidArgumentError("need at least 3 candidate poses")
    twists = np.stack([se3_log(p).vec for p in poses])
    z = np.stack([modified_z_scores(twists[:, j]) for j in range(6)], axis=1)
    outlier = np.any(np.abs(z) > z_threshold, axis=1)
    failed = outlier.mean() > max_outlier_fraction
    pose = None
    if not failed:
        pose = se3_exp(twists[~outlier].mean(axis=0))
    return InitAggregate(twists=twists, z_scores=z, inlier_mask=~outlier,
                         pose=pose, failed=bool(failed))


@dataclasses.dataclass
class ScanInit:
    """Per-scan initialization outcome for the report."""

    frame_index: int
    du: int | None = None
    dv: int | None = None
    mi_score: float | None = None
    n_correspondences: int | None = None
    n_inliers: int | None = None
    twist: np.ndarray | None = None
    error: str | None = None


@dataclasses.dataclass
class InitializationReport:
    scans: list
    aggregate: InitAggregate | None
    pose: Pose | None
    failed: bool


def run_initialization(frames, cfg: SphericalConfig, n_correspondences: int = 200,
                       seed: int = 0) -> InitializationReport:
    """Full multi-scan initialization over CalibFrame pairs.

    Scans that fail registration or PnP are recorded with their error and
    skipped. With three or more successful scans the z-score aggregation
    decides; with one or two the plain mean is used; with none the
    initialization fails.
    """
    scans = []
    poses = []
    seeds = np.random.SeedSequence(seed).spawn(len(frames))
    for fi, frame in enumerate(frames):
        scan = ScanInit(frame_index=fi)
        scans.append(scan)
        try:
            num_classes = frame.image_planes.num_classes
            fixed = spherical_project(frame.cloud.points, frame.cloud.labels, cfg, num_classes)
            moving = zoom_label_image(frame.image_planes, cfg)
            reg = register_2d(fixed, moving)
            scan.du, scan.dv, scan.mi_score = reg.du, reg.dv, reg.score
            scan_seed = int(seeds[fi].generate_state(1)[0])
            p3d, p2d = sample_correspondences(fixed, moving, reg, frame.cloud.points,
                                              n=n_correspondences, seed=scan_seed)
            scan.n_correspondences = int(p3d.shape[0])
            pose, diag = pnp_solve(p3d, p2d, frame.intrinsics, seed=scan_seed,
                                   full_output=True)
            scan.n_inliers = diag.n_inliers
            scan.twist = se3_log(pose).vec
            poses.append(pose)
        except (DegenerateSceneError, DegenerateGeometryError,
                InsufficientCorrespondencesError, InvalidArgumentError) as exc:
            scan.error = str(exc)
    if not poses:
        return InitializationReport(scans=scans, aggregate=None, pose=None, failed=True)
    if len(poses) < 3:
        mean_pose = se3_exp(np.mean([se3_log(p).vec for p in poses], axis=0))
        return InitializationReport(scans=scans, aggregate=None, pose=mean_pose, failed=False)
    agg = aggregate_inits(poses)
    return InitializationReport(scans=scans, aggregate=agg, pose=agg.pose, failed=agg.failed)
