"""Joint gradient ascent over the critic and the sensor pose.

Every iteration draws a point minibatch across all frames, projects it
with the current pose, bilinearly samples the image label planes at the
projections, and takes one Adam ascent step on the critic parameters and
one on a local pose increment (left-composed through the exponential
map). Runs are deterministic for a fixed seed.
"""

from __future__ import annotations

import dataclasses
import time

import numpy as np

from .errors import (DivergedError, EmptyBatchError, InvalidArgumentError,
                     InvalidConfigError, NonFiniteError)
from .geometry import CameraIntrinsics, Pose, project, project_pullback, se3_exp, se3_log
from .mine import AdamState, StatisticsNetwork, ascent_step, dv_bound, dv_bound_and_pullback
from .sampling import LabelPlanes, bilinear_sample, bilinear_sample_pullback

MAX_EMPTY_STREAK = 50


@dataclasses.dataclass(frozen=True)
class PointCloudFrame:
    """LiDAR points (meters, sensor frame) with per-point class labels."""

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        lab = np.ascontiguousarray(self.labels, dtype=np.int32)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise InvalidArgumentError("points must be a nonempty (N, 3) array")
        if lab.shape != (pts.shape[0],):
            raise InvalidArgumentError("labels must align with points")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgumentError("points must be finite")
        if lab.min() < 0:
            raise InvalidArgumentError("labels must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclasses.dataclass(frozen=True)
class CalibFrame:
    """One LiDAR scan paired with one semantic camera image."""

    cloud: PointCloudFrame
    image_planes: LabelPlanes
    intrinsics: CameraIntrinsics

    def __post_init__(self):
        if int(self.cloud.labels.max()) >= self.image_planes.num_classes:
            raise InvalidArgumentError("cloud labels exceed the shared class count")


@dataclasses.dataclass(frozen=True)
class CalibConfig:
    """Optimization settings; defaults follow the reference protocol."""

    batch_size: int = 2048
    max_iterations: int = 4000
    alpha: float = 1e-4          # critic learning rate
    beta: float = 1e-3           # pose learning rate
    beta_decay: float = 0.5
    beta_decay_every: int = 1000
    convergence_window: int = 200
    convergence_threshold: float = 1e-4
    seed: int = 0
    hidden: tuple = (128, 128)

    def __post_init__(self):
        if self.batch_size < 2:
            raise InvalidConfigError("batch_size must be at least 2")
        if self.max_iterations < 1:
            raise InvalidConfigError("max_iterations must be positive")
        if not (self.alpha > 0 and self.beta > 0):
            raise InvalidConfigError("learning rates must be positive")
        if not (0 < self.beta_decay <= 1.0):
            raise InvalidConfigError("beta_decay must be in (0, 1]")
        if self.beta_decay_every < 1 or self.convergence_window < 2:
            raise InvalidConfigError("schedule intervals must be positive")


@dataclasses.dataclass
class CalibrationRun:
    """Result of one calibration: final pose plus per-iteration traces."""

    pose: Pose
    mi_trace: np.ndarray
    iterations: int
    wall_time_s: float
    converged: bool
    twist_trace: np.ndarray
    invalid_counts: np.ndarray

    @property
    def final_mi(self) -> float:
        finite = self.mi_trace[np.isfinite(self.mi_trace)]
        return float(finite[-1]) if finite.size else float("nan")


def _check_frames(frames):
    if not frames:
        raise InvalidArgumentError("need at least one frame")
    c = frames[0].image_planes.num_classes
    for f in frames:
        if f.image_planes.num_classes != c:
            raise InvalidArgumentError("all frames must share one class count")
    return c


def _pool(frames):
    points = np.concatenate([f.cloud.points for f in frames], axis=0)
    labels = np.concatenate([f.cloud.labels for f in frames], axis=0)
    bounds = np.cumsum([0] + [len(f.cloud) for f in frames])
    return points, labels, bounds


def calibrate(frames, init: Pose, config: CalibConfig | None = None) -> CalibrationRun:
    """Maximize the semantic MI bound over the LiDAR-to-camera pose.

    Args:
        frames: CalibFrame list sharing one class count.
        init: starting pose (LiDAR frame to camera frame).
        config: CalibConfig; defaults used when omitted.

    Raises:
        DivergedError: projected points stayed out of view for
            MAX_EMPTY_STREAK consecutive iterations.
        NonFiniteError: the MI estimate or a gradient became non-finite.
    """
    config = config or CalibConfig()
    num_classes = _check_frames(frames)
    points, labels, bounds = _pool(frames)
    n_total = points.shape[0]
    rng = np.random.default_rng(config.seed)
    net = StatisticsNetwork.create(num_classes, hidden=config.hidden, rng=rng)
    opt_net = AdamState.for_size(net.n_params, config.alpha)
    opt_pose = AdamState.for_size(6, config.beta)
    eye = np.eye(num_classes)
    pose = init

    mi_trace = np.full(config.max_iterations, np.nan)
    twist_trace = np.zeros((config.max_iterations, 6))
    invalid_counts = np.zeros(config.max_iterations, dtype=np.int64)
    half = config.convergence_window // 2
    converged = False
    empty_streak = 0
    start = time.perf_counter()
    it = 0

    for it in range(config.max_iterations):
        if it > 0 and it % config.beta_decay_every == 0:
            opt_pose.lr *= config.beta_decay

        sel = np.sort(rng.integers(0, n_total, size=config.batch_size))
        batch_points = points[sel]
        batch_labels = labels[sel]
        # frame boundaries inside the sorted batch
        cut = np.searchsorted(sel, bounds)

        uv = np.zeros((config.batch_size, 2))
        valid = np.zeros(config.batch_size, dtype=bool)
        slices = []
        for fi, frame in enumerate(frames):
            lo, hi = cut[fi], cut[fi + 1]
            if hi <= lo:
                slices.append(None)
                continue
            pr = project(batch_points[lo:hi], pose, frame.intrinsics)
            uv[lo:hi] = pr.uv
            valid[lo:hi] = pr.valid
            slices.append(pr)
        invalid_counts[it] = config.batch_size - int(valid.sum())

        twist_trace[it] = se3_log(pose).vec
        n_valid = int(valid.sum())
        if n_valid < 2:
            empty_streak += 1
            if empty_streak >= MAX_EMPTY_STREAK:
                raise DivergedError(
                    f"no points projected into view for {MAX_EMPTY_STREAK} iterations")
            continue
        empty_streak = 0

        soft = np.empty((n_valid, num_classes))
        row = 0
        row_spans = []
        for fi, frame in enumerate(frames):
            pr = slices[fi]
            if pr is None or pr.n_valid == 0:
                row_spans.append(None)
                continue
            batch = bilinear_sample(frame.image_planes, pr)
            nv = batch.soft.shape[0]
            soft[row:row + nv] = batch.soft
            row_spans.append((row, row + nv, batch))
            row += nv

        x = eye[batch_labels[valid]]
        perm = rng.permutation(n_valid)
        est, grad_theta, grad_y = dv_bound_and_pullback(net, x, soft, x, soft[perm])
        if not np.isfinite(est.value):
            raise NonFiniteError(f"MI estimate became non-finite at iteration {it}")
        mi_trace[it] = est.value
        ascent_step(net, opt_net, grad_theta)

        grad_pose = np.zeros(6)
        for fi, frame in enumerate(frames):
            span = row_spans[fi]
            if span is None:
                continue
            lo, hi = cut[fi], cut[fi + 1]
            pr = slices[fi]
            grad_uv_valid = bilinear_sample_pullback(
                frame.image_planes, pr, grad_y[span[0]:span[1]])
            grad_uv = np.zeros((hi - lo, 2))
            grad_uv[pr.valid] = grad_uv_valid
            grad_pose += project_pullback(
                batch_points[lo:hi], pose, frame.intrinsics, grad_uv, pr.valid)

        delta = opt_pose.direction(grad_pose)
        pose = se3_exp(delta).compose(pose)
        twist_trace[it] = se3_log(pose).vec

        done = it + 1
        if done >= config.convergence_window and done % half == 0:
            recent = mi_trace[done - half:done].mean()
            previous = mi_trace[done - 2 * half:done - half].mean()
            if np.isfinite(recent) and np.isfinite(previous) \
                    and abs(recent - previous) < config.convergence_threshold:
                converged = True
                break

    n_done = it + 1
    return CalibrationRun(
        pose=pose,
        mi_trace=mi_trace[:n_done].copy(),
        iterations=n_done,
        wall_time_s=time.perf_counter() - start,
        converged=converged,
        twist_trace=twist_trace[:n_done].copy(),
        invalid_counts=invalid_counts[:n_done].copy(),
    )


def mi_landscape(frames, poses, config: CalibConfig | None = None,
                 critic_steps: int = 1000, eval_batches: int = 16):
    """MI estimate at each fixed pose after critic-only training.

    Every pose gets a fresh critic trained for critic_steps iterations,
    then the bound is averaged over eval_batches evaluation batches. The
    random stream restarts from config.seed for each pose, so identical
    poses produce identical values and different poses are compared under
    common random numbers.
    """
    config = config or CalibConfig()
    num_classes = _check_frames(frames)
    points, labels, bounds = _pool(frames)
    n_total = points.shape[0]
    eye = np.eye(num_classes)
    values = []

    for pose in poses:
        rng = np.random.default_rng(config.seed)
        net = StatisticsNetwork.create(num_classes, hidden=config.hidden, rng=rng)
        opt = AdamState.for_size(net.n_params, config.alpha)

        def one_batch():
            sel = np.sort(rng.integers(0, n_total, size=config.batch_size))
            cut = np.searchsorted(sel, bounds)
            rows_x = []
            rows_y = []
            for fi, frame in enumerate(frames):
                lo, hi = cut[fi], cut[fi + 1]
                if hi <= lo:
                    continue
                pr = project(points[sel[lo:hi]], pose, frame.intrinsics)
                if pr.n_valid == 0:
                    continue
                batch = bilinear_sample(frame.image_planes, pr)
                rows_y.append(batch.soft)
                rows_x.append(eye[labels[sel[lo:hi]][pr.valid]])
            if not rows_x:
                raise EmptyBatchError("no valid points at this pose")
            x = np.concatenate(rows_x)
            y = np.concatenate(rows_y)
            if x.shape[0] < 2:
                raise EmptyBatchError("fewer than 2 valid points at this pose")
            return x, y, rng.permutation(x.shape[0])

        for _ in range(critic_steps):
            try:
                x, y, perm = one_batch()
            except EmptyBatchError:
                continue
            _, grad_theta, _ = dv_bound_and_pullback(net, x, y, x, y[perm])
            ascent_step(net, opt, grad_theta)

        vals = []
        for _ in range(eval_batches):
            try:
                x, y, perm = one_batch()
            except EmptyBatchError:
                continue
            vals.append(dv_bound(net, x, y, x, y[perm]).value)
        values.append(float(np.mean(vals)) if vals else float("nan"))
    return values
