"""Label images, their one-hot plane view, and differentiable sampling.

Sampling uses a width-1 triangle (bilinear) kernel per class plane:
soft[c] = sum_hw plane_c[h, w] * max(0, 1-|u-w|) * max(0, 1-|v-h|).
Class IDs are never interpolated directly; interpolation happens on the
one-hot planes so the result is a point on the class simplex.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import kernels
from .errors import EmptyBatchError, InvalidArgumentError
from .geometry import ProjectedPoints


def _check_labels(labels, num_classes, allow_sentinel=False):
    arr = np.ascontiguousarray(labels, dtype=np.int32)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidArgumentError("label image must be 2-D and nonempty")
    top = num_classes + 1 if allow_sentinel else num_classes
    if arr.min() < 0 or arr.max() >= top:
        raise InvalidArgumentError(f"labels must lie in [0, {top})")
    return arr


@dataclasses.dataclass(frozen=True)
class LabelImage:
    """Dense per-pixel class IDs in [0, num_classes)."""

    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.num_classes < 1:
            raise InvalidArgumentError("num_classes must be at least 1")
        object.__setattr__(self, "labels", _check_labels(self.labels, self.num_classes))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclasses.dataclass(frozen=True)
class LabelPlanes:
    """One-hot class planes of a label image.

    Stored compactly as the label image itself; ``as_array`` materializes
    the (C, H, W) float planes. Plane values are exactly 0/1 and sum to 1
    at every pixel.
    """

    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.num_classes < 1:
            raise InvalidArgumentError("num_classes must be at least 1")
        object.__setattr__(self, "labels", _check_labels(self.labels, self.num_classes))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def as_array(self) -> np.ndarray:
        planes = np.zeros((self.num_classes, self.height, self.width))
        h_idx, w_idx = np.meshgrid(np.arange(self.height), np.arange(self.width), indexing="ij")
        planes[self.labels, h_idx, w_idx] = 1.0
        return planes

    def argmax_image(self) -> LabelImage:
        return LabelImage(self.labels.copy(), self.num_classes)


@dataclasses.dataclass(frozen=True)
class SoftLabelBatch:
    """Per-point class-probability rows with their source coordinates.

    ``point_indices`` maps each row back to the index of the projected
    point it was sampled for (invalid points are excluded from the batch).
    """

    soft: np.ndarray
    uv: np.ndarray
    point_indices: np.ndarray


def to_one_hot(img: LabelImage) -> LabelPlanes:
    """One-hot planes of a label image: plane c is 1 where the label is c."""
    return LabelPlanes(img.labels.copy(), img.num_classes)


def bilinear_sample(planes: LabelPlanes, pts: ProjectedPoints) -> SoftLabelBatch:
    """Sample the planes at every valid projected point.

    Raises EmptyBatchError when no point is valid; the caller is expected
    to skip the iteration in that case.
    """
    idx = np.flatnonzero(pts.valid)
    if idx.size == 0:
        raise EmptyBatchError("no valid projected points to sample")
    uv = np.ascontiguousarray(pts.uv[idx], dtype=np.float64)
    soft = kernels.sample_labels(planes.labels, planes.num_classes, uv)
    return SoftLabelBatch(soft=soft, uv=uv, point_indices=idx)


def bilinear_sample_pullback(planes: LabelPlanes, pts: ProjectedPoints,
                             grad_soft: np.ndarray) -> np.ndarray:
    """Per-point (d/du, d/dv) of <grad_soft[i], soft[i]>.

    Rows of grad_soft align with the valid points, in the same order
    bilinear_sample emits them. The bilinear kernel derivative is
    piecewise constant; exactly on an integer grid line the right/down
    one-sided value is used, and at the far image border the clamped cell
    makes the derivative zero.
    """
    idx = np.flatnonzero(pts.valid)
    grad = np.ascontiguousarray(grad_soft, dtype=np.float64)
    if grad.shape != (idx.size, planes.num_classes):
        raise InvalidArgumentError("grad_soft rows must align with the valid points")
    if idx.size == 0:
        raise EmptyBatchError("no valid projected points")
    uv = np.ascontiguousarray(pts.uv[idx], dtype=np.float64)
    return kernels.sample_labels_pullback(planes.labels, planes.num_classes, uv, grad)
