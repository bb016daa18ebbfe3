"""On-disk data formats and report writers.

Everything is byte-deterministic for fixed inputs:

* point clouds: little-endian records of float32 x, y, z + uint16 class
  (14 bytes each), with a JSON sidecar holding count, class count, and
  frame id;
* label images: binary PGM (P5, maxval 255) of class IDs, 255 reserved
  as the unlabeled sentinel;
* poses: JSON with the 4x4 row-major matrix and the 6-vector twist;
* bundles: a manifest.json naming the per-frame files plus the scene
  parameters and optional ground truth.

JSON is always written with sorted keys, two-space indent, and a
trailing newline; floats go through repr and round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .calibrator import CalibFrame, CalibrationRun, PointCloudFrame
from .errors import InvalidArgumentError
from .geometry import CameraIntrinsics, Pose, se3_exp, se3_log
from .initializer import InitializationReport, SphericalConfig
from .sampling import LabelImage, to_one_hot
from .synth import GroundTruthBundle, pose_error

UNLABELED = 255
_CLOUD_DTYPE = np.dtype([("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("c", "<u2")])


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_json(path):
    return json.loads(Path(path).read_text())


def write_pgm(path, labels) -> None:
    """Binary PGM (P5, maxval 255), one byte per pixel, row-major."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise InvalidArgumentError("label image must be 2-D")
    if arr.min() < 0 or arr.max() > UNLABELED:
        raise InvalidArgumentError("labels must fit in one byte")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.astype(np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P5":
            raise InvalidArgumentError(f"not a binary PGM: {path}")
        line = fh.readline()
        while line.startswith(b"#"):
            line = fh.readline()
        w, h = (int(tok) for tok in line.split())
        maxval = int(fh.readline())
        if maxval != 255:
            raise InvalidArgumentError("only maxval 255 PGMs are supported")
        data = np.frombuffer(fh.read(w * h), dtype=np.uint8)
    return data.reshape(h, w).astype(np.int32)


def write_point_cloud(path, points, labels, num_classes, frame_id=0) -> None:
    """Binary records plus a '<stem>.json' sidecar next to the file."""
    path = Path(path)
    pts = np.asarray(points, dtype=np.float64)
    lab = np.asarray(labels)
    rec = np.empty(pts.shape[0], dtype=_CLOUD_DTYPE)
    rec["x"], rec["y"], rec["z"] = pts[:, 0], pts[:, 1], pts[:, 2]
    rec["c"] = lab.astype(np.uint16)
    path.write_bytes(rec.tobytes())
    dump_json({"count": int(pts.shape[0]), "num_classes": int(num_classes),
               "frame_id": int(frame_id)}, path.with_suffix(".json"))


def read_point_cloud(path):
    path = Path(path)
    meta = load_json(path.with_suffix(".json"))
    rec = np.frombuffer(path.read_bytes(), dtype=_CLOUD_DTYPE)
    if rec.shape[0] != meta["count"]:
        raise InvalidArgumentError(f"record count mismatch in {path}")
    points = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float64)
    labels = rec["c"].astype(np.int32)
    return points, labels, meta


def pose_to_dict(pose: Pose) -> dict:
    return {
        "matrix": pose.matrix().tolist(),
        "twist": se3_log(pose).vec.tolist(),
    }


def pose_from_dict(d: dict) -> Pose:
    if "matrix" in d:
        return Pose.from_matrix(np.asarray(d["matrix"], dtype=np.float64))
    if "twist" in d:
        return se3_exp(np.asarray(d["twist"], dtype=np.float64))
    raise InvalidArgumentError("pose dict needs a 'matrix' or 'twist' entry")


def write_pose_json(path, pose: Pose) -> None:
    dump_json(pose_to_dict(pose), path)


def read_pose_json(path) -> Pose:
    return pose_from_dict(load_json(path))


def intrinsics_from_dict(d: dict) -> CameraIntrinsics:
    return CameraIntrinsics(fx=d["fx"], fy=d["fy"], cx=d["cx"], cy=d["cy"],
                            width=d["width"], height=d["height"])


def spherical_from_dict(d: dict) -> SphericalConfig:
    return SphericalConfig(**d)


def write_bundle(bundle: GroundTruthBundle, out_dir) -> Path:
    """Write every frame pair plus manifest.json; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, frame in enumerate(bundle.frames):
        cloud_name = f"frame_{i:04d}.bin"
        image_name = f"frame_{i:04d}.pgm"
        write_point_cloud(out / cloud_name, frame.cloud.points, frame.cloud.labels,
                          frame.image_planes.num_classes, frame_id=i)
        write_pgm(out / image_name, frame.image_planes.labels)
        entries.append({"id": i, "cloud": cloud_name,
                        "cloud_meta": f"frame_{i:04d}.json", "image": image_name})
    manifest = dict(bundle.manifest)
    manifest["frames"] = entries
    path = out / "manifest.json"
    dump_json(manifest, path)
    return path


def read_bundle(data_dir):
    """Load a bundle directory: (frames, ground-truth pose or None, manifest)."""
    data = Path(data_dir)
    manifest = load_json(data / "manifest.json")
    intr = intrinsics_from_dict(manifest["intrinsics"])
    num_classes = int(manifest["num_classes"])
    frames = []
    for entry in manifest["frames"]:
        points, labels, _ = read_point_cloud(data / entry["cloud"])
        img = read_pgm(data / entry["image"])
        if img.max() >= num_classes:
            raise InvalidArgumentError(f"{entry['image']} holds labels above num_classes")
        planes = to_one_hot(LabelImage(img, num_classes))
        frames.append(CalibFrame(cloud=PointCloudFrame(points=points, labels=labels),
                                 image_planes=planes, intrinsics=intr))
    gt = None
    if manifest.get("ground_truth"):
        gt = pose_from_dict(manifest["ground_truth"])
    return frames, gt, manifest


def write_run_report(path, run: CalibrationRun, config_echo: dict | None = None) -> None:
    """Deterministic calibration report; wall time is deliberately omitted
    so identical runs produce identical bytes (it is logged separately)."""
    report = {
        "final_pose": pose_to_dict(run.pose),
        "iterations": int(run.iterations),
        "converged": bool(run.converged),
        "final_mi": run.final_mi,
        "invalid_points_total": int(run.invalid_counts.sum()),
    }
    if config_echo is not None:
        report["config"] = config_echo
    dump_json(report, path)


def write_trace_csv(path, run: CalibrationRun, gt: Pose | None = None) -> None:
    """Per-iteration MI trace; adds error columns when ground truth is given."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["iteration", "mi"]
        if gt is not None:
            header += ["rot_err_deg", "trans_err_m"]
        writer.writerow(header)
        for i in range(run.iterations):
            row = [i, repr(float(run.mi_trace[i]))]
            if gt is not None:
                rot, trans = pose_error(se3_exp(run.twist_trace[i]), gt)
                row += [repr(rot), repr(trans)]
            writer.writerow(row)


def init_report_to_dict(report: InitializationReport) -> dict:
    scans = []
    for s in report.scans:
        scans.append({
            "frame_index": s.frame_index,
            "du": s.du,
            "dv": s.dv,
            "mi_score": s.mi_score,
            "n_correspondences": s.n_correspondences,
            "n_inliers": s.n_inliers,
            "twist": None if s.twist is None else list(s.twist),
            "error": s.error,
        })
    agg = None
    if report.aggregate is not None:
        agg = {
            "twists": report.aggregate.twists.tolist(),
            "z_scores": report.aggregate.z_scores.tolist(),
            "inlier_mask": report.aggregate.inlier_mask.tolist(),
            "n_outliers": int((~report.aggregate.inlier_mask).sum()),
        }
    return {
        "failed": bool(report.failed),
        "pose": None if report.pose is None else pose_to_dict(report.pose),
        "scans": scans,
        "aggregate": agg,
    }


def write_init_report(path, report: InitializationReport) -> None:
    dump_json(init_report_to_dict(report), path)
