"""Command-line driver.

Subcommands: synth (write a synthetic bundle), init (semantic initial
calibration), calibrate (MI-ascent calibration), eval (seeded sweeps over
frame counts and label-noise rates).

Exit codes: 0 success, 2 configuration/validation error, 3 initialization
failure, 4 optimization divergence.

Options may come from a JSON config file (--config) keyed by the long
option names with dashes replaced by underscores; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .calibrator import CalibConfig, calibrate
from .errors import CalibError, DivergedError, InvalidArgumentError, InvalidConfigError
from .formats import (load_json, pose_from_dict, read_bundle,
                      spherical_from_dict, write_bundle, write_init_report,
                      write_run_report, write_trace_csv)
from .geometry import CameraIntrinsics, se3_exp
from .initializer import SphericalConfig, run_initialization
from .synth import SceneSpec, corrupt_labels, generate, pose_error

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INIT_FAILED = 3
EXIT_DIVERGED = 4

_SCENE_DEFAULTS = {
    "classes": 8,
    "width": 1280,
    "height": 720,
    "fx": 1000.0,
    "fy": 1000.0,
    "lidar_rows": 64,
    "lidar_cols": 800,
    "lidar_fov_h": 360.0,
    "lidar_fov_v": 70.0,
    "min_objects": 8,
    "max_objects": 14,
}

_CALIB_DEFAULTS = {
    "batch": CalibConfig.batch_size,
    "iterations": CalibConfig.max_iterations,
    "alpha": CalibConfig.alpha,
    "beta": CalibConfig.beta,
    "beta_decay": CalibConfig.beta_decay,
    "beta_decay_every": CalibConfig.beta_decay_every,
    "conv_window": CalibConfig.convergence_window,
    "conv_threshold": CalibConfig.convergence_threshold,
}


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_CONFIG


class _Options:
    """Flag > config-file > default resolution for one subcommand."""

    def __init__(self, args, defaults):
        self._args = vars(args)
        self._defaults = defaults
        self._config = {}
        path = self._args.get("config")
        if path:
            self._config = load_json(path)
            unknown = set(self._config) - set(defaults) - set(self._args)
            if unknown:
                raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")

    def __getitem__(self, key):
        flag = self._args.get(key)
        if flag is not None:
            return flag
        if key in self._config:
            return self._config[key]
        return self._defaults.get(key)


def _add_scene_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--classes", type=int, help="number of semantic classes")
    p.add_argument("--width", type=int, help="camera image width")
    p.add_argument("--height", type=int, help="camera image height")
    p.add_argument("--fx", type=float, help="focal length x (px)")
    p.add_argument("--fy", type=float, help="focal length y (px)")
    p.add_argument("--lidar-rows", type=int, dest="lidar_rows")
    p.add_argument("--lidar-cols", type=int, dest="lidar_cols")
    p.add_argument("--lidar-fov-h", type=float, dest="lidar_fov_h")
    p.add_argument("--lidar-fov-v", type=float, dest="lidar_fov_v")
    p.add_argument("--min-objects", type=int, dest="min_objects")
    p.add_argument("--max-objects", type=int, dest="max_objects")


def _add_calib_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--batch", type=int, help="points per iteration")
    p.add_argument("--iterations", type=int, help="maximum iterations")
    p.add_argument("--alpha", type=float, help="critic learning rate")
    p.add_argument("--beta", type=float, help="pose learning rate")
    p.add_argument("--beta-decay", type=float, dest="beta_decay")
    p.add_argument("--beta-decay-every", type=int, dest="beta_decay_every")
    p.add_argument("--conv-window", type=int, dest="conv_window")
    p.add_argument("--conv-threshold", type=float, dest="conv_threshold")


def _scene_spec(opt, seed: int) -> SceneSpec:
    intr = CameraIntrinsics(fx=opt["fx"], fy=opt["fy"],
                            cx=opt["width"] / 2.0, cy=opt["height"] / 2.0,
                            width=opt["width"], height=opt["height"])
    lidar = SphericalConfig.with_camera(
        lidar_fov_h_deg=opt["lidar_fov_h"], lidar_fov_v_deg=opt["lidar_fov_v"],
        lidar_rows=opt["lidar_rows"], lidar_cols=opt["lidar_cols"], intrinsics=intr)
    return SceneSpec(seed=seed, num_classes=opt["classes"],
                     n_objects=(opt["min_objects"], opt["max_objects"]),
                     intrinsics=intr, lidar=lidar)


def _calib_config(opt, seed: int) -> CalibConfig:
    return CalibConfig(
        batch_size=opt["batch"], max_iterations=opt["iterations"],
        alpha=opt["alpha"], beta=opt["beta"], beta_decay=opt["beta_decay"],
        beta_decay_every=opt["beta_decay_every"],
        convergence_window=opt["conv_window"],
        convergence_threshold=opt["conv_threshold"], seed=seed)


def cmd_synth(args) -> int:
    try:
        opt = _Options(args, {**_SCENE_DEFAULTS, "seed": 0, "frames": 10, "noise": 0.0})
        frames = int(opt["frames"])
        noise = float(opt["noise"])
        if frames < 1:
            return _fail("--frames must be at least 1")
        if not 0.0 <= noise <= 1.0:
            return _fail("--noise must be in [0, 1]")
        spec = _scene_spec(opt, int(opt["seed"]))
        bundle = generate(spec, frames)
        if noise > 0.0:
            bundle = corrupt_labels(bundle, noise, seed=int(opt["seed"]) + 1)
        path = write_bundle(bundle, args.out)
    except (CalibError, OSError, json.JSONDecodeError) as exc:
        return _fail(str(exc))
    print(f"wrote {frames} frame pairs to {path.parent}")
    return EXIT_OK


def cmd_init(args) -> int:
    try:
        opt = _Options(args, {"seed": 0, "correspondences": 200})
        frames, _, manifest = read_bundle(args.data)
        cfg = spherical_from_dict(manifest["lidar"])
        report = run_initialization(frames, cfg,
                                    n_correspondences=int(opt["correspondences"]),
                                    seed=int(opt["seed"]))
        write_init_report(args.out, report)
    except (CalibError, OSError, KeyError, json.JSONDecodeError) as exc:
        return _fail(str(exc))
    if report.failed or report.pose is None:
        print("initialization failed; see report for per-scan errors", file=sys.stderr)
        return EXIT_INIT_FAILED
    n_ok = sum(1 for s in report.scans if s.error is None)
    print(f"initialized from {n_ok}/{len(report.scans)} scans; report at {args.out}")
    return EXIT_OK


def _load_gt(path):
    doc = load_json(path)
    if isinstance(doc, dict) and doc.get("ground_truth"):
        return pose_from_dict(doc["ground_truth"])
    return pose_from_dict(doc)


def _load_init_pose(path):
    """Accept a bare pose JSON or an initialization report."""
    doc = load_json(path)
    if isinstance(doc, dict) and "pose" in doc:
        if doc["pose"] is None:
            raise InvalidArgumentError(f"{path} records a failed initialization")
        return pose_from_dict(doc["pose"])
    return pose_from_dict(doc)


def cmd_calibrate(args) -> int:
    try:
        opt = _Options(args, {**_CALIB_DEFAULTS, "seed": 0})
        init_path = Path(args.init)
        if not init_path.exists():
            return _fail(f"init pose file not found: {init_path}")
        init = _load_init_pose(init_path)
        frames, _, _ = read_bundle(args.data)
        gt = _load_gt(args.gt) if args.gt else None
        cfg = _calib_config(opt, int(opt["seed"]))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except (CalibError, OSError, KeyError, json.JSONDecodeError) as exc:
        return _fail(str(exc))
    try:
        run = calibrate(frames, init, cfg)
    except DivergedError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except CalibError as exc:
        return _fail(str(exc))
    echo = {k: opt[k] for k in _CALIB_DEFAULTS}
    echo["seed"] = int(opt["seed"])
    write_run_report(out / "report.json", run, config_echo=echo)
    write_trace_csv(out / "trace.csv", run, gt=gt)
    print(f"calibrated in {run.iterations} iterations "
          f"({run.wall_time_s:.1f}s); report at {out / 'report.json'}", file=sys.stderr)
    return EXIT_OK


def _parse_list(text, cast):
    items = [tok for tok in str(text).split(",") if tok.strip() != ""]
    return [cast(tok) for tok in items]


def cmd_eval(args) -> int:
    try:
        opt = _Options(args, {**_SCENE_DEFAULTS, **_CALIB_DEFAULTS,
                              "seeds": 5, "perturb_deg": 2.0, "perturb_m": 0.10,
                              "frames": "1,10,50", "noise": "0.0"})
        frame_counts = _parse_list(opt["frames"], int)
        noise_rates = _parse_list(opt["noise"], float)
        n_seeds = int(opt["seeds"])
        if not frame_counts or not noise_rates or n_seeds < 1:
            return _fail("frame list, noise list, and seed count must be nonempty")
        if any(f < 1 for f in frame_counts) or any(not 0 <= p <= 1 for p in noise_rates):
            return _fail("frame counts must be >= 1 and noise rates in [0, 1]")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except (CalibError, OSError, json.JSONDecodeError) as exc:
        return _fail(str(exc))

    rows = []
    for n_frames in frame_counts:
        for noise in noise_rates:
            for trial in range(n_seeds):
                spec = _scene_spec(opt, seed=1000 * trial + 7)
                bundle = generate(spec, n_frames)
                if noise > 0:
                    bundle = corrupt_labels(bundle, noise, seed=trial + 31)
                rng = np.random.default_rng(trial)
                delta = np.concatenate([
                    float(opt["perturb_m"]) * rng.choice([-1.0, 1.0], 3),
                    np.deg2rad(float(opt["perturb_deg"])) * rng.choice([-1.0, 1.0], 3),
                ])
                init = se3_exp(delta).compose(bundle.gt_pose)
                cfg = _calib_config(opt, seed=trial)
                start = time.perf_counter()
                try:
                    run = calibrate(bundle.frames, init, cfg)
                except DivergedError as exc:
                    print(f"trial {trial} frames={n_frames} noise={noise} diverged: {exc}",
                          file=sys.stderr)
                    return EXIT_DIVERGED
                wall = time.perf_counter() - start
                rot, trans = pose_error(run.pose, bundle.gt_pose)
                rows.append((trial, n_frames, noise, rot, trans, wall))
                print(f"trial={trial} frames={n_frames} noise={noise} "
                      f"rot={rot:.3f} trans={trans:.4f} ({wall:.1f}s)", file=sys.stderr)

    csv_path = out / "sweep.csv"
    with open(csv_path, "w") as fh:
        fh.write("trial,frames,noise,rot_err_deg,trans_err_m,wall_s\n")
        for trial, f, p, rot, trans, wall in rows:
            fh.write(f"{trial},{f},{p!r},{rot!r},{trans!r},{wall!r}\n")
    print(f"wrote {len(rows)} trials to {csv_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="milcal",
                                     description="Semantic LiDAR-camera extrinsic calibration")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled bundle")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--noise", type=float, help="label flip probability")
    _add_scene_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("init", help="semantic initial calibration")
    p.add_argument("--data", required=True, help="bundle directory")
    p.add_argument("--out", required=True, help="init report JSON path")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--correspondences", type=int)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("calibrate", help="MI-ascent calibration")
    p.add_argument("--data", required=True, help="bundle directory")
    p.add_argument("--init", required=True, help="initial pose JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--gt", help="manifest or pose JSON with ground truth")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int)
    _add_calib_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("eval", help="seeded sweeps over frames and noise")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--frames", help="comma-separated frame counts")
    p.add_argument("--noise", help="comma-separated noise rates")
    p.add_argument("--seeds", type=int, help="trials per cell")
    p.add_argument("--perturb-deg", type=float, dest="perturb_deg")
    p.add_argument("--perturb-m", type=float, dest="perturb_m")
    _add_scene_flags(p)
    _add_calib_flags(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, matching the config-error code
        return int(exc.code) if exc.code is not None else EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
