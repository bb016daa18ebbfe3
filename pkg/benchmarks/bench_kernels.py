#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-NumPy fallback.

Runs each kernel on calibration-sized inputs and prints a per-kernel
timing table. Use --quick for smaller sizes.
"""

import argparse
import time

import numpy as np

from milcal.kernels import numpy_backend

try:
    from milcal.kernels import _ckern
except ImportError:
    _ckern = None


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def make_cases(quick):
    rng = np.random.default_rng(0)
    n = 2_000 if quick else 20_000
    h, w, c = (32, 256, 8) if quick else (64, 800, 8)
    hm, wm = (18, 64) if quick else (36, 145)

    points = rng.uniform([-20, -20, 2], [20, 20, 40], size=(n, 3))
    rot = np.eye(3)
    trans = np.zeros(3)
    fx = fy = 500.0
    cx, cy = 320.0, 180.0
    width, height = 640, 360
    uv = rng.uniform([0.5, 0.5], [width - 1.5, height - 1.5], size=(n, 2))
    labels = rng.integers(0, c, size=(h * 4, w)).astype(np.int32)
    grad_uv = rng.normal(size=(n, 2))
    grad_soft = rng.normal(size=(n, c))
    valid = np.ones(n, dtype=bool)
    fixed = rng.integers(0, c + 1, size=(h, w)).astype(np.int32)
    moving = rng.integers(0, c, size=(hm, wm)).astype(np.int32)
    dv0, n_dv = -h // 4, h // 2

    return {
        "project_points": lambda be: be.project_points(
            points, rot, trans, fx, fy, cx, cy, width, height, 1e-6),
        "project_pullback": lambda be: be.project_pullback(
            points, rot, trans, fx, fy, grad_uv, valid.view(np.uint8)),
        "sample_labels": lambda be: be.sample_labels(labels, c, uv),
        "sample_labels_pullback": lambda be: be.sample_labels_pullback(
            labels, c, uv, grad_soft),
        "mi_score_map": lambda be: be.mi_score_map(
            fixed, moving, c, -(w // 2), w, dv0, n_dv, 16),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller inputs")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if _ckern is None:
        print("compiled extension not available; run 'pip install -e .' first")
    cases = make_cases(args.quick)
    header = f"{'kernel':<24} {'numpy (ms)':>12} {'compiled (ms)':>14} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, call in cases.items():
        t_np = _time(lambda: call(numpy_backend), args.repeats) * 1e3
        if _ckern is not None:
            t_c = _time(lambda: call(_ckern), args.repeats) * 1e3
            print(f"{name:<24} {t_np:>12.3f} {t_c:>14.3f} {t_np / t_c:>8.1f}x")
        else:
            print(f"{name:<24} {t_np:>12.3f} {'-':>14} {'-':>9}")


if __name__ == "__main__":
    main()
