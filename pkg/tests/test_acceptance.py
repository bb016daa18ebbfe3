"""Acceptance suite: one test per criterion, each printing PASS or FAIL.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
lines. The pose-recovery and trend criteria run scaled-down synthetic
protocols (smaller camera and LiDAR grids than the defaults) to keep the
suite inside its runtime budgets; thresholds are unchanged.
"""

import time

import numpy as np
import pytest

from milcal import (CalibConfig, CameraIntrinsics, SceneSpec, StatisticsNetwork,
                    aggregate_inits, ascent_step, bilinear_sample_pullback,
                    calibrate, corrupt_labels, discrete_mi, dv_bound, generate,
                    modified_z_scores, pnp_solve, pose_error, project,
                    project_pullback, register_2d, se3_exp)
from milcal.initializer import SphericalConfig, SphericalLabelImage, ZoomedLabelImage
from milcal.kernels import sample_labels
from milcal.mine import AdamState, dv_bound_and_pullback
from milcal.sampling import LabelPlanes
from milcal.geometry import ProjectedPoints


def _report(name, ok, detail=""):
    print(f"\n[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"{name} failed: {detail}"


# ---------------------------------------------------------------- protocols

SWEEP_INTR = CameraIntrinsics(fx=300.0, fy=300.0, cx=320.0, cy=180.0,
                              width=640, height=360)
SWEEP_LIDAR = SphericalConfig.with_camera(360.0, 70.0, 48, 512, SWEEP_INTR)
SWEEP_CFG = dict(batch_size=1024, max_iterations=1200, alpha=3e-4, beta=2e-3,
                 beta_decay=0.5, beta_decay_every=250)
N_SEEDS = 10


def _perturbed_init(gt, seed, deg=2.0, meters=0.10):
    rng = np.random.default_rng(seed)
    delta = np.concatenate([meters * rng.choice([-1.0, 1.0], 3),
                            np.deg2rad(deg) * rng.choice([-1.0, 1.0], 3)])
    return se3_exp(delta).compose(gt)


def _run_trial(seed, n_frames, noise, n_objects):
    spec = SceneSpec(seed=1000 + seed, intrinsics=SWEEP_INTR, lidar=SWEEP_LIDAR,
                     n_objects=n_objects)
    bundle = generate(spec, n_frames)
    if noise > 0:
        bundle = corrupt_labels(bundle, noise, seed=2000 + seed)
    init = _perturbed_init(bundle.gt_pose, seed)
    start = time.perf_counter()
    run = calibrate(bundle.frames, init, CalibConfig(seed=seed, **SWEEP_CFG))
    wall = time.perf_counter() - start
    rot, trans = pose_error(run.pose, bundle.gt_pose)
    return rot, trans, wall


@pytest.fixture(scope="module")
def sweep():
    """Shared seeded trials for the recovery and trend criteria."""
    cells = {}
    for n_frames in (1, 10, 50):
        cells[("clean", n_frames)] = [_run_trial(s, n_frames, 0.0, (4, 7))
                                      for s in range(N_SEEDS)]
    for noise in (0.2, 0.5):
        cells[("noise", noise)] = [_run_trial(s, 10, noise, (4, 7))
                                   for s in range(N_SEEDS)]
    return cells


# ------------------------------------------------------- criterion 1


def test_criterion_1_gradient_suite():
    start = time.perf_counter()
    intr = CameraIntrinsics(fx=500.0, fy=480.0, cx=320.0, cy=180.0,
                            width=640, height=360)

    worst_proj = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        pts = rng.uniform([-6, -6, 2], [6, 6, 30], size=(20, 3))
        pose = se3_exp(rng.normal(scale=0.2, size=6))
        pr = project(pts, pose, intr)
        if pr.n_valid == 0:
            continue
        grad = rng.normal(size=(20, 2))
        grad[~pr.valid] = 0.0
        analytic = project_pullback(pts, pose, intr, grad, pr.valid)
        h = 1e-6
        numeric = np.zeros(6)
        for j in range(6):
            d = np.zeros(6)
            d[j] = h
            up = project(pts, se3_exp(d).compose(pose), intr).uv
            dn = project(pts, se3_exp(-d).compose(pose), intr).uv
            numeric[j] = (np.sum(grad[pr.valid] * (up[pr.valid] - dn[pr.valid]))) / (2 * h)
        rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-6)
        worst_proj = max(worst_proj, float(rel.max()))

    worst_samp = 0.0
    h = 1e-4
    for seed in range(100):
        rng = np.random.default_rng(seed)
        labels = rng.integers(0, 6, size=(30, 40)).astype(np.int32)
        planes = LabelPlanes(labels, 6)
        uv = rng.uniform([0.3, 0.3], [38.6, 28.6], size=(15, 2))
        frac = uv - np.floor(uv)
        uv = np.floor(uv) + np.clip(frac, 3 * h, 1 - 3 * h)
        pts = ProjectedPoints(uv=uv, depth=np.ones(15), valid=np.ones(15, bool))
        grad = rng.normal(size=(15, 6))
        analytic = bilinear_sample_pullback(planes, pts, grad)
        numeric = np.zeros_like(analytic)
        for j in range(2):
            up = uv.copy()
            up[:, j] += h
            dn = uv.copy()
            dn[:, j] -= h
            su = np.sum(sample_labels(labels, 6, up) * grad, axis=1)
            sd = np.sum(sample_labels(labels, 6, dn) * grad, axis=1)
            numeric[:, j] = (su - sd) / (2 * h)
        rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1.0)
        worst_samp = max(worst_samp, float(rel.max()))

    worst_dv = 0.0
    n_checked = 0
    h = 1e-5
    for seed in range(100):
        rng = np.random.default_rng(seed)
        c = 3
        net = StatisticsNetwork.create(c, hidden=(12, 12), rng=seed)
        xj = rng.dirichlet(np.ones(c), size=16)
        yj = rng.dirichlet(np.ones(c), size=16)
        xm, ym = xj, yj[rng.permutation(16)]
        _, grad_theta, _ = dv_bound_and_pullback(net, xj, yj, xm, ym)
        flat0 = net.get_flat()
        v0 = dv_bound(net, xj, yj, xm, ym).value
        for k in rng.choice(flat0.size, size=6, replace=False):
            up = flat0.copy()
            up[k] += h
            net.set_flat(up)
            vu = dv_bound(net, xj, yj, xm, ym).value
            dn = flat0.copy()
            dn[k] -= h
            net.set_flat(dn)
            vd = dv_bound(net, xj, yj, xm, ym).value
            net.set_flat(flat0)
            d_up, d_dn = (vu - v0) / h, (v0 - vd) / h
            if abs(d_up - d_dn) > 1e-3 * max(abs(d_up), abs(d_dn), 1e-6):
                continue  # ReLU kink inside the step: FD not meaningful
            n_checked += 1
            numeric = (vu - vd) / (2 * h)
            rel = abs(grad_theta[k] - numeric) / max(abs(numeric), 1e-6)
            worst_dv = max(worst_dv, rel)

    elapsed = time.perf_counter() - start
    ok = worst_proj < 1e-4 and worst_samp < 1e-4 and worst_dv < 1e-4 \
        and n_checked >= 500 and elapsed < 30.0
    _report("criterion 1 (gradient suite)", ok,
            f"proj={worst_proj:.2e} samp={worst_samp:.2e} dv={worst_dv:.2e} "
            f"checked={n_checked} time={elapsed:.1f}s")


# ------------------------------------------------------- criterion 2


def _train_dv(identical, seed, steps=1200, batch=256, lr=2e-3):
    rng = np.random.default_rng(seed)
    net = StatisticsNetwork.create(2, rng=rng)
    opt = AdamState.for_size(net.n_params, lr)
    for _ in range(steps):
        x = np.eye(2)[rng.integers(0, 2, size=batch)]
        y = x.copy() if identical else np.eye(2)[rng.integers(0, 2, size=batch)]
        perm = rng.permutation(batch)
        _, grad_theta, _ = dv_bound_and_pullback(net, x, y, x, y[perm])
        ascent_step(net, opt, grad_theta)
    n = 100_000
    x = np.eye(2)[rng.integers(0, 2, size=n)]
    y = x.copy() if identical else np.eye(2)[rng.integers(0, 2, size=n)]
    return dv_bound(net, x, y, x, y[rng.permutation(n)]).value


def test_criterion_2_mi_oracles():
    start = time.perf_counter()
    ln2 = float(np.log(2.0))
    v_same = _train_dv(identical=True, seed=0)
    v_indep = _train_dv(identical=False, seed=1)
    a = np.tile(np.array([[0, 1]], dtype=np.int32), (16, 16))
    v_exact = discrete_mi(a, a, num_classes=2)
    elapsed = time.perf_counter() - start
    ok = (ln2 - 0.05 <= v_same <= ln2 + 0.02) \
        and (-0.02 <= v_indep <= 0.05) \
        and abs(v_exact - ln2) <= 1e-12 \
        and elapsed < 60.0
    _report("criterion 2 (MI oracle suite)", ok,
            f"identical={v_same:.4f} (ln2={ln2:.4f}) independent={v_indep:.4f} "
            f"discrete|err|={abs(v_exact - ln2):.1e} time={elapsed:.1f}s")


# ------------------------------------------------------- criterion 3


def test_criterion_3_pose_recovery():
    results = []
    slowest = 0.0
    for seed in range(N_SEEDS):
        spec = SceneSpec(seed=1000 + seed, intrinsics=SWEEP_INTR,
                         lidar=SWEEP_LIDAR, n_objects=(8, 14))
        bundle = generate(spec, 10)
        init = _perturbed_init(bundle.gt_pose, seed)
        start = time.perf_counter()
        run = calibrate(bundle.frames, init, CalibConfig(seed=seed, **SWEEP_CFG))
        wall = time.perf_counter() - start
        slowest = max(slowest, wall)
        results.append(pose_error(run.pose, bundle.gt_pose))
    hits = sum(1 for rot, trans in results if rot <= 0.5 and trans <= 0.05)
    ok = hits >= 9 and slowest <= 300.0
    detail = (f"{hits}/{N_SEEDS} seeds within 0.5deg/0.05m; "
              f"worst=({max(r for r, _ in results):.3f}deg, "
              f"{max(t for _, t in results):.4f}m); slowest run {slowest:.0f}s")
    _report("criterion 3 (pose recovery)", ok, detail)


# ------------------------------------------------------- criteria 4 and 5


def test_criterion_4_frame_count_trend(sweep):
    iqrs = []
    for n_frames in (1, 10, 50):
        rots = np.array([r for r, _, _ in sweep[("clean", n_frames)]])
        q75, q25 = np.percentile(rots, [75, 25])
        iqrs.append(q75 - q25)
    ok = iqrs[0] >= iqrs[1] >= iqrs[2]
    _report("criterion 4 (frame-count trend)", ok,
            "IQR(rot) over frames {1,10,50} = "
            + ", ".join(f"{v:.3f}" for v in iqrs))


def test_frame_count_median_invariant(sweep):
    # module invariant alongside criterion 4: the median rotation error is
    # non-increasing in the frame count as well
    medians = [float(np.median([r for r, _, _ in sweep[("clean", n)]]))
               for n in (1, 10, 50)]
    assert medians[0] >= medians[1] >= medians[2], medians


def test_criterion_5_noise_trend(sweep):
    medians = []
    for key in (("clean", 10), ("noise", 0.2), ("noise", 0.5)):
        rots = np.array([r for r, _, _ in sweep[key]])
        medians.append(float(np.median(rots)))
    ok = medians[0] < medians[1] < medians[2]
    _report("criterion 5 (noise trend)", ok,
            "median rot err over noise {0,0.2,0.5} = "
            + ", ".join(f"{v:.3f}" for v in medians))


# ------------------------------------------------------- criterion 6


def _blocky_labels(rng, h, w, c, sentinel_frac=0.1):
    labels = rng.integers(0, c, size=(h, w)).astype(np.int32)
    for _ in range(12):
        r0, c0 = rng.integers(0, h - 4), rng.integers(0, w - 8)
        labels[r0:r0 + rng.integers(2, 5), c0:c0 + rng.integers(4, 9)] = \
            rng.integers(0, c)
    labels[rng.random((h, w)) < sentinel_frac] = c
    return labels


def _wild_poses(n_wild):
    poses = [se3_exp(np.zeros(6)) for _ in range(10 - n_wild)]
    for k in range(n_wild):
        v = np.zeros(6)
        if k % 6 < 3:
            v[k % 6] = 80.0 + 10.0 * k
        else:
            v[k % 6] = np.radians(100.0 + 5.0 * k)
        poses.append(se3_exp(v))
    return poses


def test_criterion_6_initializer_suite():
    # planted-offset registration on 20 seeded scenes
    reg_exact = True
    for seed in range(20):
        rng = np.random.default_rng(seed)
        h, w, c = 48, 128, 6
        labels = _blocky_labels(rng, h, w, c)
        fixed = SphericalLabelImage(labels=labels,
                                    point_index=np.full((h, w), -1, dtype=np.int64),
                                    ranges=np.full((h, w), np.inf), num_classes=c)
        r0 = int(rng.integers(0, h - 20))
        c0 = int(rng.integers(0, w))
        cols = (np.arange(c0, c0 + 40)) % w
        moving = ZoomedLabelImage(labels=labels[r0:r0 + 20][:, cols].copy(),
                                  num_classes=c, src_rows=np.arange(20),
                                  src_cols=np.arange(40))
        reg = register_2d(fixed, moving)
        if (reg.du % w, reg.dv) != (c0, r0):
            reg_exact = False

    # PnP on 20 exact correspondences
    rng = np.random.default_rng(99)
    intr = CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=180.0,
                            width=640, height=360)
    gt = se3_exp(rng.normal(scale=0.4, size=6))
    depths = rng.uniform(4.0, 30.0, size=20)
    u = rng.uniform(5.0, 635.0, size=20)
    v = rng.uniform(5.0, 355.0, size=20)
    rays = np.stack([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy,
                     np.ones(20)], axis=1)
    world = (rays * depths[:, None] - gt.t) @ gt.R
    est = pnp_solve(world, np.stack([u, v], axis=1), intr, seed=0)
    rot_err, trans_err = pose_error(est, gt)
    pnp_ok = np.radians(rot_err) < 1e-6 and trans_err < 1e-6

    # modified z-score hand case
    z = modified_z_scores([2.0, 4.0, 6.0, 100.0])
    z_ok = abs(z[3] - 32.039) <= 1e-3

    # aggregation failure boundary
    agg6 = aggregate_inits(_wild_poses(6))
    agg7 = aggregate_inits(_wild_poses(7))
    agg_ok = (not agg6.failed) and agg7.failed

    ok = reg_exact and pnp_ok and z_ok and agg_ok
    _report("criterion 6 (initializer suite)", ok,
            f"registration_exact={reg_exact} pnp=({rot_err:.2e}deg,"
            f"{trans_err:.2e}m) z={z[3]:.5f} boundary_6/10_pass="
            f"{not agg6.failed} 7/10_fail={agg7.failed}")


# ------------------------------------------------------- criterion 7


def test_criterion_7_cli_determinism(tmp_path):
    from milcal.cli import main
    data = tmp_path / "data"
    args = ["synth", "--out", str(data), "--seed", "21", "--frames", "2",
            "--width", "512", "--height", "288", "--fx", "400", "--fy", "400",
            "--lidar-rows", "48", "--lidar-cols", "512"]
    assert main(args) == 0
    from milcal.formats import read_bundle, write_pose_json
    _, gt, _ = read_bundle(data)
    init_file = tmp_path / "init.json"
    write_pose_json(init_file, se3_exp([0.02, 0, 0, 0, 0.01, 0]).compose(gt))
    payloads = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        code = main(["calibrate", "--data", str(data), "--init", str(init_file),
                     "--out", str(out), "--seed", "4", "--iterations", "150",
                     "--batch", "256", "--alpha", "3e-4", "--beta", "2e-3",
                     "--gt", str(data / "manifest.json")])
        assert code == 0
        payloads.append(((out / "report.json").read_bytes(),
                         (out / "trace.csv").read_bytes()))
    ok = payloads[0] == payloads[1]
    _report("criterion 7 (CLI determinism)", ok,
            "report.json and trace.csv byte-identical across reruns")
