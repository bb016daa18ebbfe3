import numpy as np
import pytest

from milcal import CameraIntrinsics, SceneSpec, generate
from milcal.initializer import SphericalConfig


def small_intrinsics():
    return CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=180.0,
                            width=640, height=360)


def tiny_intrinsics():
    return CameraIntrinsics(fx=400.0, fy=400.0, cx=256.0, cy=144.0,
                            width=512, height=288)


def tiny_spec(seed=0, **kw):
    """Small, fast scene for unit tests."""
    intr = tiny_intrinsics()
    lidar = SphericalConfig.with_camera(360.0, 70.0, 32, 256, intr)
    return SceneSpec(seed=seed, intrinsics=intr, lidar=lidar,
                     n_objects=kw.pop("n_objects", (6, 9)), **kw)


@pytest.fixture(scope="session")
def tiny_bundle():
    """Three small frames with ground truth, shared across tests."""
    return generate(tiny_spec(seed=4), 3)


@pytest.fixture(scope="session")
def init_bundle():
    """Richer bundle at registration-friendly resolution for the initializer."""
    intr = small_intrinsics()
    lidar = SphericalConfig.with_camera(360.0, 70.0, 64, 800, intr)
    return generate(SceneSpec(seed=31, intrinsics=intr, lidar=lidar), 10)


def random_pose(rng, rot_scale=1.0, trans_scale=1.0):
    from milcal import se3_exp
    v = np.concatenate([rng.normal(scale=trans_scale, size=3),
                        rng.normal(scale=rot_scale, size=3)])
    return se3_exp(v)
