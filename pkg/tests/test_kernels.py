"""Parity between the compiled kernels and the NumPy fallback."""

import numpy as np
import pytest

from milcal.kernels import BACKEND, numpy_backend

try:
    from milcal.kernels import _ckern
except ImportError:
    _ckern = None

needs_compiled = pytest.mark.skipif(_ckern is None,
                                    reason="compiled extension not built")


def _case(seed=0, n=500):
    rng = np.random.default_rng(seed)
    points = rng.uniform([-10, -10, -2], [10, 10, 30], size=(n, 3))
    v = rng.normal(scale=0.3, size=3)
    angle = np.linalg.norm(v)
    k = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]]) / angle
    rot = np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)
    trans = rng.normal(scale=0.5, size=3)
    return rng, points, np.ascontiguousarray(rot), trans


class TestBackendSelection:
    def test_backend_reports_a_known_name(self):
        assert BACKEND in ("compiled", "python")

    @needs_compiled
    def test_default_prefers_compiled(self):
        assert BACKEND == "compiled"


@needs_compiled
class TestParity:
    def test_project_points(self):
        for seed in range(5):
            rng, points, rot, trans = _case(seed)
            args = (points, rot, trans, 400.0, 420.0, 320.0, 180.0, 640, 360, 1e-6)
            uv_a, z_a, v_a = numpy_backend.project_points(*args)
            uv_b, z_b, v_b = _ckern.project_points(*args)
            assert np.array_equal(v_a, v_b)
            assert np.allclose(uv_a, uv_b, atol=1e-12)
            assert np.allclose(z_a, z_b, atol=1e-12)

    def test_project_pullback(self):
        for seed in range(5):
            rng, points, rot, trans = _case(seed)
            grad = rng.normal(size=(points.shape[0], 2))
            valid = rng.random(points.shape[0]) < 0.8
            a = numpy_backend.project_pullback(points, rot, trans, 400.0, 420.0,
                                               grad, valid)
            b = _ckern.project_pullback(points, rot, trans, 400.0, 420.0,
                                        grad, valid.view(np.uint8))
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_sample_labels_and_pullback(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            labels = rng.integers(0, 6, size=(40, 50)).astype(np.int32)
            uv = rng.uniform([0, 0], [49, 39], size=(300, 2))
            a = numpy_backend.sample_labels(labels, 6, uv)
            b = _ckern.sample_labels(labels, 6, uv)
            assert np.array_equal(a, b)
            grad = rng.normal(size=(300, 6))
            ga = numpy_backend.sample_labels_pullback(labels, 6, uv, grad)
            gb = _ckern.sample_labels_pullback(labels, 6, uv, grad)
            assert np.array_equal(ga, gb)

    def test_mi_score_map(self):
        for seed in range(3):
            rng = np.random.default_rng(seed)
            c = 5
            fixed = rng.integers(0, c + 1, size=(24, 48)).astype(np.int32)
            moving = rng.integers(0, c, size=(12, 20)).astype(np.int32)
            args = (fixed, moving, c, -24, 48, -6, 13, 8)
            a = numpy_backend.mi_score_map(*args)
            b = _ckern.mi_score_map(*args)
            assert np.array_equal(np.isnan(a), np.isnan(b))
            ok = ~np.isnan(a)
            assert np.allclose(a[ok], b[ok], rtol=1e-12, atol=1e-12)

    def test_mi_score_map_negative_du_wraps_like_numpy(self):
        rng = np.random.default_rng(9)
        c = 3
        fixed = rng.integers(0, c, size=(10, 16)).astype(np.int32)
        moving = fixed[2:8, 3:11].copy()
        args = (fixed, moving, c, -16, 32, -5, 11, 4)
        a = numpy_backend.mi_score_map(*args)
        b = _ckern.mi_score_map(*args)
        ok = ~np.isnan(a)
        assert np.array_equal(ok, ~np.isnan(b))
        assert np.allclose(a[ok], b[ok], rtol=1e-12)
