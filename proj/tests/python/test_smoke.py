import math
import os

import numpy as np
import pytest

import asid

MICRO = {
    "blocks": 2,
    "channels": 8,
    "refined_width": 2,
    "units": 3,
    "meso": 2,
    "global": 2,
}


def test_count_matches_calibration():
    assert asid.count({}, 720, 1280) == (297110, 68180796720)
    params4, _ = asid.count({"scale": 4}, 720, 1280)
    assert params4 == 312698


def test_count_rejects_unknown_keys():
    with pytest.raises(Exception, match="unknown"):
        asid.count({"frobnicate": 1}, 720, 1280)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(1)
    a = rng.uniform(-5.0, 5.0, size=(4, 6, 7))
    s = asid.softmax(a, -1)
    np.testing.assert_allclose(s.sum(axis=-1), np.ones((4, 6)), atol=1e-12)
    expected = np.exp(a - a.max(axis=-1, keepdims=True))
    expected /= expected.sum(axis=-1, keepdims=True)
    np.testing.assert_allclose(s, expected, atol=1e-12)


def test_matmul_against_numpy():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((3, 4, 5))
    b = rng.standard_normal((3, 5, 2))
    np.testing.assert_allclose(asid.matmul(a, b), a @ b, atol=1e-12)


def test_conv2d_against_manual():
    x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
    w = np.ones((1, 1, 3, 3))
    out = asid.conv2d(x, w)
    assert out.shape == (1, 1, 2, 2)
    assert out[0, 0, 0, 0] == x[0, 0, :3, :3].sum()


def test_pixel_shuffle_shape_and_layout():
    x = np.arange(16, dtype=np.float64).reshape(1, 4, 2, 2)
    y = asid.pixel_shuffle(x, 2)
    assert y.shape == (1, 1, 4, 4)
    # channel c*r*r + dy*r + dx lands at spatial offset (dy, dx)
    assert y[0, 0, 0, 0] == x[0, 0, 0, 0]
    assert y[0, 0, 0, 1] == x[0, 1, 0, 0]
    assert y[0, 0, 1, 0] == x[0, 2, 0, 0]
    assert y[0, 0, 1, 1] == x[0, 3, 0, 0]


def test_bicubic_preserves_constants():
    img = np.full((3, 8, 6), 0.25)
    out = asid.bicubic_resize(img, 16, 12)
    assert out.shape == (3, 16, 12)
    np.testing.assert_allclose(out, 0.25, atol=1e-9)


def test_psnr_sentinel_and_ssim_unity():
    rng = np.random.default_rng(3)
    img = np.round(rng.uniform(size=(3, 24, 24)) * 255.0) / 255.0
    assert math.isinf(asid.psnr(img, img, 2))
    assert asid.ssim(img, img, 2) == pytest.approx(1.0, abs=1e-9)


def test_build_and_upscale(tmp_path):
    store = os.fspath(tmp_path / "micro.bin")
    asid.build_weights(store, MICRO, seed=5)
    assert os.path.exists(store)

    rng = np.random.default_rng(4)
    lr = rng.uniform(size=(3, 10, 14))
    sr = asid.upscale(lr, store)
    assert sr.shape == (3, 20, 28)
    assert sr.min() >= 0.0 and sr.max() <= 1.0
