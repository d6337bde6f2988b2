# SPDX-License-Identifier: Apache-2.0
"""Smoke tests for the pywespe module, including an independent SSIM oracle
from scikit-image."""

import math
import os
import subprocess
import sys

import numpy as np
import pytest

import pywespe as pw


def rand_img(shape, seed=0, lo=0.0, hi=1.0):
    return np.random.default_rng(seed).uniform(lo, hi, shape)


def test_blur_kernel_against_closed_form():
    k = pw.make_blur_kernel()
    assert k.shape == (21, 21)
    assert k[10, 10] == pytest.approx(0.053, abs=1e-12)
    ks = np.arange(-10, 11)
    oracle = 0.053 * np.exp(-(ks[:, None] ** 2) / 6.0 - (ks[None, :] ** 2) / 6.0)
    np.testing.assert_allclose(k, oracle, atol=1e-12)
    assert 0.99 < k.sum() < 1.01


def test_blur_against_scipy_style_oracle():
    from scipy.ndimage import correlate

    img = rand_img((1, 3, 20, 20), seed=1)
    k = pw.make_blur_kernel(radius=3)
    got = pw.blur(img, k)
    for c in range(3):
        want = correlate(img[0, c], k, mode="mirror")
        np.testing.assert_allclose(got[0, c], want, atol=1e-10)


def test_image_round_trip(tmp_path):
    img = np.round(rand_img((1, 3, 12, 9), seed=2) * 255) / 255.0
    path = str(tmp_path / "x.png")
    pw.save_image(img, path)
    back = pw.load_image(path)
    np.testing.assert_allclose(back, img, atol=1e-12)


def test_grayscale_weights():
    img = np.zeros((1, 3, 1, 1))
    img[0, 1, 0, 0] = 1.0
    assert pw.to_grayscale(img)[0, 0, 0, 0] == pytest.approx(0.587)


def test_psnr_constructed_pair():
    a = np.zeros((1, 3, 8, 8))
    b = np.full((1, 3, 8, 8), 10.0 / 255.0)
    assert pw.psnr(a, b) == pytest.approx(28.13, abs=0.01)
    assert math.isinf(pw.psnr(a, a))


def test_ssim_against_skimage():
    from skimage.metrics import structural_similarity

    a = rand_img((1, 1, 48, 48), seed=3)
    noise = rand_img((1, 1, 48, 48), seed=4, lo=-0.05, hi=0.05)
    b = np.clip(a + noise, 0.0, 1.0)
    got = pw.ssim(a, b)
    qa = np.round(a[0, 0] * 255).astype(np.float64)
    qb = np.round(b[0, 0] * 255).astype(np.float64)
    want = structural_similarity(
        qa, qb, data_range=255, gaussian_weights=True, sigma=1.5,
        use_sample_covariance=False,
    )
    assert got == pytest.approx(want, abs=1e-4)


def test_entropy_and_bpp():
    flat = np.full((1, 3, 64, 64), 0.5)
    assert pw.entropy(flat) == 0.0
    assert pw.bpp(flat) < 0.5
    noisy = rand_img((1, 3, 64, 64), seed=5)
    assert pw.entropy(noisy) > 7.0


def test_tv_and_total_loss():
    flat = np.full((1, 3, 8, 8), 0.3)
    assert pw.tv_loss(flat) == 0.0
    two = np.array([0.2, 0.9]).reshape(1, 1, 1, 2)
    assert pw.tv_loss(two) == pytest.approx(0.35)
    assert pw.total_loss(1.0, 2.0, 3.0, 0.1) == pytest.approx(2.025)
    with pytest.raises(ArithmeticError):
        pw.total_loss(float("nan"), 0.0, 0.0, 0.0)


def test_label_faves_median_split():
    recs = [("a", 100, 10), ("b", 100, 20), ("c", 100, 30), ("d", 100, 40)]
    assert pw.label_faves(recs) == [("a", 0), ("b", 0), ("c", 1), ("d", 1)]


def test_validation_errors_map_to_python_types():
    with pytest.raises(ValueError):
        pw.blur(np.zeros((3, 4, 4)), pw.make_blur_kernel(1))  # not 4-D
    with pytest.raises(IOError):
        pw.load_image("/nonexistent/file.png")


def test_train_and_enhance_end_to_end(tmp_path):
    rng = np.random.default_rng(6)
    for name, bright in (("src", 0.1), ("tgt", 0.6)):
        d = tmp_path / name
        d.mkdir()
        for i in range(4):
            img = np.clip(bright + 0.3 * rng.random((1, 3, 40, 40)), 0, 1)
            pw.save_image(img, str(d / f"{i}.png"))
    feats = str(tmp_path / "f.wfa")
    pw.init_features(feats, width_scale=0.05, seed=1)

    cfg = {
        "iterations": 2, "batch_size": 2, "patch_size": 16, "blur_radius": 3,
        "generator_width": 6, "residual_blocks": 1, "generator_entry_kernel": 3,
        "disc_width_scale": 0.1, "disc_fc_units": 8, "checkpoint_every": 2,
        "deterministic": "true", "seed": 3,
        "source_dir": str(tmp_path / "src"), "target_dir": str(tmp_path / "tgt"),
        "checkpoint_dir": str(tmp_path / "ckpt"), "features_path": feats,
    }
    cfg_path = tmp_path / "train.cfg"
    cfg_path.write_text("".join(f"{k} = {v}\n" for k, v in cfg.items()))
    ckpt = pw.train(str(cfg_path))
    assert os.path.exists(ckpt)

    img = rand_img((1, 3, 48, 48), seed=7)
    out = pw.enhance(ckpt, img)
    assert out.shape == img.shape
    assert out.min() >= 0.0 and out.max() <= 1.0
    tiled = pw.enhance(ckpt, img, tile=32)
    assert tiled.shape == img.shape


def test_cli_binary_round_trip(tmp_path):
    exe = os.environ.get("WESPE_CLI")
    if not exe:
        pytest.skip("WESPE_CLI not set")
    r = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    assert "enhance" in r.stdout
    r = subprocess.run([exe, "evaluate", "--enhanced", str(tmp_path / "nope"),
                        "--out", str(tmp_path / "r.txt")],
                       capture_output=True, text=True)
    assert r.returncode == 3  # missing input directory
