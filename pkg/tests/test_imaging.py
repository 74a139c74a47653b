import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image
from scipy.ndimage import label

from visionseg.imaging import (
    DegenerateImageError,
    ImageDecodeError,
    binarize,
    gaussian_blur,
    invert,
    load_gray,
    otsu_threshold,
    resize_gray,
    save_gray,
    skeletonize,
    to_gray,
)


# ---------------------------------------------------------------------------
# load_gray
# ---------------------------------------------------------------------------

def _write_png(path, value, size=(1, 1)):
    Image.new("L", size, value).save(path)


def test_load_white_pixel(tmp_path):
    _write_png(tmp_path / "w.png", 255)
    assert np.array_equal(load_gray(tmp_path / "w.png"), [[1.0]])


def test_load_black_pixel(tmp_path):
    _write_png(tmp_path / "b.png", 0)
    assert np.array_equal(load_gray(tmp_path / "b.png"), [[0.0]])


def test_load_midgray_scales_by_255(tmp_path):
    # oracle: direct integer scaling of the stored 8-bit value
    _write_png(tmp_path / "m.png", 128, size=(3, 2))
    img = load_gray(tmp_path / "m.png")
    assert img.shape == (2, 3)
    assert np.all(np.abs(img - 128 / 255) < 1e-6)


def test_load_rgb_converts_to_luminance(tmp_path):
    Image.new("RGB", (2, 2), (255, 0, 0)).save(tmp_path / "rgb.png")
    img = load_gray(tmp_path / "rgb.png")
    # ITU-R 601 luma of pure red is 76/255
    assert np.all(np.abs(img - 76 / 255) < 1e-2)


def test_load_rejects_garbage(tmp_path):
    bad = tmp_path / "nope.png"
    bad.write_bytes(b"this is not an image")
    with pytest.raises(ImageDecodeError):
        load_gray(bad)
    with pytest.raises(FileNotFoundError):
        load_gray(tmp_path / "missing.png")


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    img = np.round(rng.random((5, 7)) * 255) / 255
    save_gray(img, tmp_path / "x.png")
    assert np.allclose(load_gray(tmp_path / "x.png"), img, atol=1e-9)


# ---------------------------------------------------------------------------
# invert
# ---------------------------------------------------------------------------

def test_invert_zeros_to_ones():
    assert np.array_equal(invert(np.zeros((2, 3))), np.ones((2, 3)))


def test_invert_value():
    assert invert(np.array([[0.25]]))[0, 0] == 0.75


@given(arrays(np.int64, (4, 5), elements=st.integers(0, 256)))
def test_invert_is_involution_on_dyadic_values(quantized):
    img = quantized / 256.0  # complements exactly representable on this grid
    assert np.array_equal(invert(invert(img)), img)


@given(arrays(np.float64, (4, 5), elements=st.floats(0, 1, allow_nan=False)))
def test_invert_double_application_within_one_ulp(img):
    assert np.allclose(invert(invert(img)), img, rtol=0, atol=np.spacing(1.0))


# ---------------------------------------------------------------------------
# binarize / Otsu
# ---------------------------------------------------------------------------

def test_binarize_all_white_inverted():
    assert not binarize(np.zeros((4, 4)), threshold=0.5).any()


def test_binarize_two_values():
    out = binarize(np.array([[0.2, 0.8]]), threshold=0.5)
    assert out.tolist() == [[0, 1]]


def _otsu_oracle(img):
    """Exhaustive between-class-variance scan over 256 bins."""
    hist, _ = np.histogram(img, bins=256, range=(0.0, 1.0))
    mids = (np.arange(256) + 0.5) / 256
    best_k, best_var = 0, -1.0
    for k in range(255):
        w0 = hist[:k + 1].sum()
        w1 = hist[k + 1:].sum()
        if w0 == 0 or w1 == 0:
            continue
        m0 = (hist[:k + 1] * mids[:k + 1]).sum() / w0
        m1 = (hist[k + 1:] * mids[k + 1:]).sum() / w1
        var = w0 * w1 * (m0 - m1) ** 2
        if var > best_var:
            best_var, best_k = var, k
    return (best_k + 1) / 256


def test_otsu_bimodal_threshold_between_modes():
    img = np.concatenate([np.full(50, 0.1), np.full(50, 0.9)]).reshape(10, 10)
    t = otsu_threshold(img)
    assert 0.1 < t < 0.9
    assert t == pytest.approx(_otsu_oracle(img), abs=1e-12)


def test_otsu_matches_oracle_on_random_images():
    rng = np.random.default_rng(7)
    for _ in range(20):
        img = rng.random((16, 16))
        assert otsu_threshold(img) == pytest.approx(_otsu_oracle(img), abs=1e-12)


def test_otsu_constant_image_is_degenerate():
    with pytest.raises(DegenerateImageError):
        binarize(np.full((4, 4), 0.5))


def test_binarize_monotone_in_threshold():
    rng = np.random.default_rng(3)
    img = rng.random((12, 12))
    prev = binarize(img, 0.1)
    for t in (0.3, 0.5, 0.7, 0.9):
        cur = binarize(img, t)
        assert not (cur & ~prev).any()  # raising t never adds foreground
        prev = cur


# ---------------------------------------------------------------------------
# skeletonize
# ---------------------------------------------------------------------------

EIGHT = np.ones((3, 3), dtype=int)


def test_skeletonize_empty_fixed_point():
    z = np.zeros((6, 6), dtype=np.uint8)
    assert np.array_equal(skeletonize(z), z)


def test_skeletonize_thin_line_unchanged():
    m = np.zeros((5, 20), dtype=np.uint8)
    m[2, 1:19] = 1
    assert np.array_equal(skeletonize(m), m)


def test_skeletonize_rectangle_thins_preserving_components():
    m = np.zeros((9, 24), dtype=np.uint8)
    m[2:7, 2:22] = 1  # solid 5x20 block
    sk = skeletonize(m)
    assert sk.sum() < m.sum()
    assert (sk & ~m).sum() == 0  # foreground only shrinks
    assert label(sk, structure=EIGHT)[1] == label(m, structure=EIGHT)[1]


def test_skeletonize_idempotent():
    rng = np.random.default_rng(11)
    m = (rng.random((40, 40)) < 0.4).astype(np.uint8)
    once = skeletonize(m)
    assert np.array_equal(skeletonize(once), once)


def test_skeletonize_preserves_components_random():
    rng = np.random.default_rng(5)
    for seed in range(5):
        blob = (gaussian_blur(rng.random((48, 48)), 2.0) > 0.5).astype(np.uint8)
        sk = skeletonize(blob)
        assert (sk & ~blob).sum() == 0
        assert label(sk, structure=EIGHT)[1] == label(blob, structure=EIGHT)[1]


# ---------------------------------------------------------------------------
# gaussian_blur
# ---------------------------------------------------------------------------

def _dense_blur_oracle(img, sigma):
    """Direct dense 2-D convolution with symmetric (edge-reflecting) padding."""
    radius = math.ceil(3 * sigma)
    xs = np.arange(-radius, radius + 1)
    g = np.exp(-(xs ** 2) / (2 * sigma ** 2))
    g /= g.sum()
    kern = np.outer(g, g)
    padded = np.pad(img, radius, mode="symmetric")
    out = np.zeros_like(img, dtype=np.float64)
    for i in range(img.shape[0]):
        for j in range(img.shape[1]):
            out[i, j] = np.sum(padded[i:i + 2 * radius + 1, j:j + 2 * radius + 1] * kern)
    return out


def test_blur_constant_unchanged():
    img = np.full((10, 10), 0.37)
    assert np.allclose(gaussian_blur(img, 2.5), img, atol=1e-9)


def test_blur_matches_dense_oracle_and_preserves_mass():
    rng = np.random.default_rng(21)
    img = rng.random((32, 32))
    sigma = 3.1
    out = gaussian_blur(img, sigma)
    oracle = _dense_blur_oracle(img, sigma)
    assert np.max(np.abs(out - oracle)) < 1e-9
    assert abs(out.sum() - img.sum()) / img.sum() < 1e-6


def test_blur_impulse_peak_matches_kernel():
    sigma = 2.0
    radius = math.ceil(3 * sigma)
    img = np.zeros((41, 41))
    img[20, 20] = 1.0
    out = gaussian_blur(img, sigma)
    xs = np.arange(-radius, radius + 1)
    g = np.exp(-(xs ** 2) / (2 * sigma ** 2))
    g /= g.sum()
    assert out[20, 20] == pytest.approx(g[radius] ** 2, abs=1e-9)


def test_blur_rejects_bad_sigma():
    with pytest.raises(ValueError):
        gaussian_blur(np.ones((4, 4)), 0.0)


@settings(max_examples=25)
@given(arrays(np.float64, (8, 8), elements=st.floats(0, 1, allow_nan=False)),
       st.floats(0.5, 4.0))
def test_blur_stays_in_unit_interval(img, sigma):
    out = gaussian_blur(img, sigma)
    assert out.min() >= -1e-12 and out.max() <= 1 + 1e-12


# ---------------------------------------------------------------------------
# to_gray / resize
# ---------------------------------------------------------------------------

def test_to_gray_roundtrip():
    m = np.array([[0, 1], [1, 0]], dtype=np.uint8)
    g = to_gray(m)
    assert g.dtype == np.float64 and g.shape == m.shape
    assert set(np.unique(g)) == {0.0, 1.0}
    assert np.array_equal(binarize(g, 0.5), m)


def test_resize_shapes_and_range():
    rng = np.random.default_rng(2)
    img = rng.random((100, 60))
    out = resize_gray(img, 128, 512)
    assert out.shape == (128, 512)
    assert out.min() >= 0.0 and out.max() <= 1.0
    assert np.array_equal(resize_gray(img, 100, 60), img)
