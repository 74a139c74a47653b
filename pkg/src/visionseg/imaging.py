"""Grayscale image primitives and the segmentation preprocessing chain.

Conventions used throughout the package:

* a *gray image* is a 2-D float64 array with values in [0, 1]; on load,
  0.0 is black ink and 1.0 is paper.  After :func:`invert` ink becomes
  high-valued, which is what the profile analysis expects.
* a *binary image* (mask) is a 2-D uint8 array with values in {0, 1},
  1 being foreground ink.

All operations are pure functions of their inputs; nothing here keeps
internal state, so values can be shared freely across threads.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.ndimage import correlate, gaussian_filter


class ImageDecodeError(Exception):
    """Raised when a file cannot be decoded into a usable page image."""


class DegenerateImageError(Exception):
    """Raised when an operation is undefined for the given image content."""


# ---------------------------------------------------------------------------
# Loading / saving
# ---------------------------------------------------------------------------

def load_gray(path: str | Path) -> np.ndarray:
    """Decode a PNG/JPEG file into a gray image in [0, 1].

    Color inputs are converted to luminance; 8-bit values map to v/255.
    """
    try:
        with Image.open(path) as im:
            if im.mode != "L":
                im = im.convert("L")
            arr = np.asarray(im, dtype=np.float64)
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageDecodeError(f"cannot decode image file: {path}") from exc
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ImageDecodeError(f"image has degenerate dimensions: {path}")
    return arr / 255.0


def save_gray(img: np.ndarray, path: str | Path) -> None:
    """Encode a gray image as an 8-bit grayscale PNG (or JPEG by suffix)."""
    data = np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255)
    Image.fromarray(data.astype(np.uint8), "L").save(path)


def to_u8(img: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] gray image to 8-bit values."""
    return np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# Point operations
# ---------------------------------------------------------------------------

def invert(img: np.ndarray) -> np.ndarray:
    """Flip intensity so ink (0 on load) becomes high-valued.

    An involution: exact on values whose complement is representable
    (any k/256 grid), and within 1 ulp of 1.0 otherwise.
    """
    return 1.0 - np.asarray(img, dtype=np.float64)


def binarize(img: np.ndarray, threshold: float | None = None) -> np.ndarray:
    """Threshold a gray image into a {0, 1} mask (1 where value >= threshold).

    The input is expected to be inverted already, so ink is high.  With no
    explicit threshold, Otsu's method picks one from the 256-bin intensity
    histogram; a constant image has no histogram structure to work with and
    raises :class:`DegenerateImageError`.
    """
    img = np.asarray(img, dtype=np.float64)
    if threshold is None:
        threshold = otsu_threshold(img)
    elif not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return (img >= threshold).astype(np.uint8)


def otsu_threshold(img: np.ndarray) -> float:
    """Otsu's between-class-variance threshold over 256 bins on [0, 1].

    Returns the upper edge of the best split bin, so ``img >= t`` puts the
    bin itself in the background class.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.min() == img.max():
        raise DegenerateImageError("constant image: histogram has a single mode")
    hist, _ = np.histogram(img, bins=256, range=(0.0, 1.0))
    hist = hist.astype(np.float64)
    total = hist.sum()
    bin_mid = (np.arange(256) + 0.5) / 256.0

    w0 = np.cumsum(hist)                    # pixels in bins 0..k
    m0 = np.cumsum(hist * bin_mid)          # class-0 mass, unnormalized
    w1 = total - w0
    mean_total = m0[-1]
    # between-class variance for split after bin k (k = 0..254):
    # w0*w1*(mu0 - mu1)^2 == (m0*total - mean_total*w0)^2 / (w0*w1)
    valid = (w0[:-1] > 0) & (w1[:-1] > 0)
    var_b = np.zeros(255)
    num = m0[:-1] * total - mean_total * w0[:-1]
    var_b[valid] = num[valid] ** 2 / (w0[:-1][valid] * w1[:-1][valid])
    k = int(np.argmax(var_b))
    return (k + 1) / 256.0


def to_gray(mask: np.ndarray) -> np.ndarray:
    """Carry a {0, 1} mask into gray-image space as 0.0/1.0 values."""
    return np.asarray(mask, dtype=np.float64)


# ---------------------------------------------------------------------------
# Zhang-Suen thinning
# ---------------------------------------------------------------------------
# Deletability of a pixel depends only on its 8-neighborhood pattern, so both
# subiterations are precomputed as 256-entry lookup tables indexed by a
# neighbor bit-code.  Neighbors are numbered clockwise from the pixel above:
# P2=N, P3=NE, P4=E, P5=SE, P6=S, P7=SW, P8=W, P9=NW (bits 0..7).

_NEIGHBOR_WEIGHTS = np.array(
    [
        [128, 1, 2],
        [64, 0, 4],
        [32, 16, 8],
    ],
    dtype=np.int32,
)


def _build_thinning_luts() -> tuple[np.ndarray, np.ndarray]:
    lut1 = np.zeros(256, dtype=bool)
    lut2 = np.zeros(256, dtype=bool)
    for code in range(256):
        n = [(code >> b) & 1 for b in range(8)]  # P2..P9
        b_count = sum(n)
        if not 2 <= b_count <= 6:
            continue
        ring = n + n[:1]
        transitions = sum(1 for a, b in zip(ring, ring[1:]) if (a, b) == (0, 1))
        if transitions != 1:
            continue
        p2, p4, p6, p8 = n[0], n[2], n[4], n[6]
        if p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0:
            lut1[code] = True
        if p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0:
            lut2[code] = True
    return lut1, lut2


_THIN_LUT1, _THIN_LUT2 = _build_thinning_luts()


def skeletonize(mask: np.ndarray) -> np.ndarray:
    """Thin a {0, 1} mask to 1-px strokes with Zhang-Suen iterations.

    Runs to a fixed point, so the result is idempotent.  Pixels outside the
    image count as background.  Foreground only ever shrinks, and the
    8-connectivity of each input component is preserved.
    """
    skel = np.array(mask, dtype=np.uint8, copy=True)  # never mutate the input
    if skel.ndim != 2:
        raise ValueError("mask must be 2-D")
    while True:
        changed = False
        for lut in (_THIN_LUT1, _THIN_LUT2):
            code = correlate(skel.astype(np.int32), _NEIGHBOR_WEIGHTS,
                             mode="constant", cval=0)
            doomed = lut[code] & (skel == 1)
            if doomed.any():
                # Parallel deletion would erase an isolated 2x2 block outright
                # (all four pixels pass the step conditions at once); keep the
                # top-left pixel of any fully-doomed 2x2 block so every input
                # component leaves a skeleton behind.
                block = (doomed[:-1, :-1] & doomed[1:, :-1]
                         & doomed[:-1, 1:] & doomed[1:, 1:])
                if block.any():
                    doomed[:-1, :-1] &= ~block
                skel[doomed] = 0
                changed = True
        if not changed:
            return skel


# ---------------------------------------------------------------------------
# Smoothing / resampling
# ---------------------------------------------------------------------------

def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable 2-D Gaussian convolution with reflect boundaries.

    Kernel radius is ceil(3*sigma) and the kernel is normalized to sum 1,
    so a constant image passes through unchanged and total mass is
    preserved under the reflecting boundary.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    img = np.asarray(img, dtype=np.float64)
    return gaussian_filter(img, sigma, mode="reflect",
                           radius=int(math.ceil(3.0 * sigma)))


def resize_gray(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of a [0, 1] gray image to the given shape."""
    if height < 1 or width < 1:
        raise ValueError("target dimensions must be positive")
    img = np.asarray(img, dtype=np.float64)
    if img.shape == (height, width):
        return img.copy()
    im = Image.fromarray(img.astype(np.float32), mode="F")
    out = np.asarray(im.resize((width, height), Image.BILINEAR), dtype=np.float64)
    return np.clip(out, 0.0, 1.0)
