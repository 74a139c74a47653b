"""Threshold segmentation of score pages via row-sum projection profiles.

The method: sum the preprocessed (inverted, skeletonized, smoothed) page by
rows, locate the profile's critical points with finite differences, keep
the minima that fall below ``a_min * mean(minima)`` as cut candidates, use
the maxima above ``a_max * mean(maxima)`` to bound grouping areas, and emit
one cut per group (the lowest candidate).  Regions between consecutive cuts
that contain a selected maximum become the page's systems, top to bottom.
"""

from __future__ import annotations

import json
import logging
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imaging import (
    DegenerateImageError,
    binarize,
    gaussian_blur,
    invert,
    skeletonize,
    to_gray,
)

log = logging.getLogger(__name__)

DEFAULT_A_MIN = 0.8
DEFAULT_A_MAX = 0.83


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdParams:
    """Tuning constants for the cut selection.

    ``sigma=None`` derives the smoothing scale from the page height
    (height/150), which tracks stave spacing across scan resolutions.
    """

    a_min: float = DEFAULT_A_MIN
    a_max: float = DEFAULT_A_MAX
    sigma: float | None = None
    min_region_height: int = 32
    trim_epsilon: float = 0.5

    def __post_init__(self):
        if self.a_min < 0 or self.a_max < 0:
            raise ValueError("a_min and a_max must be non-negative")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive when given")

    def sigma_for(self, page_height: int) -> float:
        return self.sigma if self.sigma is not None else page_height / 150.0


@dataclass(frozen=True)
class CriticalPoints:
    """Local extrema of a profile as (row, value) pairs, sorted by row."""

    minima: list[tuple[int, float]]
    maxima: list[tuple[int, float]]


@dataclass(frozen=True)
class CutSelection:
    """Outcome of the threshold selection, kept around for plots/debugging."""

    cuts: list[int]
    candidates: list[tuple[int, float]]
    selected_maxima: list[tuple[int, float]]
    mu_min: float
    mu_max: float

    @property
    def selected_maxima_rows(self) -> list[int]:
        return [row for row, _ in self.selected_maxima]


@dataclass(frozen=True)
class SystemRegion:
    """One system on a page: a row interval plus trimmed column bounds."""

    row_start: int
    row_end: int
    col_start: int
    col_end: int
    order_index: int

    def __post_init__(self):
        if not 0 <= self.row_start < self.row_end:
            raise ValueError(f"bad row interval [{self.row_start}, {self.row_end})")
        if not 0 <= self.col_start < self.col_end:
            raise ValueError(f"bad col interval [{self.col_start}, {self.col_end})")

    def to_dict(self) -> dict:
        return {
            "row_start": self.row_start,
            "row_end": self.row_end,
            "col_start": self.col_start,
            "col_end": self.col_end,
            "order_index": self.order_index,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemRegion":
        return cls(d["row_start"], d["row_end"], d["col_start"], d["col_end"],
                   d["order_index"])


@dataclass(frozen=True)
class PageSegmentation:
    """Ordered set of system regions found on one page."""

    source: str
    cuts: list[int] = field(default_factory=list)
    regions: list[SystemRegion] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "cuts": list(self.cuts),
            "regions": [r.to_dict() for r in self.regions],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "PageSegmentation":
        return cls(d["source"], list(d["cuts"]),
                   [SystemRegion.from_dict(r) for r in d["regions"]])

    @classmethod
    def from_json(cls, text: str) -> "PageSegmentation":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PageSegmentation":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Profile analysis
# ---------------------------------------------------------------------------

def row_profile(img: np.ndarray) -> np.ndarray:
    """Sum image values along each row -> 1-D profile of length height."""
    return np.asarray(img, dtype=np.float64).sum(axis=1)


def critical_points(profile: np.ndarray) -> CriticalPoints:
    """Find the profile's local minima and maxima by finite differences.

    Central differences are used in the interior, one-sided differences at
    the two ends (which anchors the initial/final slope sign without ever
    letting an endpoint itself become an extremum).  An extremum shows up as
    a sign change of the derivative; a run of exactly-zero derivative
    between opposite signs is collapsed to its midpoint row.

    Central differences cannot see period-2 zigzags, so the extrema are
    guaranteed genuine only on adequately smoothed profiles; the pipeline
    always applies the Gaussian filter before calling this.
    """
    p = np.asarray(profile, dtype=np.float64)
    n = p.shape[0]
    if n < 3:
        raise ValueError(f"profile too short for derivative analysis: {n} rows")

    d = np.empty(n)
    d[0] = p[1] - p[0]
    d[1:-1] = (p[2:] - p[:-2]) / 2.0
    d[-1] = p[-1] - p[-2]
    signs = np.sign(d).astype(np.int8)

    minima: list[tuple[int, float]] = []
    maxima: list[tuple[int, float]] = []
    last_sign = 0
    zero_start: int | None = None
    for r in range(n):
        s = int(signs[r])
        if s == 0:
            if zero_start is None:
                zero_start = r
            continue
        if last_sign != 0 and s != last_sign:
            if zero_start is not None:
                row = (zero_start + r - 1) // 2
            else:
                # plain crossing between adjacent rows r-1 and r: the
                # extremum is whichever of the two has the extreme value
                a, b = r - 1, r
                if s > 0:
                    row = a if p[a] <= p[b] else b
                else:
                    row = a if p[a] >= p[b] else b
            if s > 0:
                minima.append((row, float(p[row])))
            else:
                maxima.append((row, float(p[row])))
        last_sign = s
        zero_start = None
    return CriticalPoints(minima=minima, maxima=maxima)


def select_cuts(profile: np.ndarray, cp: CriticalPoints,
                params: ThresholdParams) -> CutSelection:
    """Pick cut rows from the profile's minima.

    A minimum is a candidate when its value is at or below
    ``a_min * mean(all minima)``; maxima above ``a_max * mean(all maxima)``
    partition the page into grouping areas (the stretches before the first
    and after the last selected maximum count as areas too), and each area
    contributes at most one cut: the candidate with the lowest value, ties
    going to the smaller row.
    """
    p = np.asarray(profile, dtype=np.float64)
    if not cp.minima and not cp.maxima:
        log.warning("flat profile: no critical points, no cuts")
        return CutSelection([], [], [], float("nan"), float("nan"))

    mu_min = float(np.mean([v for _, v in cp.minima])) if cp.minima else float("nan")
    mu_max = float(np.mean([v for _, v in cp.maxima])) if cp.maxima else float("nan")

    candidates = [(r, v) for r, v in cp.minima if v <= params.a_min * mu_min]
    selected_maxima = [(r, v) for r, v in cp.maxima if v > params.a_max * mu_max]

    max_rows = [r for r, _ in selected_maxima]
    best: dict[int, tuple[int, float]] = {}
    for row, val in candidates:  # row-ascending, so ties keep the first seen
        group = bisect_left(max_rows, row)
        if group not in best or val < best[group][1]:
            best[group] = (row, val)
    cuts = sorted(row for row, _ in best.values())
    return CutSelection(cuts, candidates, selected_maxima, mu_min, mu_max)


def extract_regions(img: np.ndarray, cuts: list[int], params: ThresholdParams,
                    maxima_rows: list[int], source: str = "") -> PageSegmentation:
    """Turn cut rows into ordered system regions on the preprocessed page.

    Row spans between consecutive cuts (and the page edges) are candidate
    regions; a span is kept only when it contains a selected maximum and is
    tall enough, which drops page margins between the outermost cuts and
    the page edges.  Columns are trimmed so that everything outside
    [col_start, col_end) has column-sum at most ``trim_epsilon``.
    """
    img = np.asarray(img, dtype=np.float64)
    height, width = img.shape
    cuts = sorted(cuts)
    if any(not 0 < c < height for c in cuts):
        raise ValueError("cut rows must lie strictly inside the page")

    max_rows = sorted(maxima_rows)
    bounds = [0] + cuts + [height]
    regions: list[SystemRegion] = []
    for lo, hi in zip(bounds, bounds[1:]):
        if hi - lo < params.min_region_height:
            continue
        i = bisect_left(max_rows, lo)
        if i >= len(max_rows) or max_rows[i] >= hi:
            continue  # no selected maximum inside: margin strip, not a system
        col_sum = img[lo:hi].sum(axis=0)
        inked = np.nonzero(col_sum > params.trim_epsilon)[0]
        if inked.size == 0:
            continue
        regions.append(SystemRegion(
            row_start=lo, row_end=hi,
            col_start=int(inked[0]), col_end=int(inked[-1]) + 1,
            order_index=len(regions),
        ))
    return PageSegmentation(source=source, cuts=list(cuts), regions=regions)


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------

def preprocess_page(img: np.ndarray, params: ThresholdParams,
                    binarize_threshold: float | None = None) -> np.ndarray:
    """Invert, binarize, skeletonize and smooth a page image."""
    inv = invert(img)
    mask = binarize(inv, binarize_threshold)
    skel = skeletonize(mask)
    return gaussian_blur(to_gray(skel), params.sigma_for(img.shape[0]))


def segment_page(img: np.ndarray, params: ThresholdParams | None = None,
                 source: str = "",
                 binarize_threshold: float | None = None) -> PageSegmentation:
    """Run the full threshold method on one page image.

    Deterministic for fixed inputs and parameters.  A blank (constant) page
    yields an empty segmentation rather than an error.
    """
    params = params or ThresholdParams()
    img = np.asarray(img, dtype=np.float64)
    try:
        smooth = preprocess_page(img, params, binarize_threshold)
    except DegenerateImageError:
        return PageSegmentation(source=source)
    profile = row_profile(smooth)
    cp = critical_points(profile)
    sel = select_cuts(profile, cp, params)
    return extract_regions(smooth, sel.cuts, params,
                           sel.selected_maxima_rows, source=source)
