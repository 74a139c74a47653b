"""Pixel-level segmentation scores and cut-position matching.

Totalized conventions for empty denominators (stated once, used
everywhere): precision = tp/(tp+fp), taken as 1 when both prediction and
truth are empty and 0 when only the denominator is empty; recall is the
mirror image; f1 = 2PR/(P+R) with 0 at P+R=0; iou = tp/(tp+fp+fn) with 1
when the union is empty.  Under these rules f1 == 2*iou/(1+iou) always.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .profileseg import PageSegmentation
from .synthgen import Placement


@dataclass(frozen=True)
class SegScores:
    iou: float
    f1: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    tn: int

    def to_dict(self) -> dict:
        return {
            "iou": self.iou, "f1": self.f1,
            "precision": self.precision, "recall": self.recall,
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
        }


@dataclass(frozen=True)
class CutMatchReport:
    true_gaps: int
    matched: int
    spurious: int
    tolerance: int

    def to_dict(self) -> dict:
        return {
            "true_gaps": self.true_gaps, "matched": self.matched,
            "spurious": self.spurious, "tolerance": self.tolerance,
        }


def scores_from_counts(tp: int, fp: int, fn: int, tn: int) -> SegScores:
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision = 1.0 if tp + fn == 0 else 0.0
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall = 1.0 if tp + fp == 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    union = tp + fp + fn
    iou = tp / union if union > 0 else 1.0
    return SegScores(iou=iou, f1=f1, precision=precision, recall=recall,
                     tp=tp, fp=fp, fn=fn, tn=tn)


def seg_scores(pred: np.ndarray, truth: np.ndarray) -> SegScores:
    """Confusion counts and derived ratios between two {0, 1} masks."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {truth.shape}")
    p = pred != 0
    t = truth != 0
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    tn = int(np.count_nonzero(~p & ~t))
    return scores_from_counts(tp, fp, fn, tn)


def regions_to_mask(seg: PageSegmentation, height: int, width: int) -> np.ndarray:
    """Rasterize region boxes to a {0, 1} mask comparable with ground truth."""
    mask = np.zeros((height, width), dtype=np.uint8)
    for r in seg.regions:
        if r.row_end > height or r.col_end > width:
            raise ValueError(f"region {r} exceeds {height}x{width} page bounds")
        mask[r.row_start:r.row_end, r.col_start:r.col_end] = 1
    return mask


def gap_centers(placements: list[Placement]) -> list[float]:
    """Centers of the inter-system gaps between consecutive placements."""
    ordered = sorted(placements, key=lambda p: p.row_start)
    return [(a.row_end + b.row_start) / 2.0 for a, b in zip(ordered, ordered[1:])]


def match_cuts(pred_cuts: list[int], placements: list[Placement],
               tolerance: int) -> CutMatchReport:
    """Greedy nearest-first matching of predicted cuts to true gap centers.

    Each cut and each gap is used at most once; a pair matches when the cut
    lies within +-tolerance rows of the gap center.  Unmatched cuts count
    as spurious.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    centers = gap_centers(placements)
    pairs = sorted(
        (abs(cut - center), ci, gi)
        for ci, cut in enumerate(pred_cuts)
        for gi, center in enumerate(centers)
    )
    used_cuts: set[int] = set()
    used_gaps: set[int] = set()
    for dist, ci, gi in pairs:
        if dist > tolerance:
            break
        if ci in used_cuts or gi in used_gaps:
            continue
        used_cuts.add(ci)
        used_gaps.add(gi)
    return CutMatchReport(true_gaps=len(centers), matched=len(used_gaps),
                          spurious=len(pred_cuts) - len(used_cuts),
                          tolerance=tolerance)


def micro_average(scores: list[SegScores]) -> SegScores:
    """Pool pixel counts across pages, then derive the ratios once."""
    tp = sum(s.tp for s in scores)
    fp = sum(s.fp for s in scores)
    fn = sum(s.fn for s in scores)
    tn = sum(s.tn for s in scores)
    return scores_from_counts(tp, fp, fn, tn)


def macro_average(scores: list[SegScores]) -> dict:
    """Plain mean of each per-page ratio (pages weigh equally)."""
    if not scores:
        return {"iou": 1.0, "f1": 1.0, "precision": 1.0, "recall": 1.0}
    return {
        "iou": float(np.mean([s.iou for s in scores])),
        "f1": float(np.mean([s.f1 for s in scores])),
        "precision": float(np.mean([s.precision for s in scores])),
        "recall": float(np.mean([s.recall for s in scores])),
    }
