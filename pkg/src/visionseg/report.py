"""Evaluation reports: JSON + per-page CSV + rendered figures.

The eval path compares predictions (segmentation JSONs or premade masks)
against a synthetic ground-truth corpus, scoring pixels and cut rows per
page, then aggregating micro (pooled pixel counts) and macro (mean of
per-page scores) variants.  Figures land next to the delimited output.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import (
    CutMatchReport,
    SegScores,
    gap_centers,
    macro_average,
    match_cuts,
    micro_average,
    regions_to_mask,
    seg_scores,
)
from .profileseg import CutSelection, PageSegmentation
from .synthgen import load_mask, load_meta


class EvalInputError(Exception):
    """Raised when prediction and truth directories cannot be paired."""


def _truth_ids(truth_dir: Path) -> list[str]:
    meta_dir = truth_dir / "meta"
    if not meta_dir.is_dir():
        raise EvalInputError(f"truth dir {truth_dir} has no meta/ subdirectory")
    return sorted(p.stem for p in meta_dir.glob("*.json"))


def _load_predictions(pred_dir: Path) -> tuple[dict, str]:
    """Detect the prediction flavor: segmentation JSONs or mask PNGs."""
    pred_dir = Path(pred_dir)
    seg_dir = pred_dir / "segmentations" if (pred_dir / "segmentations").is_dir() else pred_dir
    segs = {p.stem: PageSegmentation.load(p) for p in sorted(seg_dir.glob("*.json"))
            if p.name not in ("queue.json", "manifest.json", "report.json")}
    if segs:
        return segs, "segmentations"
    mask_dir = pred_dir / "masks"
    if mask_dir.is_dir():
        masks = {p.stem: p for p in sorted(mask_dir.glob("*.png"))}
        if masks:
            return masks, "masks"
    raise EvalInputError(f"no segmentation JSONs or masks found under {pred_dir}")


def evaluate(pred_dir: str | Path, truth_dir: str | Path,
             tolerance: int = 8) -> dict:
    """Score every page id present in the truth corpus; missing ids error."""
    pred_dir, truth_dir = Path(pred_dir), Path(truth_dir)
    preds, flavor = _load_predictions(pred_dir)
    ids = _truth_ids(truth_dir)
    missing = [i for i in ids if i not in preds]
    if missing:
        raise EvalInputError(
            f"predictions missing for {len(missing)} page ids: "
            + ", ".join(missing[:10]))

    pages: dict[str, dict] = {}
    pixel_scores: list[SegScores] = []
    cut_totals = {"true_gaps": 0, "matched": 0, "spurious": 0}
    region_hits = 0
    offsets: list[float] = []
    for page_id in ids:
        truth_mask = load_mask(truth_dir / "masks" / f"{page_id}.png")
        meta = load_meta(truth_dir / "meta" / f"{page_id}.json")
        placements = meta["placements"]
        height, width = truth_mask.shape

        entry: dict = {}
        if flavor == "segmentations":
            seg: PageSegmentation = preds[page_id]
            pred_mask = regions_to_mask(seg, height, width)
            cuts: CutMatchReport = match_cuts(seg.cuts, placements, tolerance)
            entry["cuts"] = cuts.to_dict()
            entry["n_regions"] = len(seg.regions)
            entry["n_true_systems"] = len(placements)
            for key in ("true_gaps", "matched", "spurious"):
                cut_totals[key] += getattr(cuts, key)
            region_hits += int(len(seg.regions) == len(placements))
            centers = gap_centers(placements)
            for cut in seg.cuts:
                if centers:
                    offsets.append(min(abs(cut - c) for c in centers))
        else:
            pred_mask = load_mask(preds[page_id])
            entry["cuts"] = None

        score = seg_scores(pred_mask, truth_mask)
        pixel_scores.append(score)
        entry["seg"] = score.to_dict()
        pages[page_id] = entry

    aggregate: dict = {
        "micro": micro_average(pixel_scores).to_dict(),
        "macro": macro_average(pixel_scores),
    }
    if flavor == "segmentations":
        total_cuts = cut_totals["matched"] + cut_totals["spurious"]
        aggregate["cuts"] = {
            **cut_totals,
            "matched_fraction": (cut_totals["matched"] / cut_totals["true_gaps"]
                                 if cut_totals["true_gaps"] else 1.0),
            "spurious_fraction": (cut_totals["spurious"] / total_cuts
                                  if total_cuts else 0.0),
        }
        aggregate["region_count_accuracy"] = region_hits / len(ids) if ids else 1.0
    return {"tolerance": tolerance, "prediction_flavor": flavor,
            "pages": pages, "aggregate": aggregate, "_offsets": offsets}


def write_report(report: dict, out_dir: str | Path) -> Path:
    """Write report.json, report.csv and figures/ under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    offsets = report.pop("_offsets", [])

    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    columns = ["page_id", "iou", "f1", "precision", "recall",
               "tp", "fp", "fn", "tn",
               "true_gaps", "matched", "spurious", "n_regions", "n_true_systems"]
    with open(out_dir / "report.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for page_id in sorted(report["pages"]):
            entry = report["pages"][page_id]
            seg = entry["seg"]
            cuts = entry.get("cuts") or {}
            writer.writerow([
                page_id, seg["iou"], seg["f1"], seg["precision"], seg["recall"],
                seg["tp"], seg["fp"], seg["fn"], seg["tn"],
                cuts.get("true_gaps", ""), cuts.get("matched", ""),
                cuts.get("spurious", ""), entry.get("n_regions", ""),
                entry.get("n_true_systems", ""),
            ])

    render_report_figures(report, offsets, out_dir / "figures")
    return out_dir / "report.json"


def render_report_figures(report: dict, offsets: list[float],
                          fig_dir: str | Path) -> list[Path]:
    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    written = []

    ious = [e["seg"]["iou"] for e in report["pages"].values()]
    f1s = [e["seg"]["f1"] for e in report["pages"].values()]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist([ious, f1s], bins=20, range=(0, 1), label=["IoU", "F1"])
    ax.set_xlabel("score")
    ax.set_ylabel("pages")
    ax.set_title("Per-page pixel scores")
    ax.legend()
    fig.tight_layout()
    path = fig_dir / "pixel_scores.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(path)

    if offsets:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(offsets, bins=30)
        ax.axvline(report["tolerance"], color="red", linestyle="--",
                   label=f"tolerance ({report['tolerance']} rows)")
        ax.set_xlabel("cut offset from nearest gap center (rows)")
        ax.set_ylabel("cuts")
        ax.set_title("Cut placement accuracy")
        ax.legend()
        fig.tight_layout()
        path = fig_dir / "cut_offsets.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)
    return written


def render_page_figure(page: np.ndarray, profile: np.ndarray,
                       selection: CutSelection, seg: PageSegmentation,
                       out: str | Path) -> Path:
    """Two-panel debug figure: page with region boxes, profile with cuts."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig, (ax_img, ax_prof) = plt.subplots(
        1, 2, figsize=(10, 7), gridspec_kw={"width_ratios": [2, 1]},
        sharey=True)
    ax_img.imshow(page, cmap="gray", vmin=0, vmax=1, aspect="auto")
    for region in seg.regions:
        ax_img.add_patch(plt.Rectangle(
            (region.col_start, region.row_start),
            region.col_end - region.col_start,
            region.row_end - region.row_start,
            fill=False, edgecolor="tab:blue", linewidth=1.5))
    for cut in seg.cuts:
        ax_img.axhline(cut, color="red", linewidth=0.8)
    ax_img.set_title(f"{seg.source or 'page'}: {len(seg.regions)} systems")

    rows = np.arange(len(profile))
    ax_prof.plot(profile, rows, linewidth=0.8)
    if selection.candidates:
        cr, cv = zip(*selection.candidates)
        ax_prof.plot(cv, cr, "v", color="tab:orange", markersize=4,
                     label="candidates")
    if selection.selected_maxima:
        mr, mv = zip(*selection.selected_maxima)
        ax_prof.plot(mv, mr, "^", color="tab:green", markersize=4,
                     label="maxima")
    for cut in seg.cuts:
        ax_prof.axhline(cut, color="red", linewidth=0.8)
    ax_prof.set_ylim(len(profile), 0)
    ax_prof.set_title("row profile")
    ax_prof.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out
