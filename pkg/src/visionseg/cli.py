"""Command-line entry point.

Subcommands:

* ``synth``   - generate a synthetic corpus with ground truth
* ``segment`` - segment page images (threshold or cutnet method) and build
                a review queue
* ``serve``   - run the review API / curator UI over a queue directory
* ``format``  - export reviewed systems as 128x512 dataset samples
* ``eval``    - score predictions against a synthetic corpus (JSON + CSV +
                figures)
* ``netspec`` - print the network tensor table as JSON
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import datasetfmt, neural, report, review, synthgen
from .imaging import load_gray, save_gray
from .profileseg import (
    PageSegmentation,
    ThresholdParams,
    critical_points,
    extract_regions,
    preprocess_page,
    row_profile,
    select_cuts,
)

WEIGHTS_ENV = "VISIONSEG_WEIGHTS"
PAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="visionseg",
        description="Segment piano score pages into systems and package datasets.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic ground-truth corpus")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--page-height", type=int, default=1024)
    p.add_argument("--page-width", type=int, default=768)
    p.add_argument("--min-systems", type=int, default=2)
    p.add_argument("--max-systems", type=int, default=5)
    p.add_argument("--min-gap", type=int, default=30)
    p.add_argument("--max-gap", type=int, default=90)
    p.add_argument("--margin", type=int, default=40)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("segment", help="segment page images into systems")
    p.add_argument("input", type=Path, help="page image or directory of pages")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--a-min", type=float, default=0.8)
    p.add_argument("--a-max", type=float, default=0.83)
    p.add_argument("--sigma", type=float, default=None,
                   help="smoothing scale in px (default: page height / 150)")
    p.add_argument("--min-height", type=int, default=32)
    p.add_argument("--trim-epsilon", type=float, default=0.5)
    p.add_argument("--binarize-threshold", type=float, default=None,
                   help="fixed binarization threshold (default: Otsu)")
    p.add_argument("--method", choices=("threshold", "cutnet"), default="threshold")
    p.add_argument("--weights", type=Path, default=None,
                   help=f"VSW1 weight file (or ${WEIGHTS_ENV})")
    p.add_argument("--keep-going", action="store_true",
                   help="continue past per-page errors")
    p.add_argument("--plot", action="store_true",
                   help="write a profile/region debug figure per page "
                        "(threshold method)")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("serve", help="serve the review API and curator UI")
    p.add_argument("queue", type=Path, help="queue directory from `segment`")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--ui-dir", type=Path, default=None,
                   help="static curator UI to mount at / (e.g. frontend/dist)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("format", help="export reviewed systems as dataset samples")
    p.add_argument("queue", type=Path, help="queue directory from `segment`")
    p.add_argument("--meta", required=True, type=Path,
                   help="piece metadata JSON (scenario + pieces with page lists)")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--no-review", action="store_true",
                   help="export every segmented system, ignoring verdicts")
    p.set_defaults(func=cmd_format)

    p = sub.add_parser("eval", help="score predictions against a synthetic corpus")
    p.add_argument("--pred", required=True, type=Path,
                   help="segment output dir (or a corpus dir with masks/)")
    p.add_argument("--truth", required=True, type=Path,
                   help="synthetic corpus dir")
    p.add_argument("--tolerance", type=int, default=8)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("netspec", help="print the network tensor table as JSON")
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--width", type=int, default=384)
    p.set_defaults(func=cmd_netspec)
    return parser


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = synthgen.SynthConfig(
        page_height=args.page_height, page_width=args.page_width,
        min_systems=args.min_systems, max_systems=args.max_systems,
        min_gap=args.min_gap, max_gap=args.max_gap,
        margin=args.margin, seed=args.seed)
    manifest = synthgen.generate_corpus(cfg, args.count, args.out)
    print(f"wrote {manifest['count']} pages to {args.out}")
    return 0


def _collect_pages(path: Path) -> list[Path]:
    if path.is_dir():
        return sorted(p for p in path.iterdir()
                      if p.suffix.lower() in PAGE_SUFFIXES)
    return [path]


def _segment_one(page_path: Path, args, params: ThresholdParams, store,
                 out: Path) -> tuple[PageSegmentation, list[review.ReviewItem]]:
    page_id = page_path.stem
    img = load_gray(page_path)
    if args.method == "cutnet":
        seg = neural.cutnet_segment(img, store, params, source=page_id)
    else:
        seg = PageSegmentation(source=page_id)
        if img.min() != img.max() or args.binarize_threshold is not None:
            smooth = preprocess_page(img, params, args.binarize_threshold)
            profile = row_profile(smooth)
            sel = select_cuts(profile, critical_points(profile), params)
            seg = extract_regions(smooth, sel.cuts, params,
                                  sel.selected_maxima_rows, source=page_id)
            if args.plot:
                report.render_page_figure(
                    img, profile, sel, seg, out / "figures" / f"{page_id}.png")
    seg.save(out / "segmentations" / f"{page_id}.json")
    save_gray(img, out / "pages" / f"{page_id}.png")
    items = []
    for region in seg.regions:
        item_id = f"{page_id}-{region.order_index:02d}"
        crop = img[region.row_start:region.row_end,
                   region.col_start:region.col_end]
        save_gray(crop, out / "previews" / f"{item_id}.png")
        items.append(review.ReviewItem(
            item_id=item_id, page_id=page_id, source=str(page_path),
            region=region, preview=f"previews/{item_id}.png",
            page_image=f"pages/{page_id}.png",
            page_height=img.shape[0], page_width=img.shape[1]))
    return seg, items


def cmd_segment(args) -> int:
    if args.method == "cutnet":
        weights_path = args.weights or os.environ.get(WEIGHTS_ENV)
        if not weights_path:
            raise UsageError(
                f"--method cutnet requires --weights or ${WEIGHTS_ENV}")
        store = neural.load_weights(weights_path)
        neural.validate_store(store, neural.NetSpec(), strict=False)
    else:
        store = None
    params = ThresholdParams(
        a_min=args.a_min, a_max=args.a_max, sigma=args.sigma,
        min_region_height=args.min_height, trim_epsilon=args.trim_epsilon)

    out: Path = args.out
    for sub in ("segmentations", "pages", "previews"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    pages = _collect_pages(args.input)
    if not pages:
        print(f"error: no page images found at {args.input}", file=sys.stderr)
        return 1
    all_items: list[review.ReviewItem] = []
    failures = 0
    for page_path in pages:
        try:
            seg, items = _segment_one(page_path, args, params, store, out)
        except Exception as exc:
            failures += 1
            print(f"error: {page_path}: {exc}", file=sys.stderr)
            if not args.keep_going:
                return 1
            continue
        all_items.extend(items)
        print(f"{page_path.name}: {len(seg.regions)} systems, "
              f"{len(seg.cuts)} cuts")
    review.write_queue(out, all_items)
    print(f"queued {len(all_items)} systems from {len(pages) - failures} pages")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    app = review.create_app(args.queue, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_format(args) -> int:
    meta_doc = json.loads(args.meta.read_text(encoding="utf-8"))
    if "scenario" not in meta_doc or "pieces" not in meta_doc:
        raise UsageError("metadata file needs 'scenario' and 'pieces' keys")

    queue_dir: Path = args.queue
    seg_dir = queue_dir / "segmentations"
    if not seg_dir.is_dir():
        raise UsageError(f"{queue_dir} has no segmentations/ directory")
    if args.no_review:
        accepted = None
    else:
        accepted = review.ReviewQueue(queue_dir).accepted_ids()

    pieces: list[tuple[datasetfmt.PieceMeta, list[datasetfmt.PageForExport]]] = []
    for piece_doc in meta_doc["pieces"]:
        try:
            piece = datasetfmt.PieceMeta(
                piece_id=piece_doc["piece_id"], title=piece_doc.get("title", ""),
                author=piece_doc.get("author", ""), key=piece_doc.get("key"),
                imslp_page=piece_doc.get("imslp_page"))
        except (KeyError, ValueError) as exc:
            raise UsageError(f"bad piece metadata: {exc}") from exc
        page_entries = []
        for page_id in piece_doc.get("pages", []):
            seg_path = seg_dir / f"{page_id}.json"
            if not seg_path.exists():
                raise UsageError(f"no segmentation for page {page_id!r}")
            seg = PageSegmentation.load(seg_path)
            img = load_gray(queue_dir / "pages" / f"{page_id}.png")
            if accepted is None:
                keep = None
            else:
                keep = [f"{page_id}-{r.order_index:02d}" in accepted
                        for r in seg.regions]
            page_entries.append(datasetfmt.PageForExport(
                image=img, segmentation=seg, keep=keep))
        pieces.append((piece, page_entries))

    manifest = datasetfmt.build_manifest(meta_doc["scenario"], pieces, args.out)
    print(f"exported {manifest.counts['samples']} samples "
          f"({manifest.counts['pieces']} pieces) to {args.out}")
    return 0


def cmd_eval(args) -> int:
    result = report.evaluate(args.pred, args.truth, tolerance=args.tolerance)
    report.write_report(result, args.out)
    agg = result["aggregate"]
    print(f"micro IoU {agg['micro']['iou']:.3f}  F1 {agg['micro']['f1']:.3f}  "
          f"P {agg['micro']['precision']:.3f}  R {agg['micro']['recall']:.3f}")
    if "cuts" in agg:
        c = agg["cuts"]
        print(f"gaps matched {c['matched']}/{c['true_gaps']} "
              f"({c['matched_fraction']:.1%}), spurious {c['spurious']} "
              f"({c['spurious_fraction']:.1%}); region count accuracy "
              f"{agg['region_count_accuracy']:.1%}")
    print(f"report written to {args.out}")
    return 0


def cmd_netspec(args) -> int:
    print(neural.NetSpec(args.height, args.width).to_json(), end="")
    return 0


class UsageError(Exception):
    pass


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    except (report.EvalInputError, neural.WeightFormatError,
            neural.NetSpecError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
