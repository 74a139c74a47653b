"""Package segmented systems as standardized dataset samples.

Every retained system is cropped from its page, resized to 128x512
grayscale (direct bilinear resize, aspect distortion accepted) and written
as a JPEG.  Samples are numbered per piece in reading order over the
retained set, so the numbers always form 1..n even when some segments were
rejected during review; the manifest records that order together with the
piece metadata.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .imaging import to_u8
from .profileseg import PageSegmentation, SystemRegion

SAMPLE_HEIGHT = 128
SAMPLE_WIDTH = 512
JPEG_QUALITY = 90


@dataclass(frozen=True)
class SampleMeta:
    title: str
    author: str
    key: str | None
    imslp_page: str | None
    source_page: str
    system_number: int
    order_within_page: int

    def to_dict(self) -> dict:
        return {
            "title": self.title, "author": self.author, "key": self.key,
            "imslp_page": self.imslp_page, "source_page": self.source_page,
            "system_number": self.system_number,
            "order_within_page": self.order_within_page,
        }


@dataclass(frozen=True)
class PieceMeta:
    """Piece-level metadata shared by all of the piece's samples."""

    piece_id: str
    title: str
    author: str
    key: str | None = None
    imslp_page: str | None = None

    def __post_init__(self):
        if not self.title or not self.author:
            raise ValueError(
                f"piece {self.piece_id!r}: title and author are required")


@dataclass
class PageForExport:
    """One segmented page plus per-region keep flags (None keeps all)."""

    image: np.ndarray
    segmentation: PageSegmentation
    keep: list[bool] | None = None

    def kept_regions(self) -> list[SystemRegion]:
        regions = self.segmentation.regions
        if self.keep is None:
            return list(regions)
        if len(self.keep) != len(regions):
            raise ValueError("keep flags do not align with regions")
        return [r for r, k in zip(regions, self.keep) if k]


@dataclass(frozen=True)
class DatasetManifest:
    scenario: str
    samples: list[dict] = field(default_factory=list)

    @property
    def counts(self) -> dict:
        return {
            "samples": len(self.samples),
            "pieces": len({s["piece_id"] for s in self.samples}),
        }

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "counts": self.counts,
                "samples": self.samples}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def export_system(page: np.ndarray, region: SystemRegion,
                  out: str | Path) -> Path:
    """Crop one region and write the 128x512 grayscale JPEG sample."""
    page = np.asarray(page, dtype=np.float64)
    height, width = page.shape
    if region.row_end > height or region.col_end > width:
        raise ValueError(f"region {region} exceeds page bounds {height}x{width}")
    crop = page[region.row_start:region.row_end, region.col_start:region.col_end]
    if crop.size == 0:
        raise ValueError("degenerate region crop")
    im = Image.fromarray(to_u8(crop), "L")
    im = im.resize((SAMPLE_WIDTH, SAMPLE_HEIGHT), Image.BILINEAR)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    im.save(out, format="JPEG", quality=JPEG_QUALITY)
    return out


def build_manifest(scenario: str,
                   pieces: list[tuple[PieceMeta, list[PageForExport]]],
                   out: str | Path) -> DatasetManifest:
    """Export every kept system and write the ordered dataset manifest.

    Pages of each piece must be given in page order; system numbers are
    assigned 1..n over the piece's kept systems in (page, region) order.
    Output tree: out/{scenario}/{piece_id}/{system_number:04d}.jpg plus
    out/{scenario}/manifest.json.
    """
    root = Path(out) / scenario
    samples: list[dict] = []
    seen_files: set[str] = set()
    for piece, pages in pieces:
        number = 0
        for page in pages:
            for region in page.kept_regions():
                number += 1
                rel = f"{piece.piece_id}/{number:04d}.jpg"
                if rel in seen_files:
                    raise ValueError(f"duplicate sample path {rel!r}")
                seen_files.add(rel)
                export_system(page.image, region, root / rel)
                meta = SampleMeta(
                    title=piece.title, author=piece.author, key=piece.key,
                    imslp_page=piece.imslp_page,
                    source_page=page.segmentation.source,
                    system_number=number,
                    order_within_page=region.order_index,
                )
                samples.append({"file": rel, "piece_id": piece.piece_id,
                                **meta.to_dict()})
    manifest = DatasetManifest(scenario=scenario, samples=samples)
    root.mkdir(parents=True, exist_ok=True)
    (root / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return manifest
