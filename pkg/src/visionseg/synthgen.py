"""Synthetic score pages with exact system-placement ground truth.

Pages are composed by stacking system images (procedurally rendered stave
blocks by default, but any grayscale system image works) at random vertical
positions, recording each placement and a coarse bounding-box mask.  The
placements are exact by construction, which makes these pages the oracle
for the profile segmentation and the training corpus for the networks.

All randomness flows from explicit integer seeds through numpy's
SeedSequence, so a corpus is reproducible bit-for-bit from (seed, count)
and individual pages can be regenerated independently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .imaging import save_gray

# Renderer geometry. Stave lines are kept at a fixed 6 px spacing so a
# page-height/150 Gaussian merges each stave into a single clean profile
# bump, and outer padding stays nearly constant across systems so that the
# profile minimum of an inter-system gap lands close to the gap's center.
STAVE_SPACING = 6
STAVE_LINES = 5
STAVE_SPAN = STAVE_SPACING * (STAVE_LINES - 1) + 1  # rows covered by one stave


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Placement:
    """Where one system image landed on the page (row/col intervals)."""

    system_id: int
    row_start: int
    row_end: int
    col_start: int
    col_end: int

    def to_dict(self) -> dict:
        return {
            "system_id": self.system_id,
            "row_start": self.row_start,
            "row_end": self.row_end,
            "col_start": self.col_start,
            "col_end": self.col_end,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Placement":
        return cls(d["system_id"], d["row_start"], d["row_end"],
                   d["col_start"], d["col_end"])


@dataclass(frozen=True)
class SynthConfig:
    page_height: int = 1024
    page_width: int = 768
    min_systems: int = 2
    max_systems: int = 5
    min_gap: int = 30
    max_gap: int = 90
    margin: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.page_height < 1 or self.page_width < 1:
            raise ValueError("page dimensions must be positive")
        if not 1 <= self.min_systems <= self.max_systems:
            raise ValueError("need 1 <= min_systems <= max_systems")
        if not 1 <= self.min_gap <= self.max_gap:
            raise ValueError("need 1 <= min_gap <= max_gap")
        if self.margin < 0 or 2 * self.margin >= self.page_width:
            raise ValueError("margin leaves no page content width")

    @property
    def content_width(self) -> int:
        return self.page_width - 2 * self.margin

    def to_dict(self) -> dict:
        return {
            "page_height": self.page_height, "page_width": self.page_width,
            "min_systems": self.min_systems, "max_systems": self.max_systems,
            "min_gap": self.min_gap, "max_gap": self.max_gap,
            "margin": self.margin, "seed": self.seed,
        }


@dataclass(frozen=True)
class SynthPage:
    """A composed page, its box mask, and the placements that made it."""

    image: np.ndarray
    mask: np.ndarray
    placements: list[Placement] = field(default_factory=list)
    seed: int = 0
    page_id: str = "page-00000"


# ---------------------------------------------------------------------------
# Procedural system renderer
# ---------------------------------------------------------------------------

def _child_seed(*keys: int) -> int:
    """Derive a child seed from a tuple of integer keys, reproducibly."""
    return int(np.random.SeedSequence(list(keys)).generate_state(1, np.uint64)[0])


def _draw_notehead(img: np.ndarray, row: int, col: int) -> None:
    h, w = img.shape
    # 3x5 filled ellipse, slightly wider than tall like an engraved head
    for dr, half in ((-1, 1), (0, 2), (1, 1)):
        r = row + dr
        if 0 <= r < h:
            img[r, max(0, col - half):min(w, col + half + 1)] = 0.0


def render_fake_system(width: int, seed: int) -> np.ndarray:
    """Render a two-stave system image: ink 0.0 on background 1.0.

    Deterministic per seed.  Ten 1-px stave lines cross the full width at a
    fixed 6 px spacing; seeded noteheads and stems fill the staves, with
    stems pointing into the gap between the staves so no ink strays into
    the outer padding.  Heights land in [90, 140] px.
    """
    if width < 64:
        raise ValueError(f"system width must be at least 64 px, got {width}")
    rng = np.random.default_rng(seed)
    intra_gap = int(rng.integers(18, 25))
    pad = int(rng.integers(12, 19))
    height = 2 * STAVE_SPAN + intra_gap + 2 * pad

    img = np.ones((height, width), dtype=np.float64)
    stave_tops = (pad, pad + STAVE_SPAN + intra_gap)
    for top in stave_tops:
        for k in range(STAVE_LINES):
            img[top + k * STAVE_SPACING, :] = 0.0

    block_lo, block_hi = pad, height - pad  # stems stay inside the stave block
    for stave_idx, top in enumerate(stave_tops):
        n_notes = max(3, width // 24)
        cols = rng.integers(4, width - 4, size=n_notes)
        steps = rng.integers(0, 2 * (STAVE_LINES - 1) + 1, size=n_notes)
        stem_lens = rng.integers(14, 22, size=n_notes)
        for col, step, stem_len in zip(cols, steps, stem_lens):
            row = top + int(step) * (STAVE_SPACING // 2)
            _draw_notehead(img, row, int(col))
            if stave_idx == 0:  # top stave: stems run down toward the gap
                lo, hi = row, min(block_hi, row + int(stem_len))
                stem_col = max(0, int(col) - 2)
            else:  # bottom stave: stems run up
                lo, hi = max(block_lo, row - int(stem_len)), row
                stem_col = min(width - 1, int(col) + 2)
            img[lo:hi, stem_col] = 0.0
    return img


# ---------------------------------------------------------------------------
# Page composition
# ---------------------------------------------------------------------------

def _scale_width(img: np.ndarray, width: int) -> np.ndarray:
    if img.shape[1] == width:
        return img
    im = Image.fromarray(np.asarray(img, dtype=np.float32), mode="F")
    out = im.resize((width, img.shape[0]), Image.BILINEAR)
    return np.clip(np.asarray(out, dtype=np.float64), 0.0, 1.0)


def compose_page(systems: list[np.ndarray], cfg: SynthConfig,
                 page_id: str = "page-00000") -> SynthPage:
    """Stack randomly sampled systems onto a blank page.

    Draws the system count, samples from the pool with replacement (order
    does not matter), scales each system to the content width, and places
    them top to bottom with uniform random gaps and a random amount of the
    leftover slack above the first system.  When a draw cannot fit the
    page, the count is reduced and the draw retried; failure at a single
    system is an error.
    """
    if not systems:
        raise ValueError("system pool is empty")
    rng = np.random.default_rng(cfg.seed)
    n = int(rng.integers(cfg.min_systems, cfg.max_systems + 1))

    while n >= 1:
        picks = [int(i) for i in rng.integers(0, len(systems), size=n)]
        scaled = [_scale_width(systems[i], cfg.content_width) for i in picks]
        heights = [s.shape[0] for s in scaled]
        gaps = [int(g) for g in rng.integers(cfg.min_gap, cfg.max_gap + 1,
                                             size=max(0, n - 1))]
        total = 2 * cfg.margin + sum(heights) + sum(gaps)
        if total <= cfg.page_height:
            break
        n -= 1
    else:
        raise ValueError(
            f"cannot fit a single system on a {cfg.page_height}-row page")

    slack = cfg.page_height - total
    row = cfg.margin + int(rng.integers(0, slack + 1))
    page = np.ones((cfg.page_height, cfg.page_width), dtype=np.float64)
    mask = np.zeros((cfg.page_height, cfg.page_width), dtype=np.uint8)
    placements: list[Placement] = []
    col0, col1 = cfg.margin, cfg.margin + cfg.content_width
    for k, (pick, sysimg) in enumerate(zip(picks, scaled)):
        h = sysimg.shape[0]
        page[row:row + h, col0:col1] = sysimg
        mask[row:row + h, col0:col1] = 1
        placements.append(Placement(system_id=pick, row_start=row,
                                    row_end=row + h,
                                    col_start=col0, col_end=col1))
        row += h + (gaps[k] if k < len(gaps) else 0)
    return SynthPage(image=page, mask=mask, placements=placements,
                     seed=cfg.seed, page_id=page_id)


def target_profile(mask: np.ndarray) -> np.ndarray:
    """Step profile over rows: 1 where the mask has any foreground, else 0."""
    mask = np.asarray(mask)
    return (mask.max(axis=1) > 0).astype(np.float64)


# ---------------------------------------------------------------------------
# Corpus generation
# ---------------------------------------------------------------------------

def make_page(cfg: SynthConfig, index: int) -> SynthPage:
    """Build page ``index`` of the corpus keyed by (cfg.seed, index)."""
    page_seed = _child_seed(cfg.seed, index)
    pool = [render_fake_system(cfg.content_width, _child_seed(page_seed, j))
            for j in range(cfg.max_systems)]
    page_cfg = replace(cfg, seed=page_seed)
    return compose_page(pool, page_cfg, page_id=f"page-{index:05d}")


def generate_corpus(cfg: SynthConfig, count: int, out: str | Path) -> dict:
    """Write ``count`` synthetic pages with masks and placement metadata.

    Layout: out/pages/{id}.png, out/masks/{id}.png, out/meta/{id}.json and
    out/manifest.json.  The tree is byte-reproducible from (cfg, count).
    """
    out = Path(out)
    for sub in ("pages", "masks", "meta"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    entries = []
    for i in range(count):
        page = make_page(cfg, i)
        save_gray(page.image, out / "pages" / f"{page.page_id}.png")
        save_gray(page.mask.astype(np.float64), out / "masks" / f"{page.page_id}.png")
        meta = {
            "page_id": page.page_id,
            "seed": page.seed,
            "height": int(page.image.shape[0]),
            "width": int(page.image.shape[1]),
            "placements": [p.to_dict() for p in page.placements],
        }
        (out / "meta" / f"{page.page_id}.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        entries.append({"page_id": page.page_id, "seed": page.seed})

    manifest = {"config": cfg.to_dict(), "count": count, "pages": entries}
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def load_mask(path: str | Path) -> np.ndarray:
    """Read a mask PNG written by generate_corpus back to {0, 1}."""
    arr = np.asarray(Image.open(path).convert("L"))
    return (arr > 127).astype(np.uint8)


def load_meta(path: str | Path) -> dict:
    meta = json.loads(Path(path).read_text(encoding="utf-8"))
    meta["placements"] = [Placement.from_dict(p) for p in meta["placements"]]
    return meta
