"""Synthetic-corpus loading for training.

Consumes the corpus tree the segmentation toolkit writes
(pages/{id}.png, masks/{id}.png, meta/{id}.json, manifest.json), resized
to the network input size.  Images are cached as uint8 and converted to
float per batch to keep 500-page corpora in memory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image


@dataclass
class CorpusSample:
    page_id: str
    image: np.ndarray       # uint8 (H, W), 0=ink
    mask: np.ndarray        # uint8 {0,1} (H, W)
    target_rows: np.ndarray  # float32 (H,), 1 where a system crosses the row


@dataclass
class Corpus:
    train: list[CorpusSample]
    val: list[CorpusSample]
    height: int
    width: int


def _resize(im: Image.Image, width: int, height: int, mask: bool) -> np.ndarray:
    resample = Image.NEAREST if mask else Image.BILINEAR
    return np.asarray(im.resize((width, height), resample), dtype=np.uint8)


def load_corpus(corpus_dir: str | Path, height: int, width: int,
                validation_fraction: float, seed: int,
                limit: int | None = None) -> Corpus:
    corpus_dir = Path(corpus_dir)
    manifest = json.loads((corpus_dir / "manifest.json").read_text())
    page_ids = [e["page_id"] for e in manifest["pages"]]
    if limit is not None:
        page_ids = page_ids[:limit]
    if not page_ids:
        raise ValueError(f"corpus at {corpus_dir} has no pages")

    samples: list[CorpusSample] = []
    for page_id in page_ids:
        with Image.open(corpus_dir / "pages" / f"{page_id}.png") as im:
            image = _resize(im.convert("L"), width, height, mask=False)
        with Image.open(corpus_dir / "masks" / f"{page_id}.png") as im:
            mask = (_resize(im.convert("L"), width, height, mask=True) > 127)
        meta = json.loads((corpus_dir / "meta" / f"{page_id}.json").read_text())
        scale = height / meta["height"]
        target = np.zeros(height, dtype=np.float32)
        for pl in meta["placements"]:
            lo = int(round(pl["row_start"] * scale))
            hi = max(lo + 1, int(round(pl["row_end"] * scale)))
            target[lo:min(hi, height)] = 1.0
        samples.append(CorpusSample(page_id, image, mask.astype(np.uint8), target))

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(samples))
    n_val = max(1, int(round(len(samples) * validation_fraction)))
    val_idx = set(order[:n_val].tolist())
    train = [s for i, s in enumerate(samples) if i not in val_idx]
    val = [s for i, s in enumerate(samples) if i in val_idx]
    return Corpus(train=train, val=val, height=height, width=width)


def batches(samples: list[CorpusSample], batch_size: int,
            rng: np.random.Generator | None = None):
    """Yield (images, masks, targets) float tensors; shuffled when rng given."""
    order = np.arange(len(samples))
    if rng is not None:
        order = rng.permutation(order)
    for lo in range(0, len(order), batch_size):
        chunk = [samples[i] for i in order[lo:lo + batch_size]]
        images = torch.from_numpy(
            np.stack([s.image for s in chunk]).astype(np.float32) / 255.0)
        masks = torch.from_numpy(
            np.stack([s.mask for s in chunk]).astype(np.float32))
        targets = torch.from_numpy(np.stack([s.target_rows for s in chunk]))
        yield images[:, None, :, :], masks[:, None, :, :], targets
