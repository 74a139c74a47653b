"""Training loops: U-Net on masks, then the refinement net on row targets.

Both stages log per-batch losses and held-out metrics to a JSON file and
export VSW1 weights.  The refinement stage trains with the U-Net frozen
and exports a combined file so the consumer's neural path works directly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from . import vsw1
from .data import Corpus, batches, load_corpus
from .models import Cutnet, SmallUNet, export_tensors, load_unet


@dataclass
class TrainConfig:
    corpus: str
    epochs: int = 30
    batch_size: int = 4
    learning_rate: float = 1e-3
    validation_fraction: float = 0.1
    seed: int = 0
    input_height: int = 512
    input_width: int = 384
    limit_pages: int | None = None

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")


def _pixel_metrics(pred: torch.Tensor, truth: torch.Tensor) -> dict:
    p = pred.bool()
    t = truth.bool()
    tp = int((p & t).sum())
    fp = int((p & ~t).sum())
    fn = int((~p & t).sum())
    precision = tp / (tp + fp) if tp + fp else (1.0 if tp + fn == 0 else 0.0)
    recall = tp / (tp + fn) if tp + fn else (1.0 if tp + fp == 0 else 0.0)
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    iou = tp / (tp + fp + fn) if tp + fp + fn else 1.0
    return {"iou": iou, "f1": f1, "precision": precision, "recall": recall}


def evaluate_unet(model: SmallUNet, corpus: Corpus) -> dict:
    model.eval()
    tp = fp = fn = 0
    with torch.no_grad():
        for images, masks, _ in batches(corpus.val, 4):
            pred = torch.sigmoid(model(images)) > 0.5
            t = masks.bool()
            tp += int((pred & t).sum())
            fp += int((pred & ~t).sum())
            fn += int((~pred & t).sum())
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    iou = tp / (tp + fp + fn) if tp + fp + fn else 1.0
    return {"iou": iou, "f1": f1, "precision": precision, "recall": recall}


def train_unet(cfg: TrainConfig, out_weights: str | Path,
               out_log: str | Path | None = None) -> dict:
    torch.manual_seed(cfg.seed)
    corpus = load_corpus(cfg.corpus, cfg.input_height, cfg.input_width,
                         cfg.validation_fraction, cfg.seed, cfg.limit_pages)
    model = SmallUNet()
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    loss_fn = nn.BCEWithLogitsLoss()
    rng = np.random.default_rng(cfg.seed)

    log: dict = {"stage": "unet", "config": asdict(cfg), "batches": [],
                 "epochs": []}
    for epoch in range(cfg.epochs):
        model.train()
        for images, masks, _ in batches(corpus.train, cfg.batch_size, rng):
            optimizer.zero_grad()
            loss = loss_fn(model(images), masks)
            loss.backward()
            optimizer.step()
            log["batches"].append(round(float(loss.detach()), 6))
        scores = evaluate_unet(model, corpus)
        log["epochs"].append({"epoch": epoch, "val": scores})
        print(f"unet epoch {epoch}: loss {log['batches'][-1]:.4f} "
              f"val IoU {scores['iou']:.3f}")

    log["final_val"] = evaluate_unet(model, corpus)
    vsw1.save(export_tensors(unet=model), out_weights)
    if out_log is not None:
        Path(out_log).write_text(json.dumps(log, indent=2) + "\n",
                                 encoding="utf-8")
    return log


def train_cutnet(cfg: TrainConfig, unet_weights: str | Path,
                 out_weights: str | Path,
                 out_log: str | Path | None = None) -> dict:
    torch.manual_seed(cfg.seed)
    corpus = load_corpus(cfg.corpus, cfg.input_height, cfg.input_width,
                         cfg.validation_fraction, cfg.seed, cfg.limit_pages)
    unet_tensors = vsw1.load(unet_weights)
    unet = load_unet(unet_tensors)
    unet.eval()
    for p in unet.parameters():
        p.requires_grad_(False)

    model = Cutnet(cfg.input_height)
    # The subtraction scalar s sees raw logit row sums, O(1e3): full-rate
    # Adam on w1/b1 slams s outside the sigmoid's float range within a few
    # steps, y saturates to exactly 0 and the whole net collapses into an
    # absorbing predict-the-prior minimum. Train that branch much slower.
    subtract_params = [model.w1, model.b1]
    rest = [p for name, p in model.named_parameters()
            if name not in ("w1", "b1")]
    optimizer = torch.optim.Adam([
        {"params": rest, "lr": cfg.learning_rate},
        {"params": subtract_params, "lr": cfg.learning_rate * 1e-4},
    ])
    loss_fn = nn.BCELoss()
    rng = np.random.default_rng(cfg.seed)

    # the U-Net is frozen, so its logits per page never change: compute
    # them once and training epochs only touch the tiny 1-D net
    train_feats = _precompute_logits(unet, corpus.train, cfg.batch_size)
    val_feats = _precompute_logits(unet, corpus.val, cfg.batch_size)

    log: dict = {"stage": "cutnet", "config": asdict(cfg), "batches": [],
                 "epochs": []}
    for epoch in range(cfg.epochs):
        model.train()
        order = rng.permutation(len(train_feats))
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            logits = torch.stack([train_feats[i][0] for i in idx])
            targets = torch.stack([train_feats[i][1] for i in idx])
            optimizer.zero_grad()
            z = model(logits)
            loss = loss_fn(z, targets)
            loss.backward()
            optimizer.step()
            log["batches"].append(round(float(loss.detach()), 6))
        log["epochs"].append(
            {"epoch": epoch, "val": evaluate_cutnet(model, val_feats)})
        if epoch % 20 == 0 or epoch == cfg.epochs - 1:
            print(f"cutnet epoch {epoch}: loss {log['batches'][-1]:.4f} "
                  f"val row acc {log['epochs'][-1]['val']['row_accuracy']:.3f}")

    log["final_val"] = evaluate_cutnet(model, val_feats)
    combined = {**{k: v for k, v in unet_tensors.items()
                   if k.startswith("unet.")},
                **export_tensors(cutnet=model)}
    vsw1.save(combined, out_weights)
    if out_log is not None:
        Path(out_log).write_text(json.dumps(log, indent=2) + "\n",
                                 encoding="utf-8")
    return log


def _precompute_logits(unet: SmallUNet, samples, batch_size: int):
    feats: list[tuple[torch.Tensor, torch.Tensor]] = []
    with torch.no_grad():
        for images, _, targets in batches(samples, batch_size):
            logits = unet(images)[:, 0, :, :]
            feats.extend((logits[i], targets[i]) for i in range(logits.shape[0]))
    return feats


def evaluate_cutnet(model: Cutnet, feats) -> dict:
    model.eval()
    correct = total = 0
    transitions_pred = transitions_true = 0
    with torch.no_grad():
        for logits, targets in feats:
            z = model(logits[None])
            pred = (z[0] > 0.5).float()
            correct += int((pred == targets).sum())
            total += targets.numel()
            transitions_pred += int(torch.abs(torch.diff(pred)).sum())
            transitions_true += int(torch.abs(torch.diff(targets)).sum())
    return {"row_accuracy": correct / total if total else 1.0,
            "step_transitions_pred": transitions_pred,
            "step_transitions_true": transitions_true}


def count_correct_transitions(z_rows: torch.Tensor,
                              target_rows: torch.Tensor,
                              tolerance: int = 4) -> int:
    """Step transitions of thresholded z landing within +-tolerance of a
    true target transition; the trained net must not do worse than init."""
    pred = (z_rows > 0.5).float()
    pred_edges = torch.nonzero(torch.diff(pred) != 0).flatten().tolist()
    true_edges = torch.nonzero(torch.diff(target_rows) != 0).flatten().tolist()
    hit = 0
    used: set[int] = set()
    for e in pred_edges:
        best = None
        for i, t in enumerate(true_edges):
            if i in used or abs(t - e) > tolerance:
                continue
            if best is None or abs(t - e) < abs(true_edges[best] - e):
                best = i
        if best is not None:
            used.add(best)
            hit += 1
    return hit


def gradient_check_b1(cfg: TrainConfig, n_pages: int = 4,
                      eps: float = 1e-3) -> float:
    """Relative gap between autograd and central finite differences for the
    loss derivative wrt b1, in float64 on a fixed mini-batch."""
    corpus = load_corpus(cfg.corpus, cfg.input_height, cfg.input_width,
                         cfg.validation_fraction, cfg.seed,
                         limit=max(n_pages, 2))
    images, _, targets = next(iter(batches(corpus.train[:n_pages], n_pages)))
    unet = SmallUNet().double()
    torch.manual_seed(cfg.seed)
    model = Cutnet(cfg.input_height).double()
    loss_fn = nn.BCELoss()
    with torch.no_grad():
        logits = unet(images.double())[:, 0, :, :]

    def loss_at(b1_value: float) -> float:
        with torch.no_grad():
            model.b1.fill_(b1_value)
        return float(loss_fn(model(logits), targets.double()))

    base = float(model.b1.detach())
    model.zero_grad()
    loss = loss_fn(model(logits), targets.double())
    loss.backward()
    analytic = float(model.b1.grad.detach())
    fd = (loss_at(base + eps) - loss_at(base - eps)) / (2 * eps)
    with torch.no_grad():
        model.b1.fill_(base)
    denom = max(abs(analytic), abs(fd), 1e-12)
    return abs(analytic - fd) / denom
