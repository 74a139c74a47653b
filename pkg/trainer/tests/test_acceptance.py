"""Trainer acceptance: 500-page corpus, held-out IoU, consumer hand-off.

Slow by nature (~5 minutes on 2 CPU cores): it really trains the U-Net on
450 pages and the refinement net on a subset, then drives the consumer CLI
with the exported weights.
"""

import time

from conftest import run_segmenter
from score_trainer import vsw1
from score_trainer.data import load_corpus
from score_trainer.models import load_unet
from score_trainer.train import (
    TrainConfig,
    evaluate_unet,
    gradient_check_b1,
    train_cutnet,
    train_unet,
)

IOU_FLOOR = 0.45


def test_trainer_acceptance(tmp_path):
    corpus = tmp_path / "corpus500"
    t0 = time.perf_counter()
    proc = run_segmenter("synth", "--out", str(corpus), "--count", "500",
                         "--seed", "11")
    assert proc.returncode == 0, proc.stderr
    print(f"PASS: 500-page corpus generated in {time.perf_counter()-t0:.0f}s")

    # U-Net: train at half resolution (weights are resolution-free),
    # evaluate held-out pages at the canonical inference size 512x384
    cfg = TrainConfig(corpus=str(corpus), epochs=4, batch_size=4, seed=0,
                      input_height=256, input_width=192)
    unet_path = tmp_path / "unet.vsw1"
    t0 = time.perf_counter()
    log = train_unet(cfg, unet_path, tmp_path / "unet_log.json")
    train_secs = time.perf_counter() - t0

    model = load_unet(vsw1.load(unet_path))
    canonical = load_corpus(str(corpus), 512, 384, cfg.validation_fraction,
                            cfg.seed)
    scores = evaluate_unet(model, canonical)
    assert scores["iou"] >= IOU_FLOOR, scores
    print(f"PASS: held-out pixel IoU {scores['iou']:.3f} >= {IOU_FLOOR} "
          f"at 512x384 (train-res IoU {log['final_val']['iou']:.3f}, "
          f"{train_secs:.0f}s, {len(canonical.val)} held-out pages)")

    # Refinement net: brief staged training at the canonical height, then
    # the combined export must drive the consumer's cutnet path cleanly
    cut_cfg = TrainConfig(corpus=str(corpus), epochs=1, batch_size=4, seed=0,
                          input_height=512, input_width=384, limit_pages=120)
    combined = tmp_path / "unet_cutnet.vsw1"
    train_cutnet(cut_cfg, unet_path, combined, tmp_path / "cutnet_log.json")
    seg_out = tmp_path / "seg"
    proc = run_segmenter("segment", str(corpus / "pages" / "page-00000.png"),
                         "--out", str(seg_out), "--method", "cutnet",
                         "--weights", str(combined))
    assert proc.returncode == 0, proc.stderr
    assert (seg_out / "segmentations" / "page-00000.json").exists()
    print("PASS: exported weights load and segment in the consumer CLI")

    rel = gradient_check_b1(cut_cfg, n_pages=4)
    assert rel < 1e-4
    print(f"PASS: b1 gradient check, analytic vs central differences "
          f"relative gap {rel:.2e} < 1e-4")
