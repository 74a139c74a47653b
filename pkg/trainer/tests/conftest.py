import json
import subprocess
import sys

import pytest

SEGMENTER = [sys.executable, "-m", "visionseg.cli"]


def run_segmenter(*args: str) -> subprocess.CompletedProcess:
    """The consumer toolkit is driven through its CLI only."""
    return subprocess.run([*SEGMENTER, *args], capture_output=True, text=True)


@pytest.fixture(scope="session")
def netspec_doc() -> dict:
    proc = run_segmenter("netspec")
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus_small")
    proc = run_segmenter("synth", "--out", str(out), "--count", "24",
                         "--seed", "900")
    assert proc.returncode == 0, proc.stderr
    return out


@pytest.fixture(scope="session")
def trained_unet(small_corpus, tmp_path_factory):
    """A converged U-Net on part of the small corpus, shared across tests."""
    from score_trainer.train import TrainConfig, train_unet

    out = tmp_path_factory.mktemp("unet") / "unet.vsw1"
    cfg = TrainConfig(corpus=str(small_corpus), epochs=60, batch_size=4,
                      seed=0, input_height=256, input_width=192,
                      validation_fraction=0.15, limit_pages=12)
    log = train_unet(cfg, out)
    assert log["final_val"]["iou"] > 0.6, log["final_val"]
    return out, cfg
