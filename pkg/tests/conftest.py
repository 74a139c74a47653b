import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # naive_nets importable

from visionseg.neural import NetSpec, WeightStore
from visionseg.synthgen import SynthConfig, SynthPage, make_page


@pytest.fixture(scope="session")
def acceptance_corpus() -> tuple[list[SynthPage], float]:
    """The 200 pages of the acceptance criterion (seed 42, defaults),
    along with the wall-clock seconds it took to generate them."""
    import time

    cfg = SynthConfig(seed=42)
    t0 = time.perf_counter()
    pages = [make_page(cfg, i) for i in range(200)]
    return pages, time.perf_counter() - t0


def random_store(spec: NetSpec, rng: np.random.Generator,
                 scale: float = 0.3,
                 groups: tuple[str, ...] = ("unet", "cutnet")) -> WeightStore:
    """Random weights for forward-pass tests (no training involved)."""
    store = WeightStore()
    table = {}
    if "unet" in groups:
        table.update(spec.unet_shapes())
    if "cutnet" in groups:
        table.update(spec.cutnet_shapes())
    for name, shape in table.items():
        store[name] = rng.normal(0.0, scale, size=shape).astype(np.float32)
    return store
