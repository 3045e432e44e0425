import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from leafgraph.data import split, synth_dataset
from leafgraph.rng import Rng


@pytest.fixture
def small_dataset():
    """4 classes x 24 samples, dim 16, with splits assigned."""
    rng = Rng(2024)
    manifest, store, _ = synth_dataset(4, 24, 16, 0.4, rng)
    manifest = split(manifest, (0.8, 0.1, 0.1), rng.stream("split"))
    return manifest, store
