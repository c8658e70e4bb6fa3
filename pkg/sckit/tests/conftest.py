import tempfile
import subprocess as sp
from pathlib import Path
from functools import partial

import numpy as np
import pytest

from sckit.cloud import PointCloud

run_cmd = partial(sp.run, encoding="utf-8", stdout=sp.PIPE, stderr=sp.PIPE)


@pytest.fixture(scope="session")
def tmpdir() -> Path:
    with tempfile.TemporaryDirectory() as dir_name:
        yield Path(dir_name)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def labeled_cloud(rng) -> PointCloud:
    positions = rng.uniform(0.0, 2.0, size=(200, 3))
    return PointCloud(
        positions,
        colors=rng.integers(0, 256, size=(200, 3)),
        semantic_labels=(positions[:, 0] > 1.0).astype(np.int64),
        instance_labels=(positions[:, 0] > 1.0).astype(np.int64) * 2 + (positions[:, 1] > 1.0),
    )
