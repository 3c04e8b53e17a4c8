import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from greengaze.engine import TrainingConfig, create_bundle


@pytest.fixture
def tiny_config():
    """Smallest architecture that satisfies the dimension floor; quick enough
    for per-test training steps."""
    return TrainingConfig(seed=3, ngf=8, ndf=8, residual_blocks=1, epochs=1)


@pytest.fixture
def tiny_bundle(tiny_config):
    return create_bundle(tiny_config)


@pytest.fixture
def gray_eye():
    return np.full((300, 400, 3), 128, dtype=np.uint8)
