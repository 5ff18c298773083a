import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from weightcert import Network, NetworkSpec

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def random_net(rng, layer_dims, scale=0.7):
    """Random dense net with entries scaled to keep norm products moderate."""
    dims = tuple(layer_dims)
    weights = []
    for k in range(1, len(dims)):
        a = scale / np.sqrt(dims[k - 1])
        weights.append(rng.uniform(-a, a, size=(dims[k], dims[k - 1])))
    return Network(NetworkSpec(dims), weights)


def random_dims(rng, min_classes=2, max_width=8, depths=(2, 3, 4)):
    L = int(rng.choice(depths))
    dims = [int(rng.integers(2, max_width + 1)) for _ in range(L)]
    dims.append(int(rng.integers(min_classes, max_width + 1)))
    return tuple(dims)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
