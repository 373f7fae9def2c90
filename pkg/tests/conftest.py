import numpy as np
import pytest

from protoattn.core import FeatureMap


def f32_representable(arr: np.ndarray) -> np.ndarray:
    """Round to float32 so file round-trips are bit-exact."""
    return arr.astype(np.float32).astype(np.float64)


def random_fmap(seed: int, h: int, w: int, c: int) -> FeatureMap:
    rng = np.random.default_rng(seed)
    return FeatureMap(h, w, c, f32_representable(rng.standard_normal((h, w, c))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
