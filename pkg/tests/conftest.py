import numpy as np
import pytest

from rfidsense.domain import TagRead


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_read(t=0, rssi=-60.0, phase=1.0, tag="AA01", dist=None):
    return TagRead(t, tag, 1, rssi, phase, dist)
