import numpy as np
import pytest

from auvtrack import kernels
from auvtrack.acoustic import AcousticConfig, paper_buoys


@pytest.fixture
def buoys():
    return paper_buoys()


@pytest.fixture
def quiet():
    return AcousticConfig(sound_speed=1500.0, timing_noise_std=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    previous = kernels.backend()
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)
