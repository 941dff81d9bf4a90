import numpy as np
import pytest

from pixelcontrast.backend import available_backends


@pytest.fixture(params=sorted(available_backends()))
def kernels(request):
    """Run kernel-level tests against every built backend."""
    return available_backends()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
