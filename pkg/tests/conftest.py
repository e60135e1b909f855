import numpy as np
import pytest

from distlasso import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the coordinate-descent kernels once, before any timing."""
    _kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)
