import numpy as np
import pytest

from kronsgd.maxtree import HAVE_COMPILED

BACKENDS = ["python"] + (["compiled"] if HAVE_COMPILED else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
