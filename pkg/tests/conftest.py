import numpy as np
import pytest

# Suite-wide master seed, fixed a priori (date of the initial build).
SUITE_SEED = 20260809


@pytest.fixture
def gen():
    return np.random.default_rng(SUITE_SEED)
