import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("nvarlab", max_examples=25, deadline=None)
settings.load_profile("nvarlab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
