import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nodal_lab.grid import build_domain

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def square65():
    return build_domain("square", 65)


def product_mode(d, j, k):
    """Sampled ``sin(j pi x) sin(k pi y)`` on a unit-square domain."""
    return d.sample(lambda x, y: np.sin(j * math.pi * x) * np.sin(k * math.pi * y))
