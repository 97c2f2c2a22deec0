import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_spd(rng, n, lo=0.2, hi=3.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (q * rng.uniform(lo, hi, n)) @ q.T


def random_skew(rng, n, scale=1.0):
    a = scale * rng.standard_normal((n, n))
    return 0.5 * (a - a.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
