import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ehaoi import SystemParams, ThresholdPolicy

settings.register_profile("ci", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


def random_policy(rng: np.random.Generator, battery: int, mu_h: float, spread: float = 3.0) -> ThresholdPolicy:
    """Monotone thresholds drawn uniformly on ``[0, spread / mu_h]`` and sorted."""
    taus = np.sort(rng.uniform(0.0, spread / mu_h, size=battery))[::-1]
    return ThresholdPolicy(tuple(float(t) for t in taus))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def b2_params():
    return SystemParams(1.0, 2)
