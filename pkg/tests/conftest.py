import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("fast", max_examples=20, deadline=None)
settings.register_profile(
    "ci", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run slow training tests"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_sample():
    """
    Builds a synchronized trial with the default frame shapes
    """
    from mmforesight.sensors import SampleQuadruple

    def build(T=6, behavior="push", object_id=0, trial_id=0, seed=0, size=32):
        generator = np.random.default_rng(seed)
        return SampleQuadruple(
            vision=generator.uniform(size=(T, 3, size, size)).astype(np.float32),
            haptic=generator.normal(size=(T, 10, 8)).astype(np.float32),
            audio=generator.normal(size=(T, 32, 8)).astype(np.float32),
            vibro=generator.normal(size=(T, 16, 8)).astype(np.float32),
            behavior=behavior,
            object_id=object_id,
            trial_id=trial_id,
        )

    return build
