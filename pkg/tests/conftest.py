import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    max_examples=30,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def truth50():
    """Band-limit-prepared 50x50 synthetic scene used across estimator tests."""
    from shiftbench.synth import dead_leaves, prepare_truth

    return prepare_truth(dead_leaves((50, 50), seed=11))


@pytest.fixture(scope="session")
def truth16():
    from shiftbench.synth import dead_leaves, prepare_truth

    return prepare_truth(dead_leaves((16, 16), seed=5))
