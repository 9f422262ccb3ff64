import pytest

from ranenergy.config import RunConfig


@pytest.fixture
def config() -> RunConfig:
    return RunConfig()


@pytest.fixture
def small_config() -> RunConfig:
    """Default deployment with a fixed, small UE drop and a short run."""
    return RunConfig().replace(network={"fixed_ue_count": 60}, run={"until_s": 5.0})
