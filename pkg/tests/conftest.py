import numpy as np
import pytest

from hypothesis import settings

from loewner import IntegratorConfig


settings.register_profile('loewner', max_examples=25, deadline=None)
settings.load_profile('loewner')


@pytest.fixture
def tight() -> IntegratorConfig:
    """Integrator knobs for assertions at the 1e-9 level."""
    return IntegratorConfig(abs_tol=1e-11, rel_tol=1e-11)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
