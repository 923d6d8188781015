import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from overdensity import FitConfig, ToyConfig, fit_gis, generate_toy

settings.register_profile(
    "package",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("package")


@pytest.fixture(scope="session")
def toy_dataset():
    return generate_toy(ToyConfig(n_background=12_000, n_signal=120), seed=7)


@pytest.fixture(scope="session")
def toy_model(toy_dataset):
    """A small but honest fit, shared across the scoring tests."""
    cfg = FitConfig(n_iterations=5, n_conditional_bins=6, n_knots=24,
                    n_candidates=16, rng_seed=7)
    return fit_gis(toy_dataset.features, toy_dataset.conditionals, cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
