"""
Shared fixtures for the principal_tmle test suite

Long Monte Carlo acceptance runs are marked slow and only run with --runslow.
"""
import numpy as np
import pytest
from scipy.special import expit

from principal_tmle.models import Dataset, NuisanceSettings, SimConfig
from principal_tmle.simulation import discretize_biomarker, simulate_trial


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run slow Monte Carlo acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo acceptance run (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def create_binary_covariate_dataset(n: int = 600, seed: int = 7) -> Dataset:
    """Crossover trial with one binary covariate and a binary biomarker"""
    rng = np.random.default_rng(seed)
    w = rng.integers(0, 2, n)
    a = rng.integers(0, 2, n)
    s1 = (rng.random(n) < expit(-0.3 + 0.8 * w)).astype(int)
    y1 = (rng.random(n) < 0.3 + 0.2 * s1).astype(int)
    y0 = (rng.random(n) < 0.5 + 0.1 * w).astype(int)
    y = np.where(a == 1, y1, y0)
    s = np.where(a == 1, s1, 0).astype(float)
    s_c = np.where((a == 0) & (y == 0), s1, 0).astype(float)
    return Dataset(w=w.reshape(-1, 1).astype(float), a=a, s=s, y=y, s_c=s_c,
                   delta=np.ones(n, dtype=int), pi=np.ones(n), covariate_names=("w",))


@pytest.fixture
def binary_covariate_dataset() -> Dataset:
    return create_binary_covariate_dataset()


@pytest.fixture(scope="session")
def sim_config() -> SimConfig:
    return SimConfig(n=2000, seed=11)


@pytest.fixture(scope="session")
def large_sim_config() -> SimConfig:
    return SimConfig(n=5000, seed=2024)


@pytest.fixture(scope="session")
def continuous_trial(sim_config) -> Dataset:
    return simulate_trial(sim_config)


@pytest.fixture(scope="session")
def discrete_trial(sim_config) -> Dataset:
    return discretize_biomarker(simulate_trial(sim_config), threshold=0.41)


@pytest.fixture(scope="session")
def large_discrete_trial(large_sim_config) -> Dataset:
    return discretize_biomarker(simulate_trial(large_sim_config), threshold=0.41)


@pytest.fixture
def known_half_settings() -> NuisanceSettings:
    return NuisanceSettings(treatment="known", treatment_probability=0.5)


@pytest.fixture
def fast_settings() -> NuisanceSettings:
    return NuisanceSettings(library=("glm",), folds=3)
