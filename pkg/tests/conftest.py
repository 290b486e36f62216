import numpy as np
import pytest

from cnnpred.data.features import build_feature_tables
from cnnpred.data.samples import window_samples
from cnnpred.data.synthetic import generate_synthetic


@pytest.fixture(scope="session")
def small_raw():
    """Synthetic markets and shared series, short enough for fast tests."""
    return generate_synthetic(days=420, seed=11)


@pytest.fixture(scope="session")
def small_tables(small_raw):
    bars, shared = small_raw
    return build_feature_tables(bars, shared, 10)


@pytest.fixture(scope="session")
def small_2d(small_tables):
    return window_samples(small_tables, "2d", window=20)


@pytest.fixture(scope="session")
def small_3d(small_tables):
    return window_samples(small_tables, "3d", window=20)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.lines():
            terminalreporter.write_line(line)
