import numpy as np
import pytest

from chirpcode import GammachirpParams, make_dictionary


def random_toy_dictionary(rng, n_channels=3, filter_len=16, stride=8, sample_rate=8000):
    """Small random dictionary with well-separated frequencies."""
    freqs = np.sort(rng.uniform(200.0, 0.4 * sample_rate, size=n_channels))
    channels = [
        GammachirpParams(
            f=float(f),
            b=float(rng.uniform(0.5, 2.0)),
            c=float(rng.uniform(-1.5, 1.5)),
            l=float(rng.uniform(2.0, 5.0)),
        )
        for f in freqs
    ]
    return make_dictionary(channels, filter_len, stride, sample_rate)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end checks")
