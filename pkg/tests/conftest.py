import numpy as np
import pytest

from hdrelay import catalog


@pytest.fixture(scope="session")
def bsc_deg():
    return catalog.bsc_deg()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def uniform_input(ch, p_listen=0.5):
    from hdrelay.channel_core import InputDistribution

    nx1, nx2, _ = ch.input_shape
    return InputDistribution.from_modes(
        p_listen, np.full(nx1, 1 / nx1), np.full((nx1, nx2), 1 / (nx1 * nx2)), ch.quiet_index
    )
