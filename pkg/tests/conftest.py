from pathlib import Path

import numpy as np
import pytest

from relnet.topology import chain_topology, square_network_topology, square_topology

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def network():
    return square_network_topology()


@pytest.fixture
def square():
    return square_topology()


@pytest.fixture
def chain6():
    return chain_topology(6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def config_dir():
    return CONFIG_DIR


def finite_difference_rate(survival, t, h=1e-6):
    """-d/dt ln S by central differences."""
    return -(np.log(survival(t + h)) - np.log(survival(t - h))) / (2 * h)
