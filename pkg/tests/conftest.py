from __future__ import annotations

import numpy as np
import pytest

from fedgraph.graph import desk_config, generate_dataset, table1_config


@pytest.fixture(scope="session")
def default_dataset():
    return generate_dataset(table1_config(seed=0))


@pytest.fixture(scope="session")
def desk_dataset():
    return generate_dataset(desk_config(seed=1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
