import time

import numpy as np
import pytest

from koopeq import SimConfig, integrate_ks

REFERENCE_SEED = 7

#: wall-clock cost of generating each session dataset, charged to the first
#: acceptance criterion that consumes it
GENERATION_SECONDS = {}


@pytest.fixture(scope="session")
def mu15_traj():
    """Reference traveling-wave dataset: mu=15, tau=0.2, M=1000."""
    t0 = time.perf_counter()
    traj = integrate_ks(SimConfig(mu=15.0, tau=0.2, num_snapshots=1000,
                                  seed=REFERENCE_SEED))
    GENERATION_SECONDS["mu15"] = time.perf_counter() - t0
    return traj


@pytest.fixture(scope="session")
def mu18_traj():
    """Reference bimodal-pattern dataset: mu=18, tau=0.05, M=1000."""
    t0 = time.perf_counter()
    traj = integrate_ks(SimConfig(mu=18.0, tau=0.05, num_snapshots=1000,
                                  seed=REFERENCE_SEED))
    GENERATION_SECONDS["mu18"] = time.perf_counter() - t0
    return traj


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
