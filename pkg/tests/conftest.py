import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from knudsen.config import build_scenario
from knudsen.geometry import Annulus, Ball, Ellipsoid
from knudsen.rng import Stream
from knudsen.runner import make_kernel

settings.register_profile(
    "suite", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")


@pytest.fixture(scope="session")
def disk():
    return Ball([0.0, 0.0], 1.0)


@pytest.fixture(scope="session")
def annulus():
    return Annulus([0.0, 0.0], 1.0, 2.0)


@pytest.fixture(scope="session")
def ellipse():
    return Ellipsoid([0.0, 0.0], [2.0, 1.0])


@pytest.fixture(scope="session")
def disk_scenario():
    return build_scenario({"seed": 101})


@pytest.fixture(scope="session")
def disk_kernel(disk_scenario):
    return make_kernel(disk_scenario)


@pytest.fixture(scope="session")
def annulus_scenario():
    return build_scenario({
        "seed": 202, "t_max": 500.0, "mode": "patch",
        "domain": {"kind": "annulus", "center": [0, 0],
                   "r_inner": 1.0, "r_outer": 2.0}})


@pytest.fixture(scope="session")
def annulus_kernel(annulus_scenario):
    return make_kernel(annulus_scenario)


@pytest.fixture()
def stream():
    return Stream(7, 0)


def fresh_stream(seed, index=0):
    return Stream(seed, index)


def vec(*xs):
    return np.array(xs, dtype=float)
