# tests/conftest.py
import os

import numpy as np
import pytest

from mmlio import configure
from mmlio.pipeline.dataset import read_dataset
from mmlio.simkit import World, make_scene, preset, room, wall
from mmlio.simkit.dataset import simulate_dataset

# Sensor overrides without range noise for exact-geometry tests
NOISE_FREE = dict(v={"range_noise_sigma": 0.0}, h={"range_noise_sigma": 0.0})


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long end-to-end runs over simulated scenes")


@pytest.fixture(scope='session', autouse=True)
def testing_profile():
    """Every test runs under the testing profile."""
    os.environ['MMLIO_CONFIG'] = 'testing'
    os.environ.pop('MMLIO_PARAMS_FILE', None)
    return configure('testing')


@pytest.fixture(scope='module')
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope='module')
def room_world():
    return World(room(8.0, 6.0, 3.0))


@pytest.fixture(scope='module')
def spinning_model():
    return preset("spinning", range_noise_sigma=0.0)


@pytest.fixture(scope='module')
def solid_state_model():
    return preset("solid_state", range_noise_sigma=0.0)


@pytest.fixture(scope='module')
def close_wall_world():
    """One wall 1.5 m in front of the origin, filling the solid-state field of view."""
    return World([wall((1.5, -20.0), (1.5, 20.0), -20.0, 20.0)])


@pytest.fixture(scope='module')
def room_scenario():
    return make_scene("room", **NOISE_FREE)


@pytest.fixture(scope='module')
def static_dataset(tmp_path_factory):
    """Stationary rig in the calibration room with a known spinning extrinsic."""
    root = tmp_path_factory.mktemp("static")
    simulate_dataset(make_scene("static", duration=2.0, **NOISE_FREE), str(root), seed=0,
                     include_extrinsic=True)
    return read_dataset(str(root))


@pytest.fixture(scope='module')
def room_dataset(tmp_path_factory):
    """Stationary room without the spinning extrinsic, so runs must calibrate."""
    root = tmp_path_factory.mktemp("room")
    simulate_dataset(make_scene("room", duration=2.0), str(root), seed=0)
    return read_dataset(str(root))


@pytest.fixture(scope='module')
def corridor_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("corridor")
    simulate_dataset(make_scene("corridor", length=8.0), str(root), seed=0,
                     include_extrinsic=True)
    return read_dataset(str(root))


@pytest.fixture(scope='module')
def office_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("office")
    simulate_dataset(make_scene("office"), str(root), seed=0, include_extrinsic=True)
    return read_dataset(str(root))

