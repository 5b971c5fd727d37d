import numpy as np
import pytest

from edgeloc.forward import NoiseSpec, synthesize_doorway, synthesize_edge
from edgeloc.scene import PhysicsConfig, SourceGroundTruth, doorway_preset, edge_preset

PHYS = PhysicsConfig()


@pytest.fixture(scope="session")
def door():
    return doorway_preset()


@pytest.fixture(scope="session")
def edge():
    return edge_preset()


@pytest.fixture(scope="session")
def door_source():
    return SourceGroundTruth(3.2, 25.0, 1.5, 0.005)


@pytest.fixture(scope="session")
def door_traces(door, door_source):
    return synthesize_doorway(door, door_source)


@pytest.fixture(scope="session")
def edge_source():
    return SourceGroundTruth(3.1, 10.0, 1.3, 0.005)


@pytest.fixture(scope="session")
def edge_traces(edge, edge_source):
    return synthesize_edge(edge, edge_source)


@pytest.fixture(scope="session")
def door_traces_noisy(door, door_source):
    return synthesize_doorway(door, door_source, noise=NoiseSpec(snr_db=20.0, seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
