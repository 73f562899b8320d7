import numpy as np
import pytest

from graspcover.gripper import GripperSpec
from graspcover.primitives import cube, l_bracket, plate, sphere


@pytest.fixture(scope="session")
def cube20():
    return cube(20.0)


@pytest.fixture(scope="session")
def plate_mesh():
    return plate()


@pytest.fixture(scope="session")
def bracket_mesh():
    return l_bracket()


@pytest.fixture(scope="session")
def sphere_mesh():
    return sphere(12.0)


@pytest.fixture(scope="session")
def gripper():
    return GripperSpec()


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
