import numpy as np
import pytest

from motionkit.skeletons import desk_skeleton, g1_skeleton
from motionkit.synth import constant_pose_clip, sine_walk_clip, turning_clip


@pytest.fixture(scope="session")
def desk():
    return desk_skeleton()


@pytest.fixture(scope="session")
def g1():
    return g1_skeleton()


@pytest.fixture(scope="session")
def walk_clip(desk):
    return sine_walk_clip(desk, duration=4.0, speed=0.3)


@pytest.fixture(scope="session")
def hold_clip(desk):
    return constant_pose_clip(desk, duration=2.0)


@pytest.fixture(scope="session")
def turn_clip(desk):
    return turning_clip(desk, duration=4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_quat(rng, n=None):
    q = rng.normal(size=(4,) if n is None else (n, 4))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)
