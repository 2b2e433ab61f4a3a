import numpy as np
import pytest

from stagelink import fixtures
from stagelink.bvh import parse_bvh
from stagelink.rigs import demo_avatar, device_skeleton, neutral_skeleton


@pytest.fixture(scope="session")
def neutral():
    return neutral_skeleton()


@pytest.fixture(scope="session")
def device_rig():
    return device_skeleton()


@pytest.fixture(scope="session")
def avatar_rig():
    return demo_avatar()


@pytest.fixture(scope="session")
def walk_clip():
    return parse_bvh(fixtures.make_walk_bvh(frames=240))


@pytest.fixture(scope="session")
def demo_assets(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("demo_assets")
    return fixtures.write_demo_assets(str(outdir))


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def random_unit_quat(rng, n=None):
    shape = (4,) if n is None else (n, 4)
    q = rng.normal(size=shape)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    return q / norm
