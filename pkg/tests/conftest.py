import numpy as np
import pytest
import torch

from fastnet_dehazing.data.scenes import generate_scene, write_scenes
from fastnet_dehazing.data.synthesis import SynthesisSpec, synthesize_dataset, synthesize_sample
from fastnet_dehazing.imaging.image_core import Image
from fastnet_dehazing.models.builder import build_preset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_image(rng):
    def make(height=16, width=16, channels=3):
        return Image(data=rng.uniform(0.0, 1.0, size=(height, width, channels)))

    return make


@pytest.fixture
def toy_fastnet():
    return build_preset("toy_fastnet", seed=0).double()


@pytest.fixture
def toy_dual():
    return build_preset("toy_dual_fastnet", seed=0).double()


@pytest.fixture
def overfit_sample():
    """One 64x64 procedural scene hazed with a fixed draw."""
    clean, depth = generate_scene(64, 64, seed=5)
    return synthesize_sample(clean, depth, A=0.8, beta=1.5, scene="overfit")


@pytest.fixture(scope="session")
def scene_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("scenes")
    return write_scenes(root, count=10, height=64, width=64, seed=3)


@pytest.fixture(scope="session")
def synthesized(tmp_path_factory, scene_dirs):
    """10 scenes x 4 variations with default ranges; returns (records, output dir)."""
    out = tmp_path_factory.mktemp("dataset")
    spec = SynthesisSpec(output_dir=out, seed=11)
    records = synthesize_dataset(*scene_dirs, spec)
    return records, out


@pytest.fixture(autouse=True)
def _restore_torch_state():
    threads = torch.get_num_threads()
    yield
    torch.set_num_threads(threads)
