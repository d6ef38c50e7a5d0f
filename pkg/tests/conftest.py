import numpy as np
import pytest
import torch

from crossmae.datagen import SceneGenConfig, generate_scene, scene_pairs
from crossmae.model import ModelConfig


@pytest.fixture(scope="session")
def scene():
    return generate_scene(SceneGenConfig(rows=2, cols=2, n_genotypes=2, n_replicates=2), seed=7)


@pytest.fixture(scope="session")
def pairs(scene):
    return scene_pairs(scene)


@pytest.fixture
def toy_cfg():
    # 16x16 images, 4x4 patches -> 16 tokens per modality
    return ModelConfig(
        image_size=16, patch_size=4, embed_dim=8, depth=1, heads=1, decoder_dim=8, decoder_depth=1, decoder_heads=1
    )


@pytest.fixture
def tiny_cfg():
    return ModelConfig(embed_dim=32, depth=1, heads=2, decoder_dim=32, decoder_depth=1, decoder_heads=2)


@pytest.fixture(autouse=True)
def _torch_threads():
    torch.set_num_threads(1)
    yield


def random_images(rng: np.random.Generator, n: int, size: int = 16, channels: int = 3) -> np.ndarray:
    return rng.random((n, size, size, channels))


def pytest_terminal_summary(terminalreporter):
    from _report import lines

    verdicts = lines()
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.write_line(line)
