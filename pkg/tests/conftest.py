import numpy as np
import pytest
import torch

from vidbank.configs import BackboneConfig, MemoryConfig, SyntheticSpec, TrainConfig


@pytest.fixture
def tiny_backbone():
    return BackboneConfig(depth="tiny", input_size=32, block_len=5)


@pytest.fixture
def tiny_memory():
    return MemoryConfig(k=8)


@pytest.fixture
def tiny_train_config(tiny_backbone, tiny_memory):
    return TrainConfig(
        num_blocks=8, pred_steps=3, stride=1, batch_size=2,
        max_steps=5, val_every=2, checkpoint_every=5, seed=0,
        backbone=tiny_backbone, memory=tiny_memory)


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    """Small rgb+flow dataset shared by data-dependent tests."""
    from vidbank.data.synthetic import gen_synthetic

    out = tmp_path_factory.mktemp("synthetic")
    spec = SyntheticSpec(num_classes=3, clips_per_class=5, seed=97,
                         modalities=["rgb", "flow"])
    index_path = gen_synthetic(spec, str(out))
    return out, index_path, spec


def random_frames(rng: np.random.Generator, t=12, size=16):
    return rng.random((t, size, size, 3), dtype=np.float32)


@pytest.fixture(autouse=True)
def _reset_torch_determinism():
    yield
    torch.use_deterministic_algorithms(False)
