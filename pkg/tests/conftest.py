"""Shared fixtures: seeded generators, model configs, and a small generated dataset."""
from pathlib import Path

import numpy as np
import pytest

from guidenet.core import ops
from guidenet.models.config import GeneratorConfig, preset
from guidenet.services.data_generator import generate_dataset
from guidenet.services.dataset import MANIFEST_NAME, load_split, load_vocab


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-epoch or timing-sensitive test (deselect with -m 'not slow')")


# =============================================================================
# Randomness / configs
# =============================================================================

@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def tiny_config():
    return preset("tiny")


@pytest.fixture
def desk_config():
    return preset("desk")


@pytest.fixture
def flipped_conv(monkeypatch):
    """ops.conv2d whose backward returns negated gradients."""
    original = ops.conv2d

    def flipped(*args, **kwargs):
        out = original(*args, **kwargs)
        if out._node is not None:
            backward_fn = out._node.backward_fn
            out._node.backward_fn = lambda g: tuple(None if x is None else -x for x in backward_fn(g))
        return out

    monkeypatch.setattr(ops, "conv2d", flipped)


# =============================================================================
# Datasets
# =============================================================================

MICRO = GeneratorConfig(n_samples=40, image_size=32, seed=7)


@pytest.fixture(scope="session")
def micro_dataset(tmp_path_factory) -> Path:
    """40 samples of 32×32 (34 train / 6 test); treat as read-only."""
    out = tmp_path_factory.mktemp("micro")
    generate_dataset(MICRO, out)
    return out


@pytest.fixture(scope="session")
def micro_manifest(micro_dataset) -> Path:
    return micro_dataset / MANIFEST_NAME


@pytest.fixture(scope="session")
def micro_splits(micro_dataset, micro_manifest):
    """(train, test) SplitData for the tiny preset."""
    vocab = load_vocab(micro_dataset)
    seq = preset("tiny").max_seq_len
    return load_split(micro_manifest, "train", seq, vocab), load_split(micro_manifest, "test", seq, vocab)
