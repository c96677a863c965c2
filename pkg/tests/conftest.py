"""Shared fixtures: the default synthetic dataset and shipped filter bank."""

import pytest

from ocutex.descriptors import Bsif, default_bank
from ocutex.synth import SynthSpec, generate


@pytest.fixture(scope="session")
def acceptance_dataset(tmp_path_factory):
    """Default generator output: 20 subjects per class, 3 images each,
    640x480, planted iris textures at 0.05 vs 0.25 cycles/pixel and field
    textures at 0.02 vs 0.05."""
    out = tmp_path_factory.mktemp("fixture_dataset")
    manifest = generate(SynthSpec(), out)
    return out, manifest


@pytest.fixture(scope="session")
def bsif8():
    return Bsif(default_bank())
