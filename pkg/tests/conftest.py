import numpy as np
import pytest
import torch
from hypothesis import settings

from smg import toy
from smg.pipeline import train_style

settings.register_profile("ci", deadline=None, max_examples=50)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy_assets():
    return {
        "style": toy.make_toy_style(),
        "text": toy.make_toy_text(),
        "dataset": toy.make_toy_dataset(count=12),
    }


@pytest.fixture(scope="session")
def zero_step_styles_dir(tmp_path_factory, toy_assets):
    """Styles directory holding untrained (zero-step) toy bundles; fast to
    build, exercises all of the plumbing."""
    out = tmp_path_factory.mktemp("styles")
    cfg = toy.toy_train_config(steps=0)
    train_style(toy_assets["style"], toy_assets["dataset"], cfg, out, name="alpha")
    train_style(toy_assets["style"], toy_assets["dataset"], cfg, out, name="beta")
    return out


def random_grid(rng, h, w, c=1, tag="text"):
    from smg.imageio import ImageGrid

    return ImageGrid(rng.uniform(-1, 1, size=(h, w, c)).astype(np.float32), tag)


@pytest.fixture
def tiny_gen():
    from smg.backbone import GeneratorConfig, build_generator

    return build_generator(
        GeneratorConfig(in_channels=1, out_channels=1, base_width=4, n_resblocks=1),
        seed=7,
    )


def tensor_of(grid):
    return torch.from_numpy(grid.values[:, :, 0])[None, None]
