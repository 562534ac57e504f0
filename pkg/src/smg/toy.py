"""Synthetic 64x64 style and glyph fixtures plus desk-scale training
presets. Used by the verification suite and handy for trying the pipeline
without real assets (a full toy training run takes minutes, not hours)."""

from __future__ import annotations

import numpy as np

from .glyph import GlyphTrainConfig
from .imageio import ImageGrid, StyleAsset, TextDataset, build_text_dataset
from .pipeline import StyleTrainConfig
from .sketch import SketchTrainConfig
from .texture import TextureTrainConfig

TOY_SIZE = 64


def make_toy_structure(size: int = TOY_SIZE) -> ImageGrid:
    """Soft-edged filled circle, the toy style subject."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32)
    cx = cy = (size - 1) / 2.0
    r = np.hypot(xx - cx, yy - cy)
    radius = 0.36 * size
    edge = 1.5
    v = np.clip((radius - r) / edge, -1.0, 1.0)
    return ImageGrid(v[:, :, None], "structure")


def make_toy_style(size: int = TOY_SIZE, name: str = "toy-circle") -> StyleAsset:
    """Circle structure map with a bright sinusoidal texture inside and a
    dark constant background, separable by luminance sign."""
    structure = make_toy_structure(size)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32) / size
    fg = np.stack([
        0.55 + 0.40 * np.sin(2 * np.pi * 3.0 * yy),
        0.55 + 0.40 * np.sin(2 * np.pi * 3.0 * xx + 1.3),
        0.45 + 0.35 * np.sin(2 * np.pi * 2.0 * (xx + yy) + 0.7),
    ], axis=-1)
    bg = np.broadcast_to(np.array([-0.75, -0.70, -0.60], dtype=np.float32), fg.shape)
    mask01 = (structure.values + 1.0) / 2.0
    values = (mask01 * fg + (1.0 - mask01) * bg).astype(np.float32)
    style = ImageGrid(np.clip(values, -1.0, 1.0), "style")
    return StyleAsset(name=name, style=style, structure=structure)


def make_toy_text(size: int = TOY_SIZE) -> ImageGrid:
    """Thick cross glyph: two overlapping bars, plenty of trunk to preserve."""
    v = np.full((size, size), -1.0, dtype=np.float32)
    bar = max(3, size // 4)
    c = size // 2
    lo, hi = int(0.18 * size), int(0.82 * size)
    v[c - bar // 2:c + bar // 2 + 1, lo:hi] = 1.0
    v[lo:hi, c - bar // 2:c + bar // 2 + 1] = 1.0
    return ImageGrid(v[:, :, None], "text")


def make_toy_dataset(count: int = 32, seed: int = 7, size: int = TOY_SIZE) -> TextDataset:
    """Procedural stroke dataset at toy resolution (no fonts involved)."""
    return build_text_dataset(font_dirs=None, count=count, seed=seed, size=size)


def toy_train_config(steps: int = 2000, seed: int = 0,
                     lambda_gly: float = 0.0) -> StyleTrainConfig:
    width, blocks, disc_layers, crop = 16, 3, 2, TOY_SIZE
    # Sketch stage: heavy smoothing at 64px makes reconstruction the hardest
    # part of the desk-scale run; small batches and no dropout are needed to
    # converge within the step budget.
    return StyleTrainConfig(
        sketch=SketchTrainConfig(steps=steps, base_width=width, n_resblocks=blocks,
                                 disc_layers=disc_layers, batch_size=6,
                                 dropout_rate=0.0, seed=seed),
        glyph=GlyphTrainConfig(steps_per_stage=steps, crop_size=crop, base_width=width,
                               n_resblocks=blocks, disc_layers=disc_layers,
                               lambda_gly=lambda_gly, seed=seed + 1),
        texture=TextureTrainConfig(steps=steps, crop_size=crop, base_width=width,
                                   n_resblocks=blocks, disc_layers=disc_layers,
                                   seed=seed + 2),
    )
