"""Backward structure transfer: simplify a structure map to a text-like
coarse shape at a chosen level.

The smoothness block is a fixed separable Gaussian whose standard deviation
grows linearly with the scale parameter, sigma = 16*l + 8. A learned
transformation block then maps the smoothed image back to the crisp text
domain, so applying both to a structure map yields its "sketchy" version at
coarseness l. Training only needs text images; the result applies to any
style.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
from scipy.ndimage import correlate1d

from .backbone import (
    DiscriminatorConfig,
    Generator,
    GeneratorConfig,
    PatchDiscriminator,
    build_discriminator,
    build_generator,
    check_scale,
    generator_from_store,
    generator_meta,
    store_from_module,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import DivergenceError, FormatError, StateError
from .imageio import ImageGrid

F_SLOPE = 16.0
F_INTERCEPT = 8.0


def sigma_for(l) -> float:
    return F_SLOPE * check_scale(l) + F_INTERCEPT


def gaussian_kernel(l) -> np.ndarray:
    """1-D Gaussian at sigma = 16*l + 8, truncated at radius ceil(2*sigma),
    normalized to sum 1. Truncation at 2 sigma keeps >95% of the mass while
    capping cost at the largest scale.
    """
    sigma = sigma_for(l)
    radius = math.ceil(2.0 * sigma)
    i = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(i * i) / (2.0 * sigma * sigma))
    return k / k.sum()


def smooth_array(arr: np.ndarray, l) -> np.ndarray:
    """Separable Gaussian smoothing of a 2-D array with reflect padding."""
    k = gaussian_kernel(l)
    out = correlate1d(arr.astype(np.float64), k, axis=1, mode="reflect")
    out = correlate1d(out, k, axis=0, mode="reflect")
    return out


def smooth(x: ImageGrid, l) -> ImageGrid:
    if x.channels != 1:
        raise ValueError("smooth expects a single-channel grid")
    out = smooth_array(x.values[:, :, 0], l).astype(np.float32)
    return ImageGrid(np.clip(out, -1.0, 1.0)[:, :, None], x.tag)


def naive_sketch(x: ImageGrid, l, sharpness: float = 10.0) -> ImageGrid:
    """Diagnostic baseline: sigmoid-threshold the smoothed image instead of
    running the learned transformation block. Stays blob-shaped."""
    if x.channels != 1:
        raise ValueError("naive_sketch expects a single-channel grid")
    s = smooth_array(x.values[:, :, 0], l)
    out = 2.0 / (1.0 + np.exp(-sharpness * s)) - 1.0
    return ImageGrid(out.astype(np.float32)[:, :, None], x.tag)


def scale_channel_like(x: torch.Tensor, l: float) -> torch.Tensor:
    """Conditioning channel: constant 2*l - 1 with x's spatial shape."""
    return torch.full((x.shape[0], 1, x.shape[2], x.shape[3]), 2.0 * l - 1.0,
                      dtype=x.dtype, device=x.device)


class SketchModule(nn.Module):
    """Smoothness block + learned transformation block."""

    f_slope = F_SLOPE
    f_intercept = F_INTERCEPT

    def __init__(self, transform: Generator):
        super().__init__()
        if transform.cfg.in_channels != 2 or transform.cfg.out_channels != 1:
            raise ValueError("sketch transform must map 2 channels (image + scale) to 1")
        self.transform = transform

    @property
    def trained(self) -> bool:
        return self.transform.trained

    def forward_smoothed(self, smoothed: torch.Tensor, l: float) -> torch.Tensor:
        inp = torch.cat([smoothed, scale_channel_like(smoothed, l)], dim=1)
        return self.transform(inp)

    def apply(self, x: ImageGrid, l) -> ImageGrid:
        """Full sketch pass on a single-channel grid (evaluation mode)."""
        if not self.trained:
            raise StateError("sketch module is untrained; train or load a checkpoint")
        l = check_scale(l)
        if x.channels != 1:
            raise ValueError("sketch module expects a single-channel grid")
        smoothed = smooth_array(x.values[:, :, 0], l).astype(np.float32)
        t = torch.from_numpy(smoothed)[None, None]
        self.transform.eval()
        with torch.no_grad():
            out = self.forward_smoothed(t, l)
        return ImageGrid(out[0, 0].numpy()[:, :, None], x.tag)


def generate_sketchy_structure(module: SketchModule, x: ImageGrid, l) -> ImageGrid:
    """Coarse version of a structure map at level l: transform(smooth(x, l))."""
    return module.apply(x, l)


@dataclass
class SketchTrainConfig:
    steps: int = 20000
    batch_size: int = 1
    lr: float = 2e-4
    betas: tuple = (0.5, 0.999)
    base_width: int = 32
    n_resblocks: int = 6
    disc_layers: int = 3
    dropout_rate: float = 0.5
    lambda_rec: float = 100.0
    lambda_adv: float = 1.0
    seed: int = 0


def build_sketch_module(cfg: SketchTrainConfig) -> SketchModule:
    gen_cfg = GeneratorConfig(in_channels=2, out_channels=1, base_width=cfg.base_width,
                              n_resblocks=cfg.n_resblocks, controllable=False,
                              dropout_rate=cfg.dropout_rate)
    return SketchModule(build_generator(gen_cfg, seed=cfg.seed))


def sketch_losses(module: SketchModule, disc: PatchDiscriminator,
                  t: torch.Tensor, ls: np.ndarray):
    """Loss terms for one batch of text images ``t`` at scales ``ls``.

    rec   mean L1 between the sketch output and the original text
    adv_g least-squares generator term against the conditional critic
    adv_d critic term; the critic scores (candidate, scale channel, smoothed)

    Returns (terms dict, fake batch). Adversarial losses use least-squares
    targets 1/0; the min-max roles match the usual conditional setup.
    """
    if t.shape[0] != len(ls):
        raise ValueError("batch size mismatch between images and scales")
    smoothed = torch.stack([
        torch.from_numpy(smooth_array(t[i, 0].numpy(), float(ls[i])).astype(np.float32))
        for i in range(t.shape[0])
    ])[:, None]
    lch = torch.cat([scale_channel_like(smoothed[i:i + 1], float(ls[i]))
                     for i in range(t.shape[0])])
    fake = module.transform(torch.cat([smoothed, lch], dim=1))
    fake_cond = torch.cat([fake, lch, smoothed], dim=1)
    real_cond = torch.cat([t, lch, smoothed], dim=1)

    rec = (fake - t).abs().mean()
    score_fake = disc(fake_cond)
    adv_g = ((score_fake - 1.0) ** 2).mean()
    score_real = disc(real_cond)
    score_fake_d = disc(fake_cond.detach())
    adv_d = ((score_real - 1.0) ** 2).mean() + (score_fake_d ** 2).mean()
    return {"rec": rec, "adv_g": adv_g, "adv_d": adv_d}, fake


def train_sketch(dataset, cfg: SketchTrainConfig, log_every: int = 0):
    """Adversarial training of the transformation block on text images.

    Returns (module, history) where history holds one row per step with the
    raw loss terms. Aborts with DivergenceError on non-finite losses.
    """
    if len(dataset) == 0:
        raise ValueError("text dataset is empty")
    module = build_sketch_module(cfg)
    disc = build_discriminator(
        DiscriminatorConfig(in_channels=3, n_layers=cfg.disc_layers, base_width=cfg.base_width),
        seed=cfg.seed + 1,
    )
    opt_g = torch.optim.Adam(module.transform.parameters(), lr=cfg.lr, betas=cfg.betas)
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr, betas=cfg.betas)
    rng = np.random.default_rng(cfg.seed)
    module.train()
    disc.train()
    history = []
    for step in range(cfg.steps):
        idx = rng.integers(0, len(dataset), size=cfg.batch_size)
        t = torch.stack([torch.from_numpy(dataset[int(i)].values[:, :, 0]) for i in idx])[:, None]
        ls = rng.uniform(0.0, 1.0, size=cfg.batch_size)

        terms, _ = sketch_losses(module, disc, t, ls)

        # Generator first: its backward needs the critic's pre-step weights.
        opt_g.zero_grad()
        loss_g = cfg.lambda_adv * terms["adv_g"] + cfg.lambda_rec * terms["rec"]
        loss_g.backward()
        opt_g.step()

        opt_d.zero_grad()  # also clears grads the generator pass deposited
        terms["adv_d"].backward()
        opt_d.step()

        row = {"step": step, "rec": terms["rec"].item(),
               "adv_g": terms["adv_g"].item(), "adv_d": terms["adv_d"].item()}
        if not all(math.isfinite(v) for v in (row["rec"], row["adv_g"], row["adv_d"])):
            raise DivergenceError(f"non-finite sketch loss at step {step}: {row}")
        history.append(row)
        if log_every and step % log_every == 0:
            print(f"[sketch {step}] rec={row['rec']:.4f} adv_g={row['adv_g']:.4f} "
                  f"adv_d={row['adv_d']:.4f}")
    module.transform.trained = True
    module.eval()
    return module, history


def save_sketch(module: SketchModule, path, extra_meta: dict | None = None) -> None:
    meta = {"net": "sketch", "f_slope": F_SLOPE, "f_intercept": F_INTERCEPT}
    meta.update(generator_meta(module.transform.cfg))
    if extra_meta:
        meta.update(extra_meta)
    save_checkpoint(store_from_module(module.transform), meta, path)


def load_sketch(path) -> SketchModule:
    store, meta = load_checkpoint(path)
    if meta.get("net") != "sketch":
        raise FormatError(f"{path} is not a sketch checkpoint (net={meta.get('net')!r})")
    return SketchModule(generator_from_store(store, meta))
