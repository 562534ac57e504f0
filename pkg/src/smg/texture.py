"""Texture rendering: map structure maps to the style image's texture.

The style statistics are Gram matrices of a fixed (non-trained) convolutional
pyramid tapped at the first activation of each of its first four blocks, with
equal per-layer weights. The default pyramid carries deterministic seeded
random weights so nothing has to be downloaded; the same topology can be
filled from a pretrained 16-layer classification network when its weights are
available locally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .backbone import (
    DiscriminatorConfig,
    Generator,
    GeneratorConfig,
    PatchDiscriminator,
    build_discriminator,
    build_generator,
    generator_from_store,
    generator_meta,
    store_from_module,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import DivergenceError, FormatError, StateError
from .imageio import ImageGrid, StyleAsset, inject_noise, random_crop_pair

# Per-block conv plans of the 16-layer topology, up to the fourth tap.
_BLOCK_PLAN = (
    ((3, 64), (64, 64)),
    ((64, 128), (128, 128)),
    ((128, 256), (256, 256), (256, 256)),
    ((256, 512),),
)


class FeatureExtractor(nn.Module):
    """Frozen convolutional pyramid; forward returns the four tap features."""

    def __init__(self, normalize_imagenet: bool = False):
        super().__init__()
        self.blocks = nn.ModuleList()
        for plan in _BLOCK_PLAN:
            self.blocks.append(nn.ModuleList([nn.Conv2d(i, o, 3, 1, 1) for i, o in plan]))
        self.normalize_imagenet = normalize_imagenet
        self.tap_weights = [1.0 / len(_BLOCK_PLAN)] * len(_BLOCK_PLAN)
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def forward(self, x):
        if x.shape[1] != 3:
            raise ValueError("feature extractor expects 3-channel input")
        if self.normalize_imagenet:
            x = (x + 1.0) / 2.0
            mean = x.new_tensor([0.485, 0.456, 0.406])[None, :, None, None]
            std = x.new_tensor([0.229, 0.224, 0.225])[None, :, None, None]
            x = (x - mean) / std
        taps = []
        h = x
        for bi, block in enumerate(self.blocks):
            for ci, conv in enumerate(block):
                h = F.relu(conv(h))
                if ci == 0:
                    taps.append(h)
            if bi < len(self.blocks) - 1:
                h = F.max_pool2d(h, 2)
        return taps

    @classmethod
    def seeded_random(cls, seed: int = 0) -> "FeatureExtractor":
        torch.manual_seed(seed)
        phi = cls(normalize_imagenet=False)
        for m in phi.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, nonlinearity="relu")
                nn.init.zeros_(m.bias)
        for p in phi.parameters():
            p.requires_grad_(False)
        return phi

    @classmethod
    def pretrained(cls) -> "FeatureExtractor":
        try:
            from torchvision.models import VGG16_Weights, vgg16

            src = vgg16(weights=VGG16_Weights.IMAGENET1K_V1).features
        except Exception as exc:
            raise StateError(f"pretrained feature weights unavailable: {exc}") from exc
        phi = cls(normalize_imagenet=True)
        src_convs = [m for m in src if isinstance(m, nn.Conv2d)]
        dst_convs = [c for block in phi.blocks for c in block]
        with torch.no_grad():
            for dst, srcc in zip(dst_convs, src_convs):
                dst.weight.copy_(srcc.weight)
                dst.bias.copy_(srcc.bias)
        for p in phi.parameters():
            p.requires_grad_(False)
        return phi


def build_feature_extractor(source: str = "random", seed: int = 0) -> FeatureExtractor:
    if source == "random":
        return FeatureExtractor.seeded_random(seed)
    if source == "pretrained":
        return FeatureExtractor.pretrained()
    raise ValueError(f"unknown feature source {source!r}")


def gram_matrix(feat: torch.Tensor) -> torch.Tensor:
    """Channel correlation matrix G[i,j] = sum_hw F[i] F[j] / (C*H*W).

    Accepts (C, H, W) or (B, C, H, W); symmetric positive semidefinite.
    """
    squeeze = feat.dim() == 3
    if squeeze:
        feat = feat[None]
    b, c, h, w = feat.shape
    if c == 0 or h * w == 0:
        raise ValueError("gram_matrix needs a nonempty feature map")
    flat = feat.reshape(b, c, h * w)
    g = torch.bmm(flat, flat.transpose(1, 2)) / (c * h * w)
    return g[0] if squeeze else g


def grams_of(phi: FeatureExtractor, x: torch.Tensor):
    return [gram_matrix(f) for f in phi(x)]


def style_loss_from_grams(grams, target_grams, weights) -> torch.Tensor:
    loss = None
    for g, tg, w in zip(grams, target_grams, weights):
        term = w * ((g - tg) ** 2).mean()
        loss = term if loss is None else loss + term
    return loss


def style_loss(gen: ImageGrid, style_image: ImageGrid, phi: FeatureExtractor) -> float:
    """Weighted sum over taps of the mean squared Gram difference."""
    if gen.channels != 3 or style_image.channels != 3:
        raise ValueError("style_loss expects 3-channel grids")
    a = torch.from_numpy(gen.values).permute(2, 0, 1)[None]
    b = torch.from_numpy(style_image.values).permute(2, 0, 1)[None]
    with torch.no_grad():
        loss = style_loss_from_grams(grams_of(phi, a), grams_of(phi, b), phi.tap_weights)
    return float(loss)


@dataclass
class TextureTrainConfig:
    steps: int = 20000
    lr: float = 2e-4
    betas: tuple = (0.5, 0.999)
    lambda_rec: float = 100.0
    lambda_adv: float = 1.0
    lambda_style: float = 0.01
    noise_std: float = 0.2
    crop_size: int = 256
    base_width: int = 32
    n_resblocks: int = 6
    disc_layers: int = 3
    dropout_rate: float = 0.5
    curriculum_k: int = 3
    feature_source: str = "random"
    feature_seed: int = 0
    seed: int = 0


def texture_losses(gen: Generator, disc: PatchDiscriminator,
                   x: torch.Tensor, y: torch.Tensor,
                   x_noisy: torch.Tensor | None = None,
                   styled_input: torch.Tensor | None = None,
                   target_grams=None, phi: FeatureExtractor | None = None):
    """Loss terms for one texture-training step.

    rec    mean L1 between gen(x) and the co-located style crop y
    adv_*  least-squares terms; the critic is conditioned on x, scoring
           (x, y) against (x, gen(x))
    style  Gram loss of gen(styled_input) against the precomputed targets,
           skipped (zero) when styled_input is None

    ``x_noisy`` is the generator's (noise-injected) input; the critic sees
    the clean condition x.
    """
    if x.shape[-2:] != y.shape[-2:]:
        raise ValueError("structure/style crops are misaligned")
    fake = gen(x if x_noisy is None else x_noisy)
    rec = (fake - y).abs().mean()
    adv_g = ((disc(torch.cat([x, fake], dim=1)) - 1.0) ** 2).mean()
    adv_d = (((disc(torch.cat([x, y], dim=1)) - 1.0) ** 2).mean()
             + (disc(torch.cat([x, fake.detach()], dim=1)) ** 2).mean())
    terms = {"rec": rec, "adv_g": adv_g, "adv_d": adv_d}
    if styled_input is not None:
        styled = gen(styled_input)
        terms["style"] = style_loss_from_grams(grams_of(phi, styled), target_grams,
                                               phi.tap_weights)
    else:
        terms["style"] = torch.zeros(())
    return terms, fake


def _noise_t(x: torch.Tensor, std: float, rng: np.random.Generator) -> torch.Tensor:
    if std == 0:
        return x
    n = torch.from_numpy(rng.normal(0.0, std, size=tuple(x.shape)).astype(np.float32))
    return (x + n).clamp(-1.0, 1.0)


def train_texture(style: StyleAsset, glyph_gen: Generator, dataset,
                  cfg: TextureTrainConfig, log_every: int = 0):
    """Adversarial texture training on random crop pairs of (X, Y).

    The style term feeds a structure-transferred text sample through the
    generator so rendering quality off the training crops is optimized too;
    its scale parameter is drawn from the glyph curriculum's final grid.
    """
    if cfg.crop_size > min(style.structure.height, style.structure.width):
        raise ValueError("crop size exceeds the style image")
    use_style = cfg.lambda_style > 0
    if use_style and not glyph_gen.trained:
        raise StateError("texture style term needs a trained glyph generator")
    if use_style and len(dataset) == 0:
        raise ValueError("texture style term needs a text dataset")

    gen = build_generator(
        GeneratorConfig(in_channels=1, out_channels=3, base_width=cfg.base_width,
                        n_resblocks=cfg.n_resblocks, controllable=False,
                        dropout_rate=cfg.dropout_rate),
        seed=cfg.seed,
    )
    disc = build_discriminator(
        DiscriminatorConfig(in_channels=4, n_layers=cfg.disc_layers, base_width=cfg.base_width),
        seed=cfg.seed + 1,
    )
    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.lr, betas=cfg.betas)
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr, betas=cfg.betas)
    rng = np.random.default_rng(cfg.seed)

    phi = target_grams = None
    l_grid = [i / cfg.curriculum_k for i in range(cfg.curriculum_k + 1)]
    if use_style:
        phi = build_feature_extractor(cfg.feature_source, cfg.feature_seed)
        y_full = torch.from_numpy(style.style.values).permute(2, 0, 1)[None]
        with torch.no_grad():
            target_grams = grams_of(phi, y_full)

    history = []
    gen.train()
    disc.train()
    glyph_gen.eval()
    for step in range(cfg.steps):
        x_crop, y_crop = random_crop_pair(style.structure, style.style, cfg.crop_size, rng)
        x_t = torch.from_numpy(x_crop.values[:, :, 0])[None, None]
        y_t = torch.from_numpy(y_crop.values).permute(2, 0, 1)[None]
        x_noisy = _noise_t(x_t, cfg.noise_std, rng)

        styled_input = None
        if use_style:
            sample = dataset[int(rng.integers(0, len(dataset)))]
            if min(sample.height, sample.width) > cfg.crop_size:
                sample, _ = random_crop_pair(sample, sample, cfg.crop_size, rng)
            t_t = torch.from_numpy(sample.values[:, :, 0])[None, None]
            l = float(l_grid[int(rng.integers(0, len(l_grid)))])
            with torch.no_grad():
                struct = glyph_gen(_noise_t(t_t, cfg.noise_std, rng), l)
            styled_input = _noise_t(struct, cfg.noise_std, rng)

        terms, _ = texture_losses(gen, disc, x_t, y_t, x_noisy,
                                  styled_input, target_grams, phi)

        # Generator first: its backward needs the critic's pre-step weights.
        opt_g.zero_grad()
        loss_g = (cfg.lambda_adv * terms["adv_g"] + cfg.lambda_rec * terms["rec"]
                  + cfg.lambda_style * terms["style"])
        loss_g.backward()
        opt_g.step()

        opt_d.zero_grad()  # also clears grads the generator pass deposited
        terms["adv_d"].backward()
        opt_d.step()

        row = {"step": step, "rec": terms["rec"].item(), "adv_g": terms["adv_g"].item(),
               "adv_d": terms["adv_d"].item(), "style": terms["style"].item()}
        if not all(math.isfinite(row[k]) for k in ("rec", "adv_g", "adv_d", "style")):
            raise DivergenceError(f"non-finite texture loss at step {step}: {row}")
        history.append(row)
        if log_every and step % log_every == 0:
            print(f"[texture {step}] rec={row['rec']:.4f} adv_g={row['adv_g']:.4f} "
                  f"adv_d={row['adv_d']:.4f} style={row['style']:.5f}")
    gen.trained = True
    gen.eval()
    return gen, history


def render_texture(gen: Generator, structure: ImageGrid, seed: int = 0,
                   noise_std: float = 0.2) -> ImageGrid:
    """Render the learned texture on a structure-transferred image; one
    feed-forward pass. Different seeds give diversified textures."""
    if not gen.trained:
        raise StateError("texture generator is untrained")
    if structure.channels != 1:
        raise ValueError("render_texture expects a single-channel grid")
    noisy = inject_noise(structure, noise_std, np.random.default_rng(seed))
    gen.eval()
    with torch.no_grad():
        out = gen(torch.from_numpy(noisy.values[:, :, 0])[None, None])
    return ImageGrid(out[0].permute(1, 2, 0).numpy(), "output")


def save_texture(gen: Generator, path, extra_meta: dict | None = None) -> None:
    meta = {"net": "texture"}
    meta.update(generator_meta(gen.cfg))
    if extra_meta:
        meta.update(extra_meta)
    save_checkpoint(store_from_module(gen), meta, path)


def load_texture(path):
    """Load a texture checkpoint; returns (generator, metadata)."""
    store, meta = load_checkpoint(path)
    if meta.get("net") != "texture":
        raise FormatError(f"{path} is not a texture checkpoint (net={meta.get('net')!r})")
    return generator_from_store(store, meta), meta
