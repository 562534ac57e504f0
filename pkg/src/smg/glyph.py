"""Forward structure transfer: train the controllable generator to map
sketchy structure maps back to the original, then deform arbitrary text.

Training follows a three-stage curriculum over the scale parameter: fixed at
1 to learn the greatest deformation, then {0, 1} after copying the trained
branch into the untrained one, then the grid {i/K}. Each step draws a fresh
co-located crop pair from the structure map and its sketchy version.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from scipy.ndimage import distance_transform_edt

from .backbone import (
    DiscriminatorConfig,
    Generator,
    GeneratorConfig,
    PatchDiscriminator,
    build_discriminator,
    build_generator,
    check_scale,
    copy_branch_params,
    generator_from_store,
    generator_meta,
    store_from_module,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import DivergenceError, FormatError, StateError
from .imageio import ImageGrid, StyleAsset, inject_noise, random_crop_pair
from .sketch import SketchModule, generate_sketchy_structure


@dataclass
class DistanceWeightMap:
    """Per-pixel legibility weights in [0, 1]: zero on text contours,
    growing with distance until saturating at the cap."""

    weights: np.ndarray
    cap: float


def _contour_mask(fg: np.ndarray) -> np.ndarray:
    """Pixels with a 4-neighbor of the opposite binary class."""
    edge = np.zeros_like(fg, dtype=bool)
    edge[:-1, :] |= fg[:-1, :] != fg[1:, :]
    edge[1:, :] |= fg[1:, :] != fg[:-1, :]
    edge[:, :-1] |= fg[:, :-1] != fg[:, 1:]
    edge[:, 1:] |= fg[:, 1:] != fg[:, :-1]
    return edge


def distance_weight_map(t: ImageGrid, cap: float | None = None) -> DistanceWeightMap:
    """Weight map for the legibility loss.

    Binarizes at 0, finds contour pixels, and assigns each pixel
    min(euclidean distance to the nearest contour pixel / cap, 1). A
    single-class image has no contour: every weight is 1 (nothing may
    deform). Default cap is 0.15 * min(H, W).
    """
    if t.channels != 1:
        raise ValueError("distance_weight_map expects a single-channel grid")
    v = t.values[:, :, 0]
    if cap is None:
        cap = 0.15 * min(v.shape)
    if cap <= 0:
        raise ValueError("cap must be positive")
    fg = v > 0
    contour = _contour_mask(fg)
    if not contour.any():
        return DistanceWeightMap(np.ones(v.shape, dtype=np.float32), float(cap))
    dist = distance_transform_edt(~contour)
    weights = np.minimum(dist / cap, 1.0).astype(np.float32)
    return DistanceWeightMap(weights, float(cap))


@dataclass
class GlyphTrainConfig:
    curriculum_k: int = 3
    steps_per_stage: int = 2000
    lambda_rec: float = 100.0
    lambda_adv: float = 0.1
    lambda_gly: float = 0.0
    lr: float = 2e-4
    betas: tuple = (0.5, 0.999)
    noise_std: float = 0.2
    crop_size: int = 256
    base_width: int = 32
    n_resblocks: int = 6
    disc_layers: int = 3
    dropout_rate: float = 0.5
    batch_size: int = 1
    seed: int = 0
    cache_sketchy: bool = True

    def __post_init__(self):
        if self.curriculum_k < 1:
            raise ValueError("curriculum K must be >= 1")
        for name in ("lambda_rec", "lambda_adv", "lambda_gly"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def glyph_losses(gen: Generator, disc: PatchDiscriminator,
                 x: torch.Tensor, x_sketchy: torch.Tensor, l: float,
                 t: torch.Tensor | None = None,
                 weights: torch.Tensor | None = None):
    """Loss terms for one step of forward-transfer training.

    rec   mean L1 between gen(x_sketchy, l) and the ground-truth crop x
    adv_* least-squares terms; the critic scores crops unconditionally
    gly   legibility term mean |(gen(t, l) - t) * weights|, computed on a
          separate noise-free pass; only evaluated when t is given

    ``x_sketchy`` is expected to be noise-injected by the caller.
    """
    fake = gen(x_sketchy, l)
    rec = (fake - x).abs().mean()
    adv_g = ((disc(fake) - 1.0) ** 2).mean()
    adv_d = ((disc(x) - 1.0) ** 2).mean() + (disc(fake.detach()) ** 2).mean()
    terms = {"rec": rec, "adv_g": adv_g, "adv_d": adv_d}
    if t is not None:
        if weights is None:
            raise ValueError("legibility term needs a weight map")
        if weights.shape[-2:] != t.shape[-2:]:
            raise ValueError(f"weight map {tuple(weights.shape[-2:])} does not match "
                             f"text {tuple(t.shape[-2:])}")
        out_t = gen(t, l)
        terms["gly"] = ((out_t - t).abs() * weights).mean()
    else:
        terms["gly"] = torch.zeros(())
    return terms, fake


def _to_tensor(grid: ImageGrid) -> torch.Tensor:
    return torch.from_numpy(grid.values[:, :, 0])[None, None]


def train_glyph(sketch_module: SketchModule, style: StyleAsset, dataset,
                cfg: GlyphTrainConfig, log_every: int = 0):
    """Three-stage curriculum training of the controllable generator.

    Returns (generator, history); history rows carry the stage index so the
    per-stage reconstruction trend can be inspected afterwards.
    """
    if not sketch_module.trained:
        raise StateError("glyph training needs a trained sketch module")
    x_full = style.structure
    if cfg.crop_size > min(x_full.height, x_full.width):
        raise ValueError("crop size exceeds the structure map")
    use_gly = cfg.lambda_gly > 0
    if use_gly and len(dataset) == 0:
        raise ValueError("legibility loss needs a text dataset")

    gen = build_generator(
        GeneratorConfig(in_channels=1, out_channels=1, base_width=cfg.base_width,
                        n_resblocks=cfg.n_resblocks, controllable=True,
                        dropout_rate=cfg.dropout_rate),
        seed=cfg.seed,
    )
    disc = build_discriminator(
        DiscriminatorConfig(in_channels=1, n_layers=cfg.disc_layers, base_width=cfg.base_width),
        seed=cfg.seed + 1,
    )
    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.lr, betas=cfg.betas)
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr, betas=cfg.betas)
    rng = np.random.default_rng(cfg.seed)

    k = cfg.curriculum_k
    stages = [
        (1, [1.0]),
        (2, [0.0, 1.0]),
        (3, [i / k for i in range(k + 1)]),
    ]
    sketchy_cache: dict[float, ImageGrid] = {}

    def sketchy_for(l: float) -> ImageGrid:
        if cfg.cache_sketchy and l in sketchy_cache:
            return sketchy_cache[l]
        out = generate_sketchy_structure(sketch_module, x_full, l)
        if cfg.cache_sketchy:
            sketchy_cache[l] = out
        return out

    history = []
    gen.train()
    disc.train()
    for stage, grid in stages:
        if stage == 2:
            copy_branch_params(gen)
        for step in range(cfg.steps_per_stage):
            l = float(grid[int(rng.integers(0, len(grid)))])
            x_crop, sk_crop = random_crop_pair(x_full, sketchy_for(l), cfg.crop_size, rng)
            sk_noisy = inject_noise(sk_crop, cfg.noise_std, rng)
            x_t = _to_tensor(x_crop)
            sk_t = _to_tensor(sk_noisy)
            t_t = w_t = None
            if use_gly:
                sample = dataset[int(rng.integers(0, len(dataset)))]
                if min(sample.height, sample.width) > cfg.crop_size:
                    sample, _ = random_crop_pair(sample, sample, cfg.crop_size, rng)
                t_t = _to_tensor(sample)
                w_t = torch.from_numpy(distance_weight_map(sample).weights)[None, None]

            terms, _ = glyph_losses(gen, disc, x_t, sk_t, l, t_t, w_t)

            # Generator first: its backward needs the critic's pre-step weights.
            opt_g.zero_grad()
            loss_g = (cfg.lambda_adv * terms["adv_g"] + cfg.lambda_rec * terms["rec"]
                      + cfg.lambda_gly * terms["gly"])
            loss_g.backward()
            opt_g.step()

            opt_d.zero_grad()  # also clears grads the generator pass deposited
            terms["adv_d"].backward()
            opt_d.step()

            row = {"stage": stage, "step": step, "l": l,
                   "rec": terms["rec"].item(), "adv_g": terms["adv_g"].item(),
                   "adv_d": terms["adv_d"].item(), "gly": terms["gly"].item()}
            if not all(math.isfinite(row[k2]) for k2 in ("rec", "adv_g", "adv_d", "gly")):
                raise DivergenceError(f"non-finite glyph loss at stage {stage} step {step}: {row}")
            history.append(row)
            if log_every and step % log_every == 0:
                print(f"[glyph s{stage} {step}] l={l:.2f} rec={row['rec']:.4f} "
                      f"adv_g={row['adv_g']:.4f} adv_d={row['adv_d']:.4f}")
    gen.trained = True
    gen.eval()
    return gen, history


def transfer_structure(gen: Generator, text: ImageGrid, l, seed: int = 0,
                       noise_std: float = 0.2) -> ImageGrid:
    """Deform a text image at level l: one feed-forward pass over the
    noise-injected input. Deterministic for a fixed seed."""
    l = check_scale(l)
    if not gen.trained:
        raise StateError("structure generator is untrained")
    if text.channels != 1:
        raise ValueError("transfer_structure expects a single-channel grid")
    noisy = inject_noise(text, noise_std, np.random.default_rng(seed))
    gen.eval()
    with torch.no_grad():
        out = gen(_to_tensor(noisy), l)
    return ImageGrid(out[0, 0].numpy()[:, :, None], "structure")


def save_glyph(gen: Generator, path, extra_meta: dict | None = None) -> None:
    meta = {"net": "glyph"}
    meta.update(generator_meta(gen.cfg))
    if extra_meta:
        meta.update(extra_meta)
    save_checkpoint(store_from_module(gen), meta, path)


def load_glyph(path):
    """Load a glyph checkpoint; returns (generator, metadata)."""
    store, meta = load_checkpoint(path)
    if meta.get("net") != "glyph":
        raise FormatError(f"{path} is not a glyph checkpoint (net={meta.get('net')!r})")
    return generator_from_store(store, meta), meta
