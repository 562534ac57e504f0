"""Network topologies: encoder-decoder generators (plain or controllable
residual blocks), patch discriminators, parameter-store bridging, and the
branch-copy operation used by the staged curriculum.

The encoder is one 7x7 stride-1 conv plus two 3x3 stride-2 convs; the decoder
mirrors it with two nearest-neighbor-upsample+conv stages and a final 7x7
conv with tanh. Upsample+conv (instead of transposed conv) suppresses
checkerboard artifacts. Normalization is per-instance; generators use ReLU,
discriminators LeakyReLU(0.2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .checkpoint import ParamStore


@dataclass
class GeneratorConfig:
    in_channels: int = 1
    out_channels: int = 1
    base_width: int = 32
    n_resblocks: int = 6
    controllable: bool = False
    dropout_rate: float = 0.5

    def __post_init__(self):
        if self.n_resblocks < 1:
            raise ValueError("n_resblocks must be >= 1")
        if not (0 <= self.dropout_rate < 1):
            raise ValueError("dropout_rate must be in [0, 1)")


@dataclass
class DiscriminatorConfig:
    in_channels: int = 1
    n_layers: int = 3
    base_width: int = 32


def check_scale(l) -> float:
    l = float(l)
    if not (0.0 <= l <= 1.0):
        raise ValueError(f"scale parameter must be in [0, 1], got {l}")
    return l


def _norm(c):
    return nn.InstanceNorm2d(c, affine=True)


def _residual_fn(channels: int, dropout_rate: float) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(channels, channels, 3, 1, 1),
        _norm(channels),
        nn.ReLU(inplace=True),
        nn.Dropout(dropout_rate),
        nn.Conv2d(channels, channels, 3, 1, 1),
        _norm(channels),
    )


class ResidualBlock(nn.Module):
    def __init__(self, channels: int, dropout_rate: float = 0.5):
        super().__init__()
        self.fn = _residual_fn(channels, dropout_rate)

    def forward(self, x):
        return x + self.fn(x)


class ControllableResBlock(nn.Module):
    """Residual block blending two residual functions by the scale parameter:
    x + l*F1(x) + (1-l)*F0(x). Both branches share shapes so parameters can
    be copied between them.
    """

    def __init__(self, channels: int, dropout_rate: float = 0.5):
        super().__init__()
        self.branch_max = _residual_fn(channels, dropout_rate)
        self.branch_min = _residual_fn(channels, dropout_rate)

    def forward(self, x, l):
        l = check_scale(l)
        return x + l * self.branch_max(x) + (1.0 - l) * self.branch_min(x)


class Generator(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        w = cfg.base_width
        self.encoder = nn.Sequential(
            nn.Conv2d(cfg.in_channels, w, 7, 1, 3),
            _norm(w),
            nn.ReLU(inplace=True),
            nn.Conv2d(w, 2 * w, 3, 2, 1),
            _norm(2 * w),
            nn.ReLU(inplace=True),
            nn.Conv2d(2 * w, 4 * w, 3, 2, 1),
            _norm(4 * w),
            nn.ReLU(inplace=True),
        )
        block = ControllableResBlock if cfg.controllable else ResidualBlock
        self.blocks = nn.ModuleList(
            [block(4 * w, cfg.dropout_rate) for _ in range(cfg.n_resblocks)]
        )
        self.decoder = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(4 * w, 2 * w, 3, 1, 1),
            _norm(2 * w),
            nn.ReLU(inplace=True),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(2 * w, w, 3, 1, 1),
            _norm(w),
            nn.ReLU(inplace=True),
            nn.Conv2d(w, cfg.out_channels, 7, 1, 3),
            nn.Tanh(),
        )
        # Set by training/checkpoint loading; raw constructions are untrained.
        self.trained = False
        # Forward-pass counter; lets callers assert single-pass inference.
        self.forward_calls = 0

    def forward(self, x, l=None):
        if x.shape[1] != self.cfg.in_channels:
            raise ValueError(f"expected {self.cfg.in_channels} input channels, got {x.shape[1]}")
        if x.shape[2] % 4 or x.shape[3] % 4:
            raise ValueError(f"spatial dims must be divisible by 4, got {tuple(x.shape[2:])}")
        if self.cfg.controllable:
            if l is None:
                raise ValueError("controllable generator needs a scale parameter")
            l = check_scale(l)
        elif l is not None:
            raise ValueError("scale parameter given to a non-controllable generator")
        self.forward_calls += 1
        h = self.encoder(x)
        for block in self.blocks:
            h = block(h, l) if self.cfg.controllable else block(h)
        return self.decoder(h)


class PatchDiscriminator(nn.Module):
    """Patch critic: ``n_layers`` stride-2 convs, one stride-1 widening conv,
    then a 1-channel score map of raw (unsquashed) values.
    """

    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.cfg = cfg
        w = cfg.base_width
        layers = [nn.Conv2d(cfg.in_channels, w, 4, 2, 1), nn.LeakyReLU(0.2, inplace=True)]
        c = w
        for _ in range(cfg.n_layers - 1):
            layers += [nn.Conv2d(c, 2 * c, 4, 2, 1), _norm(2 * c), nn.LeakyReLU(0.2, inplace=True)]
            c *= 2
        layers += [nn.Conv2d(c, 2 * c, 4, 1, 1), _norm(2 * c), nn.LeakyReLU(0.2, inplace=True)]
        layers += [nn.Conv2d(2 * c, 1, 4, 1, 1)]
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        if x.shape[1] != self.cfg.in_channels:
            raise ValueError(f"expected {self.cfg.in_channels} input channels, got {x.shape[1]}")
        return self.net(x)


def init_weights(module: nn.Module, std: float = 0.02) -> None:
    """GAN-style init: conv weights ~ N(0, std), norms at identity."""
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.normal_(m.weight, 0.0, std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.InstanceNorm2d) and m.affine:
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


def build_generator(cfg: GeneratorConfig, seed: int = 0) -> Generator:
    torch.manual_seed(seed)
    gen = Generator(cfg)
    init_weights(gen)
    return gen


def build_discriminator(cfg: DiscriminatorConfig, seed: int = 0) -> PatchDiscriminator:
    torch.manual_seed(seed)
    disc = PatchDiscriminator(cfg)
    init_weights(disc)
    return disc


def copy_branch_params(gen: Generator) -> None:
    """Overwrite every controllable block's min branch with the max branch."""
    if not gen.cfg.controllable:
        raise ValueError("copy_branch_params needs a controllable generator")
    with torch.no_grad():
        for block in gen.blocks:
            block.branch_min.load_state_dict(block.branch_max.state_dict())


def store_from_module(module: nn.Module) -> ParamStore:
    store = ParamStore()
    for name, tensor in module.state_dict().items():
        store.add(name, tensor.detach().cpu().numpy())
    return store


def load_module_from_store(module: nn.Module, store: ParamStore) -> None:
    state = {name: torch.from_numpy(np.array(arr)) for name, arr in store.items()}
    module.load_state_dict(state, strict=True)


def generator_meta(cfg: GeneratorConfig) -> dict:
    return {
        "in_channels": cfg.in_channels,
        "out_channels": cfg.out_channels,
        "base_width": cfg.base_width,
        "n_resblocks": cfg.n_resblocks,
        "controllable": int(cfg.controllable),
        "dropout_rate": cfg.dropout_rate,
    }


def generator_config_from_meta(meta: dict) -> GeneratorConfig:
    try:
        return GeneratorConfig(
            in_channels=int(meta["in_channels"]),
            out_channels=int(meta["out_channels"]),
            base_width=int(meta["base_width"]),
            n_resblocks=int(meta["n_resblocks"]),
            controllable=bool(int(meta["controllable"])),
            dropout_rate=float(meta["dropout_rate"]),
        )
    except KeyError as exc:
        from .errors import FormatError

        raise FormatError(f"checkpoint metadata missing {exc}") from exc


def generator_from_store(store: ParamStore, meta: dict) -> Generator:
    gen = Generator(generator_config_from_meta(meta))
    load_module_from_store(gen, store)
    gen.trained = True
    gen.eval()
    return gen
