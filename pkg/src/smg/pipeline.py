"""End-to-end orchestration: per-style training, bundle management, the
two-pass stylization, animation schedules, and structure/texture mash-ups.

A trained style lives in a bundle directory::

    styles/<name>/
        glyph.smg1      controllable structure-transfer generator
        texture.smg1    texture renderer
        manifest        key=value text (versions, weights, hashes)
        history.csv     per-step training losses, all phases
        curves.png      loss curves rendered from history.csv

The sketch module is style-independent and shared; bundles record which
checkpoint they were trained against.
"""

from __future__ import annotations

import datetime as _dt
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from .backbone import Generator, check_scale
from .checkpoint import format_metadata, parse_metadata, sha256_file
from .errors import FormatError, StateError
from .glyph import GlyphTrainConfig, load_glyph, save_glyph, train_glyph, transfer_structure
from .imageio import ImageGrid, StyleAsset, save_image
from .sketch import SketchModule, SketchTrainConfig, load_sketch, save_sketch, train_sketch
from .texture import TextureTrainConfig, load_texture, render_texture, save_texture, train_texture

MANIFEST_NAME = "manifest"
GLYPH_NAME = "glyph.smg1"
TEXTURE_NAME = "texture.smg1"
SKETCH_NAME = "sketch.smg1"
FORMAT_VERSION = "1"


@dataclass
class StyleTrainConfig:
    sketch: SketchTrainConfig = field(default_factory=SketchTrainConfig)
    glyph: GlyphTrainConfig = field(default_factory=GlyphTrainConfig)
    texture: TextureTrainConfig = field(default_factory=TextureTrainConfig)


@dataclass
class StyleModelBundle:
    name: str
    glyph_gen: Generator
    texture_gen: Generator
    manifest: dict
    path: Path | None = None

    @property
    def noise_std(self) -> float:
        return float(self.manifest.get("noise_std", 0.2))


@dataclass
class RenderRequest:
    text: ImageGrid
    l: float
    seed: int = 0
    style: str | None = None
    # Mash-up requests name two styles instead of one.
    glyph_style: str | None = None
    texture_style: str | None = None

    def __post_init__(self):
        self.l = check_scale(self.l)


class _BundleLock:
    """Single-writer guard on a bundle directory."""

    def __init__(self, bundle_dir: Path):
        self.path = bundle_dir / ".lock"

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise StateError(f"bundle {self.path.parent} is locked by another training run")
        os.close(fd)
        return self

    def __exit__(self, *exc):
        self.path.unlink(missing_ok=True)
        return False


def _stage(name: str):
    """Re-raise stage failures with the failing stage named."""
    import contextlib

    @contextlib.contextmanager
    def ctx():
        try:
            yield
        except Exception as exc:
            exc.args = (f"[{name} stage] {exc}",)
            raise

    return ctx()


def ensure_sketch(dataset, cfg: SketchTrainConfig, path, log_every: int = 0) -> SketchModule:
    """Load the shared sketch checkpoint, training and saving it if absent."""
    path = Path(path)
    if path.exists():
        return load_sketch(path)
    with _stage("sketch"):
        module, history = train_sketch(dataset, cfg, log_every=log_every)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_sketch(module, path)
    from .report import write_history_csv

    write_history_csv([{"phase": "sketch", **row} for row in history],
                      path.with_suffix(".history.csv"))
    return module


def train_style(style: StyleAsset, dataset, cfg: StyleTrainConfig, out_dir,
                name: str | None = None, sketch_path=None, log_every: int = 0) -> StyleModelBundle:
    """Run the full per-style pipeline and emit a bundle directory.

    The sketch stage is skipped when its checkpoint already exists; glyph and
    texture training always run. Histories of all phases are merged into the
    bundle's history.csv and plotted to curves.png.
    """
    name = name or style.name
    out_dir = Path(out_dir)
    bundle_dir = out_dir / name
    bundle_dir.mkdir(parents=True, exist_ok=True)
    sketch_path = Path(sketch_path) if sketch_path else out_dir / SKETCH_NAME

    # The per-style legibility weight lives on the asset; an explicit
    # trainer-config value takes precedence.
    glyph_cfg = cfg.glyph
    if glyph_cfg.lambda_gly == 0 and style.legibility_weight > 0:
        glyph_cfg = replace(glyph_cfg, lambda_gly=style.legibility_weight)

    with _BundleLock(bundle_dir):
        sketch_module = ensure_sketch(dataset, cfg.sketch, sketch_path, log_every)

        with _stage("glyph"):
            glyph_gen, glyph_hist = train_glyph(sketch_module, style, dataset,
                                                glyph_cfg, log_every=log_every)
        with _stage("texture"):
            texture_gen, texture_hist = train_texture(style, glyph_gen, dataset,
                                                      cfg.texture, log_every=log_every)

        style_meta = {
            "style": name,
            "K": glyph_cfg.curriculum_k,
            "lambda_rec": glyph_cfg.lambda_rec,
            "lambda_adv": glyph_cfg.lambda_adv,
            "lambda_gly": glyph_cfg.lambda_gly,
        }
        save_glyph(glyph_gen, bundle_dir / GLYPH_NAME, style_meta)
        save_texture(texture_gen, bundle_dir / TEXTURE_NAME,
                     {"style": name, "lambda_style": cfg.texture.lambda_style})

        manifest = {
            "name": name,
            "version": FORMAT_VERSION,
            "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "sketch": os.path.relpath(sketch_path, bundle_dir),
            "sketch_sha256": sha256_file(sketch_path),
            "glyph_sha256": sha256_file(bundle_dir / GLYPH_NAME),
            "texture_sha256": sha256_file(bundle_dir / TEXTURE_NAME),
            "K": str(cfg.glyph.curriculum_k),
            "lambda_gly": str(glyph_cfg.lambda_gly),
            "lambda_style": str(cfg.texture.lambda_style),
            "crop_size": str(cfg.glyph.crop_size),
            "noise_std": str(cfg.glyph.noise_std),
            "base_width": str(cfg.glyph.base_width),
            "n_resblocks": str(cfg.glyph.n_resblocks),
        }
        (bundle_dir / MANIFEST_NAME).write_text(format_metadata(manifest) + "\n")

        from .report import plot_training_curves, write_history_csv

        rows = ([{"phase": f"glyph-s{r['stage']}", **r} for r in glyph_hist]
                + [{"phase": "texture", **r} for r in texture_hist])
        write_history_csv(rows, bundle_dir / "history.csv")
        plot_training_curves(rows, bundle_dir / "curves.png")

    return StyleModelBundle(name=name, glyph_gen=glyph_gen, texture_gen=texture_gen,
                            manifest=manifest, path=bundle_dir)


def read_manifest(bundle_dir) -> dict:
    path = Path(bundle_dir) / MANIFEST_NAME
    if not path.exists():
        raise StateError(f"{bundle_dir} has no manifest")
    return parse_metadata(path.read_text())


def load_bundle(bundle_dir) -> StyleModelBundle:
    """Load a bundle directory for inference (the shared sketch checkpoint is
    not needed to stylize)."""
    bundle_dir = Path(bundle_dir)
    manifest = read_manifest(bundle_dir)
    name = manifest.get("name", bundle_dir.name)
    glyph_path = bundle_dir / GLYPH_NAME
    texture_path = bundle_dir / TEXTURE_NAME
    if not glyph_path.exists() or not texture_path.exists():
        raise StateError(f"bundle {bundle_dir} is missing checkpoints")
    glyph_gen, glyph_meta = load_glyph(glyph_path)
    texture_gen, texture_meta = load_texture(texture_path)
    if glyph_meta.get("style") != texture_meta.get("style"):
        raise FormatError(f"bundle {bundle_dir} mixes styles: glyph={glyph_meta.get('style')!r} "
                          f"texture={texture_meta.get('style')!r}")
    return StyleModelBundle(name=name, glyph_gen=glyph_gen, texture_gen=texture_gen,
                            manifest=manifest, path=bundle_dir)


def stylize(bundle: StyleModelBundle, req: RenderRequest) -> ImageGrid:
    """Two feed-forward passes: structure transfer at level l, then texture
    rendering. Pure function of (bundle, request)."""
    structure = transfer_structure(bundle.glyph_gen, req.text, req.l,
                                   seed=req.seed, noise_std=bundle.noise_std)
    return render_texture(bundle.texture_gen, structure,
                          seed=req.seed + 1, noise_std=bundle.noise_std)


def stylize_timed(bundle: StyleModelBundle, req: RenderRequest):
    t0 = time.perf_counter()
    out = stylize(bundle, req)
    return out, time.perf_counter() - t0


def mashup(glyph_bundle: StyleModelBundle, texture_bundle: StyleModelBundle,
           text: ImageGrid, l, seed: int = 0) -> ImageGrid:
    """Structure from one style, texture from another."""
    l = check_scale(l)
    structure = transfer_structure(glyph_bundle.glyph_gen, text, l,
                                   seed=seed, noise_std=glyph_bundle.noise_std)
    return render_texture(texture_bundle.texture_gen, structure,
                          seed=seed + 1, noise_std=texture_bundle.noise_std)


def animate(bundle: StyleModelBundle, text: ImageGrid, schedule, out_dir):
    """Render one frame per (l, seed) entry; writes zero-padded PNGs and an
    index.csv mapping frames to their parameters."""
    if not schedule:
        raise ValueError("animation schedule is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    import csv

    paths = []
    with open(out_dir / "index.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "filename", "l", "seed"])
        for i, (l, seed) in enumerate(schedule):
            frame = stylize(bundle, RenderRequest(text=text, l=l, seed=int(seed)))
            filename = f"frame_{i:04d}.png"
            save_image(frame, out_dir / filename)
            writer.writerow([i, filename, f"{float(l):g}", int(seed)])
            paths.append(out_dir / filename)
    return paths
