"""Image grids, loading/saving conventions, crop sampling, noise, and the
synthetic text dataset.

All pixel data lives in float32 grids of shape (H, W, C) with values in
[-1, 1]. Foreground (ink, style subject) is +1, background is -1, for every
grid in the system; loaders expose an ``invert`` flag because text art is
usually dark-on-light.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .errors import FormatError

GRID_TAGS = ("style", "structure", "text", "output")

#: Default training-time noise amplitude in [-1, 1] units.
DEFAULT_NOISE_STD = 0.2

#: Default glyph coverage for the synthetic text dataset.
DEFAULT_GLYPHS = "ABCDEFGHJKLMNPQRSTUVWXYZ2345689"


@dataclass
class ImageGrid:
    """H x W x C float raster in [-1, 1].

    ``tag`` records the grid's role: single-channel ``structure``/``text``
    masks or 3-channel ``style``/``output`` images.
    """

    values: np.ndarray
    tag: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim == 2:
            self.values = self.values[:, :, None]
        self.validate()

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    def validate(self):
        if self.tag not in GRID_TAGS:
            raise ValueError(f"unknown grid tag {self.tag!r}")
        if self.values.ndim != 3:
            raise ValueError("grid values must have shape (H, W, C)")
        h, w, c = self.values.shape
        if h == 0 or w == 0:
            raise FormatError("zero-dimension image")
        expected = 1 if self.tag in ("structure", "text") else 3
        if c != expected:
            raise ValueError(f"{self.tag} grid must have {expected} channels, got {c}")
        lo, hi = float(self.values.min()), float(self.values.max())
        if lo < -1.0 or hi > 1.0:
            raise ValueError(f"grid values out of [-1, 1]: min={lo}, max={hi}")


@dataclass
class StyleAsset:
    """The single training exemplar: style image plus its structure map."""

    name: str
    style: ImageGrid
    structure: ImageGrid
    legibility_weight: float = 0.0

    def __post_init__(self):
        if self.style.tag != "style" or self.structure.tag != "structure":
            raise ValueError("StyleAsset needs a style grid and a structure grid")
        if (self.style.height, self.style.width) != (self.structure.height, self.structure.width):
            raise ValueError("style image and structure map must share dimensions")
        if self.legibility_weight < 0:
            raise ValueError("legibility weight must be nonnegative")


@dataclass
class TextDataset:
    """Immutable collection of single-channel text grids."""

    samples: list = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        for s in self.samples:
            if s.tag != "text":
                raise ValueError("TextDataset samples must be text grids")
            v = s.values
            if not ((v > 0).any() and (v < 0).any()):
                raise ValueError("text sample must contain foreground and background pixels")

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i) -> ImageGrid:
        return self.samples[i]


def _from_uint8(arr: np.ndarray) -> np.ndarray:
    return (arr.astype(np.float32) / 255.0) * 2.0 - 1.0


def decode_image(data: bytes, tag: str, invert: bool = False) -> ImageGrid:
    """Decode PNG/JPEG bytes into an ImageGrid (see load_image)."""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise FormatError(f"cannot decode image: {exc}") from exc
    return _grid_from_pil(img, tag, invert)


def _grid_from_pil(img: Image.Image, tag: str, invert: bool) -> ImageGrid:
    if img.width == 0 or img.height == 0:
        raise FormatError("zero-dimension image")
    if tag in ("structure", "text"):
        arr = _from_uint8(np.asarray(img.convert("L")))
        if invert:
            arr = -arr
        return ImageGrid(arr[:, :, None], tag)
    arr = _from_uint8(np.asarray(img.convert("RGB")))
    return ImageGrid(arr, tag)


def load_image(path, tag: str, invert: bool = False) -> ImageGrid:
    """Load an 8-bit PNG/JPEG as an ImageGrid.

    Pixels map to 2*(p/255) - 1. Structure/text images are collapsed to one
    channel by luminance; ``invert`` negates the single-channel result so
    that ink ends up at +1 regardless of the source polarity.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IOError(f"cannot read {path}: {exc}") from exc
    return decode_image(data, tag, invert)


def to_uint8(grid: ImageGrid) -> np.ndarray:
    v = np.clip(grid.values, -1.0, 1.0)
    return np.rint(255.0 * (v + 1.0) / 2.0).astype(np.uint8)


def save_image(grid: ImageGrid, path) -> None:
    """Write a grid as an 8-bit PNG; value v is stored as round(255*(v+1)/2)."""
    arr = to_uint8(grid)
    if grid.channels == 1:
        img = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        img = Image.fromarray(arr, mode="RGB")
    img.save(Path(path), format="PNG")


def encode_png(grid: ImageGrid) -> bytes:
    arr = to_uint8(grid)
    img = Image.fromarray(arr[:, :, 0], "L") if grid.channels == 1 else Image.fromarray(arr, "RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def random_crop_pair(a: ImageGrid, b: ImageGrid, size: int, rng: np.random.Generator):
    """Crop co-located size x size windows from a and b at a uniform offset."""
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError("crop pair inputs must share dimensions")
    if size > min(a.height, a.width):
        raise ValueError(f"crop size {size} exceeds image {a.height}x{a.width}")
    top = int(rng.integers(0, a.height - size + 1))
    left = int(rng.integers(0, a.width - size + 1))
    wa = ImageGrid(a.values[top:top + size, left:left + size].copy(), a.tag)
    wb = ImageGrid(b.values[top:top + size, left:left + size].copy(), b.tag)
    return wa, wb


def inject_noise(x: ImageGrid, std: float, rng: np.random.Generator) -> ImageGrid:
    """Add elementwise zero-mean Gaussian noise, clamped back to [-1, 1]."""
    if std < 0:
        raise ValueError("noise std must be nonnegative")
    if std == 0:
        return ImageGrid(x.values.copy(), x.tag)
    noise = rng.normal(0.0, std, size=x.values.shape).astype(np.float32)
    return ImageGrid(np.clip(x.values + noise, -1.0, 1.0), x.tag)


# ---------------------------------------------------------------------------
# Synthetic text dataset
# ---------------------------------------------------------------------------

def find_fonts(font_dirs) -> list:
    found = []
    for d in font_dirs or []:
        d = Path(d)
        if not d.exists():
            continue
        for ext in ("*.ttf", "*.otf", "*.ttc"):
            found.extend(sorted(d.rglob(ext)))
    return found


def _draw_glyph_sample(canvas: Image.Image, fonts, glyph_set, size, rng):
    draw = ImageDraw.Draw(canvas)
    n_glyphs = int(rng.integers(1, 4))
    for _ in range(n_glyphs):
        ch = glyph_set[int(rng.integers(0, len(glyph_set)))]
        pt = int(size * (0.35 + 0.45 * rng.random()))
        font_path = fonts[int(rng.integers(0, len(fonts)))]
        try:
            font = ImageFont.truetype(str(font_path), pt)
        except OSError:
            continue
        x = int(rng.integers(-pt // 4, max(1, size - pt // 2)))
        y = int(rng.integers(-pt // 4, max(1, size - pt)))
        draw.text((x, y), ch, fill=255, font=font)


def _thick_bar(draw, cx, cy, angle, length, thickness):
    dx, dy = math.cos(angle), math.sin(angle)
    a = (cx - dx * length / 2, cy - dy * length / 2)
    b = (cx + dx * length / 2, cy + dy * length / 2)
    draw.line([a, b], fill=255, width=thickness)
    r = thickness / 2
    for px, py in (a, b):
        draw.ellipse([px - r, py - r, px + r, py + r], fill=255)


def _draw_stroke_sample(canvas: Image.Image, size, rng):
    # Procedural fallback: one glyph-trunk-like figure (bar, cross, or ring)
    # in canonical orientations. Figures are thick and large so they survive
    # heavy smoothing and reconstruction stays well-posed even at small
    # canvas sizes.
    draw = ImageDraw.Draw(canvas)
    thickness = max(3, int(size * (0.22 + 0.10 * rng.random())))
    cx, cy = rng.uniform(0.42, 0.58, 2) * size
    kind = rng.random()
    if kind < 0.15:
        rad = size * rng.uniform(0.22, 0.3)
        draw.ellipse([cx - rad, cy - rad, cx + rad, cy + rad],
                     outline=255, width=thickness)
        return
    base_angle = float(rng.choice([0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4]))
    length = size * rng.uniform(0.65, 0.9)
    _thick_bar(draw, cx, cy, base_angle, length, thickness)
    if kind > 0.5:  # second perpendicular bar: cross junction
        _thick_bar(draw, cx, cy, base_angle + math.pi / 2,
                   size * rng.uniform(0.5, 0.75), thickness)


def build_text_dataset(font_dirs=None, glyph_set: str = DEFAULT_GLYPHS,
                       count: int = 100, seed: int = 0, size: int = 256) -> TextDataset:
    """Render ``count`` synthetic text grids (ink=+1 on background=-1).

    Uses TrueType fonts found under ``font_dirs`` when available; otherwise
    falls back to procedural strokes so the dataset never depends on font
    files being installed.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    if not glyph_set:
        raise ValueError("glyph_set must be nonempty")
    rng = np.random.default_rng(seed)
    fonts = find_fonts(font_dirs)
    samples = []
    for _ in range(count):
        canvas = Image.new("L", (size, size), 0)
        if fonts:
            _draw_glyph_sample(canvas, fonts, glyph_set, size, rng)
        else:
            _draw_stroke_sample(canvas, size, rng)
        arr = _from_uint8(np.asarray(canvas))
        if not (arr > 0).any() or not (arr < 0).any():
            # Degenerate draw (glyph clipped out); guarantee the invariant.
            canvas = Image.new("L", (size, size), 0)
            _draw_stroke_sample(canvas, size, rng)
            arr = _from_uint8(np.asarray(canvas))
        samples.append(ImageGrid(arr[:, :, None], "text"))
    return TextDataset(samples=samples, seed=seed)


def load_text_dir(path, invert: bool = True) -> TextDataset:
    """Load every PNG/JPEG under ``path`` as a text grid."""
    path = Path(path)
    files = sorted(p for p in path.iterdir()
                   if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if not files:
        raise ValueError(f"no images found in {path}")
    samples = [load_image(p, "text", invert=invert) for p in files]
    return TextDataset(samples=samples, seed=0)
