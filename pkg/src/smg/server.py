"""Stateless HTTP inference service over a styles directory.

Endpoints: GET /api/styles (catalog), POST /api/render (stylize or mash-up a
base64 PNG), GET /health. Bundles load lazily on first use and are cached
read-only; rendering never mutates them, so identical seeded requests return
identical bytes.
"""

from __future__ import annotations

import base64
import binascii
import threading
import time
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .errors import FormatError, StateError
from .imageio import decode_image, encode_png
from .pipeline import (
    MANIFEST_NAME,
    RenderRequest,
    load_bundle,
    mashup,
    read_manifest,
    stylize,
)

MAX_IMAGE_BYTES = 16 * 1024 * 1024


class RenderBody(BaseModel):
    style: str | None = None
    l: float
    seed: int = 0
    image_b64: str
    glyph_style: str | None = None
    texture_style: str | None = None
    invert: bool = True


class BundleCache:
    def __init__(self, styles_dir: Path):
        self.styles_dir = styles_dir
        self._bundles = {}
        self._lock = threading.Lock()

    def catalog(self):
        entries = []
        if not self.styles_dir.is_dir():
            raise OSError(f"styles directory {self.styles_dir} is not readable")
        for path in sorted(self.styles_dir.iterdir()):
            if not path.is_dir() or not (path / MANIFEST_NAME).exists():
                continue
            try:
                manifest = read_manifest(path)
                entries.append({
                    "name": manifest.get("name", path.name),
                    "status": "ok",
                    "created": manifest.get("created", ""),
                    "lambda_gly": manifest.get("lambda_gly", ""),
                    "glyph_sha256": manifest.get("glyph_sha256", ""),
                    "texture_sha256": manifest.get("texture_sha256", ""),
                })
            except (FormatError, StateError, OSError) as exc:
                entries.append({"name": path.name, "status": "error", "detail": str(exc)})
        return entries

    def get(self, name: str):
        # Once-only load latch; cached bundles are immutable afterwards.
        with self._lock:
            if name in self._bundles:
                return self._bundles[name]
            bundle_dir = self.styles_dir / name
            if not (bundle_dir / MANIFEST_NAME).exists():
                raise HTTPException(status_code=404, detail=f"unknown style {name!r}")
            try:
                bundle = load_bundle(bundle_dir)
            except (FormatError, StateError, OSError) as exc:
                raise HTTPException(status_code=503, detail=f"model loading failed: {exc}")
            self._bundles[name] = bundle
            return bundle


def create_app(styles_dir) -> FastAPI:
    app = FastAPI(title="smg inference service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    cache = BundleCache(Path(styles_dir))
    app.state.cache = cache

    @app.get("/health")
    def health():
        try:
            n = sum(1 for e in cache.catalog() if e["status"] == "ok")
        except OSError:
            n = 0
        return {"status": "ok", "loaded_styles": n}

    @app.get("/api/styles")
    def styles():
        try:
            return {"styles": cache.catalog()}
        except OSError as exc:
            raise HTTPException(status_code=500, detail=str(exc))

    @app.post("/api/render")
    def render(body: RenderBody):
        if not (0.0 <= body.l <= 1.0):
            raise HTTPException(status_code=400, detail=f"l must be in [0, 1], got {body.l}")
        if len(body.image_b64) > MAX_IMAGE_BYTES * 4 // 3 + 4:
            raise HTTPException(status_code=400, detail="payload too large")
        try:
            raw = base64.b64decode(body.image_b64, validate=True)
        except (binascii.Error, ValueError):
            raise HTTPException(status_code=422, detail="image_b64 is not valid base64")
        if len(raw) > MAX_IMAGE_BYTES:
            raise HTTPException(status_code=400, detail="payload too large")
        try:
            text = decode_image(raw, "text", invert=body.invert)
        except FormatError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

        t0 = time.perf_counter()
        try:
            if body.glyph_style and body.texture_style:
                out = mashup(cache.get(body.glyph_style), cache.get(body.texture_style),
                             text, body.l, seed=body.seed)
            else:
                if not body.style:
                    raise HTTPException(status_code=400, detail="style is required")
                bundle = cache.get(body.style)
                out = stylize(bundle, RenderRequest(text=text, l=body.l, seed=body.seed))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        timing_ms = (time.perf_counter() - t0) * 1000.0
        return {"image_b64": base64.b64encode(encode_png(out)).decode("ascii"),
                "timing_ms": timing_ms}

    return app


def run_server(styles_dir, port: int = 8008, host: str = "127.0.0.1") -> None:
    import uvicorn

    uvicorn.run(create_app(styles_dir), host=host, port=port, log_level="info")
