"""Command-line interface.

Exit codes: 0 ok, 2 argument error, 3 state/checkpoint error, 4 training
divergence.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

from .errors import DivergenceError, FormatError, StateError


def _add_dataset_args(p):
    group = p.add_mutually_exclusive_group()
    group.add_argument("--text-dir", help="directory of text images (dark-on-light)")
    group.add_argument("--procedural", action="store_true",
                       help="synthesize the text dataset (fonts if found, strokes otherwise)")
    p.add_argument("--font-dir", action="append", default=None,
                   help="font search directory for --procedural (repeatable)")
    p.add_argument("--count", type=int, default=200, help="synthetic dataset size")
    p.add_argument("--size", type=int, default=None, help="synthetic sample resolution")


def _add_scale_args(p):
    p.add_argument("--preset", choices=["full", "toy"], default="full",
                   help="network/crop scale preset")
    p.add_argument("--steps", type=int, default=None, help="steps per training stage")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-every", type=int, default=200)


def _build_parser():
    p = argparse.ArgumentParser(prog="smg",
                                description="scale-controllable artistic text stylization")
    sub = p.add_subparsers(dest="cmd", required=True)

    ps = sub.add_parser("train-sketch", help="train the shared sketch module")
    _add_dataset_args(ps)
    _add_scale_args(ps)
    ps.add_argument("--out", required=True, help="output checkpoint path (.smg1)")

    pt = sub.add_parser("train-style", help="train glyph+texture networks for one style")
    pt.add_argument("--style", required=True, help="style image (PNG/JPEG)")
    pt.add_argument("--structure", required=True, help="structure map (white subject on black)")
    pt.add_argument("--name", required=True, help="style name (bundle directory)")
    pt.add_argument("--gly-weight", type=float, default=0.0, choices=[0.0, 1.0],
                    help="legibility loss weight (1 for hard styles)")
    pt.add_argument("--out-dir", required=True, help="styles directory")
    pt.add_argument("--sketch", default=None,
                    help="sketch checkpoint (default <out-dir>/sketch.smg1; trained if missing)")
    pt.add_argument("--invert-structure", action="store_true",
                    help="structure map is dark subject on light background")
    _add_dataset_args(pt)
    _add_scale_args(pt)

    pr = sub.add_parser("render", help="stylize a text image")
    pr.add_argument("--style", required=True)
    pr.add_argument("--text", required=True)
    pr.add_argument("--l", type=float, required=True)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--out", required=True)
    pr.add_argument("--styles-dir", default=None)
    pr.add_argument("--no-invert", action="store_true",
                    help="text image is already ink-on-dark")

    pm = sub.add_parser("mashup", help="structure from one style, texture from another")
    pm.add_argument("--glyph-style", required=True)
    pm.add_argument("--texture-style", required=True)
    pm.add_argument("--text", required=True)
    pm.add_argument("--l", type=float, required=True)
    pm.add_argument("--seed", type=int, default=0)
    pm.add_argument("--out", required=True)
    pm.add_argument("--styles-dir", default=None)
    pm.add_argument("--no-invert", action="store_true")

    pa = sub.add_parser("animate", help="render an l/seed schedule to numbered frames")
    pa.add_argument("--style", required=True)
    pa.add_argument("--text", required=True)
    pa.add_argument("--l-start", type=float, default=0.0)
    pa.add_argument("--l-end", type=float, default=1.0)
    pa.add_argument("--frames", type=int, required=True)
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--seed-mode", choices=["fixed", "walk"], default="fixed",
                    help="fixed: one seed for all frames; walk: seed+i per frame")
    pa.add_argument("--out-dir", required=True)
    pa.add_argument("--styles-dir", default=None)
    pa.add_argument("--no-invert", action="store_true")

    pw = sub.add_parser("report", help="scale sweep contact sheet + metrics.csv")
    pw.add_argument("--style", required=True)
    pw.add_argument("--text", required=True)
    pw.add_argument("--frames", type=int, default=5)
    pw.add_argument("--seed", type=int, default=0)
    pw.add_argument("--out-dir", required=True)
    pw.add_argument("--styles-dir", default=None)
    pw.add_argument("--no-invert", action="store_true")

    pv = sub.add_parser("serve", help="run the HTTP inference service")
    pv.add_argument("--port", type=int, default=8008)
    pv.add_argument("--host", default="127.0.0.1")
    pv.add_argument("--styles-dir", default=None)
    return p


def _styles_dir(arg):
    d = arg or os.environ.get("SMG_STYLES_DIR")
    if not d:
        raise ValueError("no styles directory: pass --styles-dir or set SMG_STYLES_DIR")
    return Path(d)


def _load_dataset(args, default_size):
    from .imageio import build_text_dataset, load_text_dir

    if args.text_dir:
        return load_text_dir(args.text_dir)
    font_dirs = args.font_dir
    if font_dirs is None:
        candidates = [Path("/usr/share/fonts"), Path("/usr/local/share/fonts")]
        font_dirs = [str(c) for c in candidates if c.exists()]
    size = args.size or default_size
    return build_text_dataset(font_dirs=font_dirs, count=args.count,
                              seed=args.seed, size=size)


def _scale_params(args):
    steps = args.steps
    if args.preset == "toy":
        return {"width": 16, "blocks": 3, "disc_layers": 2, "crop": 64,
                "steps": steps if steps is not None else 2000, "size": 64}
    return {"width": 32, "blocks": 6, "disc_layers": 3, "crop": 256,
            "steps": steps if steps is not None else 20000, "size": 256}


def _cmd_train_sketch(args):
    from .pipeline import ensure_sketch
    from .sketch import SketchTrainConfig

    sp = _scale_params(args)
    args.size = args.size or sp["size"]
    dataset = _load_dataset(args, sp["size"])
    cfg = SketchTrainConfig(steps=sp["steps"], base_width=sp["width"],
                            n_resblocks=sp["blocks"], disc_layers=sp["disc_layers"],
                            seed=args.seed)
    out = Path(args.out)
    if out.exists():
        raise StateError(f"{out} already exists; remove it to retrain")
    ensure_sketch(dataset, cfg, out, log_every=args.log_every)
    print(f"sketch checkpoint written to {out}")
    return 0


def _cmd_train_style(args):
    from .glyph import GlyphTrainConfig
    from .imageio import StyleAsset, load_image
    from .pipeline import StyleTrainConfig, train_style
    from .sketch import SketchTrainConfig
    from .texture import TextureTrainConfig

    sp = _scale_params(args)
    style_img = load_image(args.style, "style")
    structure = load_image(args.structure, "structure", invert=args.invert_structure)
    asset = StyleAsset(name=args.name, style=style_img, structure=structure,
                       legibility_weight=args.gly_weight)
    dataset = _load_dataset(args, sp["size"])
    crop = min(sp["crop"], structure.height, structure.width)
    cfg = StyleTrainConfig(
        sketch=SketchTrainConfig(steps=sp["steps"], base_width=sp["width"],
                                 n_resblocks=sp["blocks"], disc_layers=sp["disc_layers"],
                                 seed=args.seed),
        glyph=GlyphTrainConfig(steps_per_stage=sp["steps"], crop_size=crop,
                               base_width=sp["width"], n_resblocks=sp["blocks"],
                               disc_layers=sp["disc_layers"], lambda_gly=args.gly_weight,
                               seed=args.seed + 1),
        texture=TextureTrainConfig(steps=sp["steps"], crop_size=crop,
                                   base_width=sp["width"], n_resblocks=sp["blocks"],
                                   disc_layers=sp["disc_layers"], seed=args.seed + 2),
    )
    bundle = train_style(asset, dataset, cfg, args.out_dir, name=args.name,
                         sketch_path=args.sketch, log_every=args.log_every)
    print(f"bundle written to {bundle.path}")
    return 0


def _load_text(args):
    from .imageio import load_image

    return load_image(args.text, "text", invert=not args.no_invert)


def _cmd_render(args):
    from .imageio import save_image
    from .pipeline import RenderRequest, load_bundle, stylize_timed

    bundle = load_bundle(_styles_dir(args.styles_dir) / args.style)
    text = _load_text(args)
    out, elapsed = stylize_timed(bundle, RenderRequest(text=text, l=args.l, seed=args.seed))
    save_image(out, args.out)
    print(f"rendered {args.out} in {elapsed * 1000:.1f} ms "
          f"(reference feed-forward figures: 0.43 s CPU, 16 ms GPU at 256x256)")
    return 0


def _cmd_mashup(args):
    from .imageio import save_image
    from .pipeline import load_bundle, mashup

    styles = _styles_dir(args.styles_dir)
    ga = load_bundle(styles / args.glyph_style)
    tb = load_bundle(styles / args.texture_style)
    t0 = time.perf_counter()
    out = mashup(ga, tb, _load_text(args), args.l, seed=args.seed)
    save_image(out, args.out)
    print(f"rendered {args.out} in {(time.perf_counter() - t0) * 1000:.1f} ms")
    return 0


def _cmd_animate(args):
    from .pipeline import animate, load_bundle

    if args.frames <= 0:
        raise ValueError("--frames must be positive")
    bundle = load_bundle(_styles_dir(args.styles_dir) / args.style)
    text = _load_text(args)
    if args.frames == 1:
        ls = [args.l_start]
    else:
        step = (args.l_end - args.l_start) / (args.frames - 1)
        ls = [args.l_start + i * step for i in range(args.frames)]
    seeds = [args.seed if args.seed_mode == "fixed" else args.seed + i
             for i in range(args.frames)]
    paths = animate(bundle, text, list(zip(ls, seeds)), args.out_dir)
    print(f"wrote {len(paths)} frames to {args.out_dir}")
    return 0


def _cmd_report(args):
    from .pipeline import load_bundle
    from .report import sweep_report

    if args.frames < 2:
        raise ValueError("--frames must be at least 2")
    bundle = load_bundle(_styles_dir(args.styles_dir) / args.style)
    ls = [i / (args.frames - 1) for i in range(args.frames)]
    metrics = sweep_report(bundle, _load_text(args), ls, args.seed, args.out_dir)
    print(f"sweep report in {args.out_dir} (metrics: {metrics})")
    return 0


def _cmd_serve(args):
    from .server import run_server

    run_server(_styles_dir(args.styles_dir), port=args.port, host=args.host)
    return 0


_COMMANDS = {
    "train-sketch": _cmd_train_sketch,
    "train-style": _cmd_train_style,
    "render": _cmd_render,
    "mashup": _cmd_mashup,
    "animate": _cmd_animate,
    "report": _cmd_report,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.cmd](args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (StateError, FormatError, IOError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
