"""Build a zero-step toy bundle and serve it; fixture for the studio tests.

Usage: python3 serve_toy.py --dir WORKDIR --port PORT
Writes WORKDIR/text.png (dark-on-light toy glyph) and WORKDIR/styles/, then
runs the inference service until killed.
"""

import argparse
from pathlib import Path

from smg import toy
from smg.imageio import save_image
from smg.pipeline import train_style
from smg.server import run_server


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dir", required=True)
    ap.add_argument("--port", type=int, required=True)
    args = ap.parse_args()

    work = Path(args.dir)
    styles = work / "styles"
    style = toy.make_toy_style()
    dataset = toy.make_toy_dataset(count=4)
    # A few dozen steps so the scale branches diverge (a zero-step bundle is
    # scale-invariant by the branch-copy construction) while staying fast.
    cfg = toy.toy_train_config(steps=40)
    cfg.sketch.batch_size = 1
    train_style(style, dataset, cfg, styles, name="toy-a")
    cfg2 = toy.toy_train_config(steps=0, seed=9)
    train_style(style, dataset, cfg2, styles, name="toy-b", sketch_path=styles / "sketch.smg1")

    text = toy.make_toy_text()
    text.values[:] = -text.values  # usual dark-on-light polarity
    save_image(text, work / "text.png")

    run_server(styles, port=args.port)


if __name__ == "__main__":
    main()
