"""Training/report outputs: delimited loss histories, matplotlib loss
curves, and the scale-sweep contact sheet with silhouette metrics."""

from __future__ import annotations

import csv
import time
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .imageio import ImageGrid, save_image, to_uint8

HISTORY_FIELDS = ["phase", "stage", "step", "l", "rec", "adv_g", "adv_d", "gly", "style"]


def write_history_csv(rows, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS, extrasaction="ignore",
                                restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def plot_training_curves(rows, path) -> None:
    phases = []
    for row in rows:
        if row["phase"] not in phases:
            phases.append(row["phase"])
    fig, axes = plt.subplots(1, max(len(phases), 1), figsize=(4 * max(len(phases), 1), 3),
                             squeeze=False)
    for ax, phase in zip(axes[0], phases):
        sub = [r for r in rows if r["phase"] == phase]
        steps = [r["step"] for r in sub]
        ax.plot(steps, [r["rec"] for r in sub], label="rec", lw=0.8)
        ax.plot(steps, [r["adv_g"] for r in sub], label="adv_g", lw=0.8, alpha=0.7)
        ax.set_title(phase)
        ax.set_xlabel("step")
        ax.set_yscale("log")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=110)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Silhouette metrics
# ---------------------------------------------------------------------------

def silhouette(grid: ImageGrid) -> np.ndarray:
    """Boolean foreground mask: sign of the value (1ch) or of the luminance
    (3ch)."""
    v = grid.values
    if grid.channels == 1:
        return v[:, :, 0] > 0
    lum = 0.299 * v[:, :, 0] + 0.587 * v[:, :, 1] + 0.114 * v[:, :, 2]
    return lum > 0


def silhouette_iou(a: ImageGrid, b: ImageGrid) -> float:
    sa, sb = silhouette(a), silhouette(b)
    union = np.logical_or(sa, sb).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(sa, sb).sum() / union)


def silhouette_deviation(out: ImageGrid, text: ImageGrid) -> float:
    """Fraction of pixels whose binarized class differs from the input mask."""
    return float((silhouette(out) != silhouette(text)).mean())


# ---------------------------------------------------------------------------
# Scale sweep report
# ---------------------------------------------------------------------------

def sweep_report(bundle, text: ImageGrid, ls, seed: int, out_dir) -> Path:
    """Render the text at each scale in ``ls``; write per-frame PNGs, a
    metrics.csv (deviation/IoU/wall time per scale), and a contact-sheet
    figure. Returns the metrics path."""
    from .pipeline import RenderRequest, stylize

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames, metrics = [], []
    for l in ls:
        t0 = time.perf_counter()
        frame = stylize(bundle, RenderRequest(text=text, l=float(l), seed=seed))
        elapsed_ms = (time.perf_counter() - t0) * 1000.0
        save_image(frame, out_dir / f"sweep_l{float(l):.2f}.png")
        frames.append(frame)
        metrics.append({
            "l": float(l),
            "deviation": silhouette_deviation(frame, text),
            "iou": silhouette_iou(frame, text),
            "ms": elapsed_ms,
        })

    metrics_path = out_dir / "metrics.csv"
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["l", "deviation", "iou", "ms"])
        writer.writeheader()
        writer.writerows(metrics)

    fig, axes = plt.subplots(2, len(frames), figsize=(2.2 * len(frames), 5),
                             squeeze=False, gridspec_kw={"height_ratios": [3, 2]})
    for ax, frame, m in zip(axes[0], frames, metrics):
        ax.imshow(to_uint8(frame))
        ax.set_title(f"l={m['l']:.2f}", fontsize=9)
        ax.axis("off")
    gs = axes[1][0].get_gridspec()
    for ax in axes[1]:
        ax.remove()
    ax = fig.add_subplot(gs[1, :])
    ax.plot([m["l"] for m in metrics], [m["deviation"] for m in metrics], "o-")
    ax.set_xlabel("scale parameter")
    ax.set_ylabel("silhouette deviation")
    fig.tight_layout()
    fig.savefig(out_dir / "sweep.png", dpi=110)
    plt.close(fig)
    return metrics_path
