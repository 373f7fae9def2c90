"""Matplotlib companions to the machine-readable outputs.

Every figure is written with the PNG Date field suppressed so reruns are
byte-identical.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_SAVE_KW = {"metadata": {"Date": None}, "dpi": 110}


def render_bench_figure(reports, path):
    """Analytic multiply counts against tube length, one line per
    (mechanism, spatial/feature dims) group."""
    groups = {}
    for r in reports:
        key = (r.mechanism, r.h, r.w, r.d, r.c_v, r.n, r.em_iters, r.heads)
        groups.setdefault(key, []).append((r.t, r.analytic_multiplies))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    multi_dims = len({k[1:] for k in groups}) > 1
    for key in sorted(groups):
        pts = sorted(groups[key])
        label = key[0] if not multi_dims else f"{key[0]} {key[1]}x{key[2]}"
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label=label)
    ax.set_xlabel("tube length T")
    ax.set_ylabel("analytic multiplies")
    if groups:
        ax.set_yscale("log")
        ax.legend(fontsize=8)
    ax.set_title("attention cost vs. tube length")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_track_figure(final_iou_per_frame, initial_iou_per_frame, path):
    """Per-frame mean IoU of refined masks next to the corrupted inputs."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    frames = range(len(final_iou_per_frame))
    ax.plot(frames, final_iou_per_frame, marker="o", label="refined")
    ax.plot(frames, initial_iou_per_frame, marker="s", linestyle="--",
            label="initial")
    ax.set_xlabel("frame")
    ax.set_ylabel("mean IoU vs. ground truth")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    ax.set_title("mask quality over the sequence")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
