"""Figures written next to the CLI's JSON/CSV reports."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .chroma import PITCH_CLASSES  # noqa: E402

# no timestamps/versions in PNG metadata, so reruns are byte-identical
_SAVE_KW = {"dpi": 100, "metadata": {"Software": None}}


def _save(fig, path):
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_chromagrams(names, cgrams, vectors, path, scores=None):
    """One row per input: chromagram on the left, chroma vector on the right."""
    n = len(names)
    fig, axes = plt.subplots(n, 2, figsize=(9, 2.4 * n), squeeze=False,
                             gridspec_kw={"width_ratios": [4, 1]})
    for row, (name, cg, vec) in enumerate(zip(names, cgrams, vectors)):
        ax = axes[row, 0]
        t = cg.frame_times
        extent = [t[0], t[-1] if len(t) > 1 else 1.0, -0.5, 11.5]
        ax.imshow(cg.energy, aspect="auto", origin="lower", extent=extent, cmap="magma")
        ax.set_yticks(range(12))
        ax.set_yticklabels(PITCH_CLASSES, fontsize=6)
        ax.set_ylabel(name, fontsize=8)
        ax.set_xlabel("time (s)")
        bar = axes[row, 1]
        v = vec.values
        bar.barh(range(12), v / v.max() if v.max() > 0 else v, color="0.3")
        bar.set_yticks(range(12))
        bar.set_yticklabels(PITCH_CLASSES, fontsize=6)
        bar.set_xlim(0, 1.05)
    if scores is not None and n > 1:
        pairs = [f"s({names[0]},{names[j]})={scores[0][j]:.2f}" for j in range(1, n)]
        fig.suptitle(",  ".join(pairs), fontsize=9)
    fig.tight_layout()
    _save(fig, path)


def plot_score_histogram(summary: dict, path):
    """Histogram of chosen-partner chroma scores from an augment summary."""
    fig, ax = plt.subplots(figsize=(5, 3))
    for key, label in (("match_score", "match score"), ("realized_score", "realized score")):
        stats = summary.get(key)
        if not stats:
            continue
        edges = np.asarray(stats["histogram"]["edges"])
        counts = np.asarray(stats["histogram"]["counts"])
        ax.stairs(counts, edges, label=f"{label} (mean {stats['mean']:.3f})")
        if key == "match_score":
            break  # realized == match for pitch-aware remixes
    t = summary.get("temperature")
    ax.set_title(f"{summary['strategy']}" + (f", T={t}" if t is not None else ""), fontsize=9)
    ax.set_xlabel("chroma score")
    ax.set_ylabel("remixes")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)


def plot_sdr_report(report, path):
    songs = sorted(report.per_song)
    x = np.arange(len(songs))
    fig, ax = plt.subplots(figsize=(max(4, 0.4 * len(songs) + 2), 3))
    for k, (src, color) in enumerate((("vocal", "tab:blue"), ("accompaniment", "tab:orange"))):
        vals = [report.per_song[s][src] for s in songs]
        vals = [np.nan if v is None else v for v in vals]
        ax.bar(x + (k - 0.5) * 0.4, vals, width=0.4, label=src, color=color)
    ax.set_xticks(x)
    ax.set_xticklabels(songs, rotation=90, fontsize=6)
    ax.set_ylabel("median segment SDR (dB)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)
