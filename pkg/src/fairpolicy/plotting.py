"""Figures written next to the CSV reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

TARGET_LABELS = {"A": "adjust A", "scores": "adjust scores", "both": "adjust A and scores"}


def _save(fig, path: Path) -> Path:
    # fixed metadata keeps reruns byte-identical
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_comparison(comparison, path: Path) -> Path:
    rows = comparison.rows
    names = [r.policy for r in rows]
    y = np.arange(len(rows))
    with plt.rc_context(RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 0.35 * len(rows) + 1.2), sharey=True)
        colors = ["C0" if r.interpretable else "C7" for r in rows]
        ax1.barh(y, [r.policy_value for r in rows], color=colors)
        ax1.set_yticks(y, names)
        ax1.invert_yaxis()
        ax1.set_xlabel("policy value")
        lo = min(r.policy_value for r in rows)
        hi = max(r.policy_value for r in rows)
        pad = 0.05 * (hi - lo or 1.0)
        ax1.set_xlim(lo - pad, hi + pad)
        ax2.barh(y, [r.fairness.cramers_v for r in rows], color=colors)
        ax2.set_xlabel("Cramér's V")
        fig.tight_layout()
        return _save(fig, path)


def plot_sweep(points, path: Path) -> Path:
    with plt.rc_context(RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3))
        for target in dict.fromkeys(p.target for p in points):
            pts = [p for p in points if p.target == target]
            lam = [p.lam for p in pts]
            label = TARGET_LABELS.get(target, target)
            ax1.plot(lam, [p.policy_value for p in pts], marker="o", ms=3, label=label)
            ax2.plot(lam, [p.cramers_v for p in pts], marker="o", ms=3, label=label)
        ax1.set_xlabel("weight on adjusted variable")
        ax1.set_ylabel("policy value")
        ax2.set_xlabel("weight on adjusted variable")
        ax2.set_ylabel("Cramér's V")
        ax2.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def plot_clusters(summary, path: Path) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        x = np.arange(len(summary.clusters))
        ax.bar(x, [c.mean_delta for c in summary.clusters], color="C1")
        ax.axhline(0.0, color="k", lw=0.6)
        ax.set_xticks(x, [f"n={c.size}" for c in summary.clusters])
        ax.set_ylabel("mean score change")
        ax.set_title(f"k={summary.k}, silhouette={summary.silhouette:.2f}")
        fig.tight_layout()
        return _save(fig, path)


def render_all(out: Path, comparison=None, sweep=None, clusters=None) -> list[Path]:
    written = []
    if comparison is not None and comparison.rows:
        written.append(plot_comparison(comparison, out / "comparison.png"))
    if sweep:
        written.append(plot_sweep(sweep, out / "sweep.png"))
    if clusters is not None and clusters.clusters:
        written.append(plot_clusters(clusters, out / "clusters.png"))
    return written
