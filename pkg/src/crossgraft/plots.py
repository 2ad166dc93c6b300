"""File-only plot emission (no interactive display)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .trainer import read_metrics  # noqa: E402


def plot_sweep(rows: list[dict], out_path: str | Path) -> Path:
    """Accuracy vs split curve, one line per channel."""
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    splits = [r["split"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(splits, [r["accuracy_st"] for r in rows], marker="o", label="st channel")
    ax.plot(splits, [r["accuracy_ts"] for r in rows], marker="s", label="ts channel")
    ax.set_xlabel("decoder split")
    ax.set_ylabel("target accuracy")
    ax.set_ylim(0, 1)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_training_curves(metrics_path: str | Path, out_path: str | Path) -> Path:
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    records = read_metrics(metrics_path)
    steps = [r["step"] for r in records]
    keys = [k for k in ("vae", "rec", "prior", "disc", "gen", "content", "task") if records and k in records[0]]
    fig, ax = plt.subplots(figsize=(7, 4))
    for key in keys:
        ax.plot(steps, [r[key] for r in records], label=key, linewidth=0.8)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.legend(ncol=3, fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_accuracy_bars(records: list[dict], out_path: str | Path) -> Path:
    """Grouped bars of per-channel accuracies across result records."""
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    labels = [f"{r['mode']}\n{r['source']}->{r['target']}" for r in records]
    x = range(len(records))
    fig, ax = plt.subplots(figsize=(max(6, 1.4 * len(records)), 4))
    ax.bar([i - 0.2 for i in x], [r["accuracy_st"] for r in records], width=0.4, label="st")
    ax.bar([i + 0.2 for i in x], [r["accuracy_ts"] for r in records], width=0.4, label="ts")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylim(0, 1)
    ax.set_ylabel("target accuracy")
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
