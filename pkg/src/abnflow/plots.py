"""Report figures rendered to PNG with the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .realize import Conversation  # noqa: E402

# no timestamps or version strings, so reruns give identical files
_PNG_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_act_distribution(acts: dict, path: Path) -> Path:
    names = list(acts)
    counts = [acts[n]["count"] for n in names]
    fig, ax = plt.subplots(figsize=(9, 6))
    ax.barh(names[::-1], counts[::-1], color="#4c72b0")
    ax.set_xlabel("turns")
    ax.set_title("Dialog act distribution")
    fig.tight_layout()
    return _save(fig, path)


def plot_turn_histogram(convs: Sequence[Conversation], path: Path) -> Path:
    lengths = [len(c.turns) for c in convs]
    lo, hi = min(lengths), max(lengths)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(lengths, bins=range(lo, hi + 2), align="left", color="#55a868", edgecolor="white")
    ax.set_xlabel("turns per conversation")
    ax.set_ylabel("conversations")
    ax.set_title("Conversation length")
    fig.tight_layout()
    return _save(fig, path)


def plot_survival(survival: Sequence[dict], path: Path) -> Path:
    stages = ["input"] + [r["stage"] for r in survival]
    pct = [100.0] + [r["percent"] for r in survival]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(stages, pct, marker="o", color="#c44e52")
    for x, y in zip(stages, pct):
        ax.annotate(f"{y:.1f}%", (x, y), textcoords="offset points", xytext=(0, 6), ha="center")
    ax.set_ylim(0, 110)
    ax.set_ylabel("surviving conversations (%)")
    ax.set_title("Cumulative survival through the expert stages")
    fig.tight_layout()
    return _save(fig, path)


def render_figures(report: dict, convs: Sequence[Conversation], out_dir: str | Path) -> list[Path]:
    """Write every figure the report supports; returns the written paths."""
    out = Path(out_dir)
    scope = report.get("retained") or report.get("generated")
    paths = []
    if scope:
        paths.append(plot_act_distribution(scope["acts"], out / "act_distribution.png"))
    if convs:
        paths.append(plot_turn_histogram(convs, out / "turn_lengths.png"))
    if report.get("survival"):
        paths.append(plot_survival(report["survival"], out / "survival.png"))
    return paths
