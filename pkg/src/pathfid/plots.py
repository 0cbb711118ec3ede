"""Figures for the CLI report path: segment-EM training trace and support-F1 buckets.

Rendering is kept out of the metrics module; these functions only consume the
rows it already produces.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed metadata so repeated runs write identical files
_PNG_META = {"Software": None}
SEGMENT_ORDER = ("T1", "F1", "T2", "F2", "Answer")


def _segment_keys(trace: Sequence[dict]) -> list[str]:
    keys = {k for row in trace for k in row if k not in ("step", "loss", "grad_norm")}
    ordered = [k for k in SEGMENT_ORDER if k in keys]
    return ordered + sorted(keys - set(ordered))


def plot_trace(trace: Sequence[dict], path: str | Path) -> Path | None:
    """Per-segment EM against training step. Returns None when there is nothing to draw."""
    keys = _segment_keys(trace)
    if not trace or not keys:
        return None
    steps = [row["step"] for row in trace]
    fig, ax = plt.subplots(figsize=(6, 4))
    for k in keys:
        ax.plot(steps, [100 * row.get(k, float("nan")) for row in trace], marker="o", markersize=3, label=k)
    ax.set_xlabel("training step")
    ax.set_ylabel("exact match (%)")
    ax.set_ylim(-2, 102)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_buckets(buckets: Sequence[dict], path: str | Path, question_type: str = "all") -> Path | None:
    """Answer EM/F1 per support-F1 bucket, with bucket sizes on a second axis."""
    rows = [b for b in buckets if b["question_type"] == question_type]
    if not rows or all(b["answer_em"] is None for b in rows):
        return None
    x = [10 * b["bucket"] for b in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, label in (("answer_em", "answer EM"), ("answer_f1", "answer F1")):
        pts = [(xi, 100 * b[key]) for xi, b in zip(x, rows) if b[key] is not None]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
    ax.set_xlabel("support F1 bucket (upper edge, %)")
    ax.set_ylabel("answer score (%)")
    ax.set_xticks(x)
    ax.set_ylim(-2, 102)
    ax.grid(alpha=0.3)
    twin = ax.twinx()
    twin.bar(x, [b["count"] for b in rows], width=6, alpha=0.2, color="gray")
    twin.set_ylabel("instances")
    ax.legend(loc="upper left")
    ax.set_title(f"question type: {question_type}")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
    return path
