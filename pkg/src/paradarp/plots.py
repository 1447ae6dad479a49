"""Figure rendering for cross-evaluation reports (PNG files next to the CSV)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from paradarp.report import CrossEvaluation


def render_report_figures(rows: Sequence[CrossEvaluation], out_dir,
                          stem: str = "report") -> list[Path]:
    """Write the three standard figures; returns the created paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    periods = [r.period for r in rows]
    x = np.arange(len(periods))
    written = []

    fig, ax = plt.subplots(figsize=(max(6.0, 0.9 * len(periods)), 3.6))
    width = 0.27
    raw = [r.um_raw if r.um_raw is not None else 0.0 for r in rows]
    ax.bar(x - width, raw, width, label="raw data", color="#9aa5b1")
    ax.bar(x, [r.um_um for r in rows], width, label="user model", color="#2f6fba")
    ax.bar(x + width, [r.um_om for r in rows], width, label="operator model",
           color="#c9572b")
    ax.set_ylabel("deviation (min)")
    ax.set_title("Scheduled-vs-actual deviation by period")
    written.append(_finish(fig, ax, x, periods, out_dir / f"{stem}_deviation.png"))

    fig, ax = plt.subplots(figsize=(max(6.0, 0.9 * len(periods)), 3.6))
    width = 0.38
    ax.bar(x - width / 2, [r.om_um for r in rows], width, label="user model",
           color="#2f6fba")
    ax.bar(x + width / 2, [r.om_om for r in rows], width, label="operator model",
           color="#c9572b")
    ax.set_ylabel("operating time (min)")
    ax.set_title("Total vehicle operating time by period")
    written.append(_finish(fig, ax, x, periods, out_dir / f"{stem}_operating.png"))

    fig, ax = plt.subplots(figsize=(max(6.0, 0.9 * len(periods)), 3.6))
    ax.bar(x - width / 2, [r.v_um for r in rows], width, label="user model",
           color="#2f6fba")
    ax.bar(x + width / 2, [r.v_om for r in rows], width, label="operator model",
           color="#c9572b")
    ax.set_ylabel("vehicles used")
    ax.set_title("Fleet usage by period")
    written.append(_finish(fig, ax, x, periods, out_dir / f"{stem}_vehicles.png"))
    return written


def _finish(fig, ax, x, periods, path: Path) -> Path:
    ax.set_xticks(x)
    ax.set_xticklabels(periods, rotation=45, ha="right", fontsize=8)
    ax.legend(fontsize=8)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
