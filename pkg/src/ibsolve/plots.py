"""Matplotlib renderings of solver outputs for the report path of the CLI."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_curves", "plot_sweep"]


def plot_curves(path, curves: Sequence[tuple[str, np.ndarray, np.ndarray]], title: str = "",
                xlabel: str = "x", ylabel: str = "") -> Path:
    """One panel with several (label, x, y) lines; complex y is split into Re and Im."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, x, y in curves:
        y = np.asarray(y)
        if np.iscomplexobj(y):
            ax.plot(x, y.real, label=f"Re {label}")
            ax.plot(x, y.imag, "--", label=f"Im {label}")
        else:
            ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sweep(path, axis: str, values, energies, title: str = "", reference=None) -> Path:
    """E against the sweep parameter; failed rows (nan) are skipped."""
    v = np.asarray(values, dtype=float)
    e = np.asarray(energies, dtype=float)
    ok = np.isfinite(e)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(v[ok], e[ok], "o-", label="E")
    if reference is not None:
        rv, re_ = reference
        ax.plot(rv, re_, "s--", label="reference")
    ax.set_xlabel(axis)
    ax.set_ylabel("E")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
