"""Matplotlib rendering of trajectory and sweep CSVs to figure files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# metadata={} on save keeps SVG output free of creation timestamps so
# reruns stay comparable byte-wise
_SAVE_KW = {"dpi": 150, "bbox_inches": "tight"}


def _finite(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(y)
    return x[keep], y[keep]


def plot_columns(table: dict[str, np.ndarray], output, x: str = "t",
                 columns: list[str] | None = None, logy: bool = False,
                 title: str | None = None) -> None:
    """Line chart of the chosen columns of a parsed CSV table."""
    if x not in table:
        raise KeyError(f"x column {x!r} not present")
    cols = columns if columns else [c for c in table if c != x]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for name in cols:
        if name not in table:
            raise KeyError(f"column {name!r} not present")
        xs, ys = _finite(table[x], table[name])
        ax.plot(xs, ys, label=name, linewidth=1.4)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.grid(True, alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.savefig(output, metadata=_metadata_for(output), **_SAVE_KW)
    plt.close(fig)


def plot_run_curves(seed_tables: dict[int, dict[str, np.ndarray]],
                    output) -> None:
    """Per-seed KL and exploitability curves for a finished run."""
    fig, axes = plt.subplots(1, 2, figsize=(10.5, 4.0))
    for ax, col, label in ((axes[0], "kl_ref", "KL to reference"),
                           (axes[1], "exploitability", "exploitability")):
        any_data = False
        for seed in sorted(seed_tables):
            xs, ys = _finite(seed_tables[seed]["t"], seed_tables[seed][col])
            if xs.size:
                ax.plot(xs, ys, label=f"seed {seed}", linewidth=1.2)
                any_data = True
        if any_data and _all_positive(seed_tables, col):
            ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
        if any_data:
            ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(output, metadata=_metadata_for(output), **_SAVE_KW)
    plt.close(fig)


def plot_sweep(axis: str, values: list[float], means: list[float],
               ses: list[float], output) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    means = np.asarray(means, dtype=float)
    ses = np.asarray(ses, dtype=float)
    ax.errorbar(values, means, yerr=ses, marker="o", linewidth=1.4,
                capsize=3)
    ax.set_xlabel(axis)
    ax.set_ylabel("final metric")
    if np.all(np.asarray(values) > 0):
        ax.set_xscale("log")
    if np.all(means[np.isfinite(means)] > 0):
        ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    fig.savefig(output, metadata=_metadata_for(output), **_SAVE_KW)
    plt.close(fig)


def _all_positive(seed_tables, col) -> bool:
    for table in seed_tables.values():
        y = table[col]
        y = y[np.isfinite(y)]
        if y.size and y.min() <= 0:
            return False
    return True


def _metadata_for(output) -> dict | None:
    if str(output).endswith(".svg"):
        return {"Date": None}
    return None
