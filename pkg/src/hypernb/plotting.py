"""Matplotlib rendering of spectra and sweep curves to image files."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_spectrum(eigenvalues: np.ndarray, radius: float | None, path: str,
                  title: str = "") -> None:
    """Scatter the complex spectrum with the bulk circle overlaid."""
    vals = np.asarray(eigenvalues, dtype=complex)
    fig, ax = plt.subplots(figsize=(5.2, 5.0))
    ax.scatter(vals.real, vals.imag, s=6, alpha=0.6, color="tab:blue")
    if radius:
        theta = np.linspace(0, 2 * math.pi, 400)
        ax.plot(radius * np.cos(theta), radius * np.sin(theta),
                color="tab:red", lw=1.0, ls="--", label=f"radius {radius:.3f}")
        ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_aspect("equal")
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sweep(rows: list[dict], threshold: float | None, path: str,
               param_name: str = "param") -> None:
    """Overlap-vs-parameter curves, one line per method, threshold marked."""
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    methods = sorted({r["method"] for r in rows})
    for method in methods:
        pts = sorted((r for r in rows if r["method"] == method),
                     key=lambda r: r["param"])
        x = [r["param"] for r in pts]
        y = [r["mean_overlap"] for r in pts]
        err = [r["stderr"] for r in pts]
        ax.errorbar(x, y, yerr=err, marker="o", ms=4, capsize=2, label=method)
    if threshold is not None:
        ax.axvline(threshold, color="k", ls="--", lw=1.0, alpha=0.7)
    ax.set_xlabel(param_name)
    ax.set_ylabel("overlap Q")
    ax.set_ylim(-0.1, 1.05)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
