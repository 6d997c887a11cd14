"""Matplotlib rendering of traces and termination-count tables.

Figures are written next to the CSV outputs by the harness report paths;
they carry no data of their own (the CSV is authoritative).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_trace_figure(trace, path, title="", eps=None):
    ks = trace.ks()
    norms = trace.grad_norms()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(ks, norms, marker="o", markersize=3, linewidth=1.0)
    if eps is not None:
        ax.axhline(eps, color="tab:red", linestyle="--", linewidth=0.8, label=f"eps = {eps:g}")
        ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("iteration k")
    ax.set_ylabel("gradient norm")
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_table_figure(rows, path, title=""):
    """Termination counts vs tolerance, one line per (rule, level)."""
    series = {}
    for row in rows:
        if row.k_star is not None:
            series.setdefault((row.rule, row.level), []).append((row.eps, row.k_star))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for (rule, level), pts in sorted(series.items()):
        pts.sort(key=lambda p: -p[0])
        ax.plot(
            [p[0] for p in pts],
            [p[1] for p in pts],
            marker="o",
            markersize=3,
            linewidth=1.0,
            label=f"{rule}, L={level}",
        )
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("tolerance eps")
    ax.set_ylabel("iterations to termination")
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
