"""Figure rendering for run traces (written next to the CSV output)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .trace import RunRecord  # noqa: E402


def convergence_figure(records: dict[str, RunRecord], path,
                       title: str = "") -> None:
    """Squared iterate distance to the optimum versus iterations, log scale."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, rec in records.items():
        k = rec.column("k")
        d = rec.column("dist_sq")
        ax.semilogy(k, d, label=label, linewidth=1.2)
    ax.set_xlabel("iteration k")
    ax.set_ylabel(r"$\|v_k - x^*\|^2$")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def gap_increment_figure(records: dict[str, RunRecord], path,
                         title: str = "") -> None:
    """Estimate-sequence gap increase per iteration, log scale."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, rec in records.items():
        k = rec.column("k")[1:]
        g = rec.column("gap_increment")[1:]
        ax.semilogy(k, g, label=label, linewidth=1.2)
    ax.set_xlabel("iteration k")
    ax.set_ylabel("gap increment")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
