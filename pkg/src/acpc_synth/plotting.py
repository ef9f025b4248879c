"""Figures for simulation reports (written to PNG files, no display needed)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_trajectory(reports, value, path) -> None:
    """Cumulative ACPC after each round, one line per run, with the optimum as reference."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for rep in reports:
        xs = range(1, len(rep.trajectory) + 1)
        ax.plot(xs, rep.trajectory, lw=0.8, alpha=0.7, label=f"seed {rep.seed}" if len(reports) <= 8 else None)
    if value is not None:
        ax.axhline(value, color="k", ls="--", lw=1, label="optimal value")
    ax.set_xlabel("round")
    ax.set_ylabel("cost / (cycles + 1)")
    ax.set_title("Cumulative average cost per surveillance cycle")
    ax.legend(fontsize=7, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_cycles(reports, path) -> None:
    """Phase-2 surveillance cycles used in each round (log scale)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for rep in reports:
        rounds = [r["round"] for r in rep.rounds]
        cycles = [r["cycles"] for r in rep.rounds]
        ax.plot(rounds, cycles, ".", ms=3, alpha=0.7)
    ax.set_yscale("log")
    ax.set_xlabel("round")
    ax.set_ylabel("cycles in phase 2")
    ax.set_title("Surveillance cycles per round")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
