#!/usr/bin/env python3
"""Plots the CSV files written by the examples or the CLI.

    python3 crates/core/examples/plot.py [DIR]

DIR defaults to target/examples. Each figure is drawn when its input exists:
best_response.csv, sweep.csv and trajectory.csv. Figures are saved next to
the inputs as PNG.
"""

import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def best_response(rows, out):
    fig, ax = plt.subplots(figsize=(5, 5))
    for player, label in (("1", "P1: p*(q)"), ("2", "P2: q*(p)")):
        pts = [(float(r["opponent"]), float(r["response"])) for r in rows if r["player"] == player]
        if player == "1":
            ax.plot([r for _, r in pts], [o for o, _ in pts], label=label)
        else:
            ax.plot([o for o, _ in pts], [r for _, r in pts], label=label)
    ax.set(xlabel="p", ylabel="q", xlim=(0, 1), ylim=(0, 1), title="best responses")
    ax.legend()
    fig.savefig(out, dpi=120, bbox_inches="tight")


def sweep(rows, out):
    l11 = sorted({float(r["l11"]) for r in rows})
    l22 = sorted({float(r["l22"]) for r in rows})
    grid = {(float(r["l11"]), float(r["l22"])): r for r in rows}
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for ax, key, name in ((axes[0], "p_star", "p*"), (axes[1], "q_star", "q*")):
        z = [[float(grid[(a, b)][key]) for b in l22] for a in l11]
        im = ax.imshow(z, origin="lower", aspect="auto", extent=(l22[0], l22[-1], l11[0], l11[-1]))
        ax.set(xlabel="λ22", ylabel="λ11", title=name)
        fig.colorbar(im, ax=ax)
    fig.savefig(out, dpi=120, bbox_inches="tight")


def trajectory(rows, out):
    t = [float(r["time"]) for r in rows]
    fig, axes = plt.subplots(3, 1, figsize=(10, 7), sharex=True)
    axes[0].plot(t, [float(r["x1"]) for r in rows], lw=0.6, label="x1")
    axes[0].plot(t, [float(r["xhat1_1"]) for r in rows], lw=0.6, label="x̂1 (P1 estimate)")
    axes[0].legend(loc="upper right")
    axes[1].plot(t, [float(r["e1_1"]) for r in rows], lw=0.6, label="e1")
    axes[1].plot(t, [float(r["e2_1"]) for r in rows], lw=0.6, label="e2")
    axes[1].legend(loc="upper right")
    axes[2].plot(t, [float(r["u1_1"]) for r in rows], lw=0.6, label="u1")
    axes[2].plot(t, [float(r["u2_1"]) for r in rows], lw=0.6, label="u2")
    axes[2].legend(loc="upper right")
    axes[2].set_xlabel("time [s]")
    fig.savefig(out, dpi=120, bbox_inches="tight")


def main():
    root = Path(sys.argv[1] if len(sys.argv) > 1 else "target/examples")
    for name, draw in (("best_response", best_response), ("sweep", sweep), ("trajectory", trajectory)):
        src = root / f"{name}.csv"
        if src.exists():
            draw(read(src), root / f"{name}.png")
            print(f"wrote {root / name}.png")


if __name__ == "__main__":
    main()
