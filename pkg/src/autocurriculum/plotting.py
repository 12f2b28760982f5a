"""Figures rendered next to the result CSVs.

matplotlib is imported lazily with the Agg backend so library use never
needs a display.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def curve_figure(rows, path, title="") -> None:
    """Mean exploitability per PSRO iteration with a one-standard-deviation band.

    ``rows`` are result-row dicts; one line per (solver, game_kind).
    """
    plt = _pyplot()
    groups = defaultdict(lambda: defaultdict(list))
    for r in rows:
        groups[(r["solver"], r["game_kind"])][int(r["iteration"])].append(float(r["exploitability"]))
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for (solver, kind), by_t in sorted(groups.items()):
        ts = sorted(by_t)
        mean = np.array([np.mean(by_t[t]) for t in ts])
        std = np.array([np.std(by_t[t]) for t in ts])
        label = solver if len({k for _, k in groups}) == 1 else f"{solver} ({kind})"
        ax.plot(ts, mean, label=label)
        ax.fill_between(ts, mean - std, mean + std, alpha=0.2)
    ax.set_xlabel("PSRO iteration")
    ax.set_ylabel("exploitability")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def training_figure(records, path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    steps = [r.step for r in records]
    ax.plot(steps, [r.mean_exploitability for r in records])
    ax.set_xlabel("meta-training step")
    ax.set_ylabel("mean exploitability (training batch)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def sweep_figure(summary, path) -> None:
    """``summary`` rows: dicts with dim, solver, mean, std."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    by_solver = defaultdict(list)
    for r in summary:
        by_solver[r["solver"]].append((int(r["dim"]), float(r["mean"]), float(r["std"])))
    for solver, pts in sorted(by_solver.items()):
        pts.sort()
        d, m, s = map(np.array, zip(*pts))
        ax.errorbar(d, m, yerr=s, marker="o", capsize=3, label=solver)
    ax.set_xlabel("game dimension")
    ax.set_ylabel("final exploitability")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
