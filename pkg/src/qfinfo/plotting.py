"""Report figures.  CSV files are the authoritative outputs; these are views."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
    "legend.frameon": False,
    "svg.hashsalt": "qfinfo",
    "svg.fonttype": "none",
}

MODE_COLORS = {"fidelity": "tab:blue", "qfi": "tab:red"}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path


def fidelity_histogram(bins, path, title: str | None = None) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.bar(bins.lo, bins.probability, width=bins.hi - bins.lo, align="edge", color="tab:blue")
        ax.set_yscale("log")
        ax.set_xlabel("fidelity")
        ax.set_ylabel("relative frequency")
        ax.set_xlim(0, 1)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def qfi_curve(curve, path, bins=None) -> Path:
    """Raw information per bin as points, smoothed curve as a line."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if bins is not None:
            m = bins.count > 0
            ax.scatter(bins.mean_fidelity[m], curve.raw_at(bins.mean_fidelity[m]), s=8,
                       color="tab:blue", label="tree estimate")
        else:
            ax.scatter(curve.grid[::5], curve.qfi_raw[::5], s=6, color="tab:blue", label="tree estimate")
        ax.plot(curve.grid, curve.qfi_smooth, color="tab:red", lw=1.8, label="smoothed")
        ax.set_xlabel("fidelity")
        ax.set_ylabel("functional information [bits]")
        n = curve.n_qubits
        if n:
            ax.set_title(f"n = {n} qubits")
        ax.legend()
        return _save(fig, path)


def evolution_history(history, path, title: str | None = None) -> Path:
    gens = [h.generation for h in history]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(gens, [h.mean_fid for h in history], label="mean fidelity")
        ax.plot(gens, [h.mean_rob for h in history], label="mean robustness")
        ax.plot(gens, [h.mean_sv for h in history], label="mean $S_v$")
        ax.set_xlabel("generation")
        ax.set_ylim(-0.02, 1.02)
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def metric_boxplot(values_by_mode: dict[str, list[float]], metric: str, path) -> Path:
    modes = list(values_by_mode)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 4.0))
        box = ax.boxplot([values_by_mode[m] for m in modes], patch_artist=True)
        ax.set_xticks(range(1, len(modes) + 1), modes)
        for patch, mode in zip(box["boxes"], modes):
            patch.set_facecolor(MODE_COLORS.get(mode, "tab:gray"))
            patch.set_alpha(0.5)
        ax.set_ylabel(metric)
        return _save(fig, path)


def score_scatter(fidelity, score, path) -> Path:
    fidelity = np.asarray(fidelity)
    score = np.asarray(score)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.scatter(fidelity, score, s=4, alpha=0.4, color="tab:red")
        if len(score):
            j = int(np.argmax(score))
            ax.scatter([fidelity[j]], [score[j]], s=40, marker="*", color="k", label="max score")
            ax.legend()
        ax.set_xlabel("fidelity")
        ax.set_ylabel("QFI score")
        return _save(fig, path)
