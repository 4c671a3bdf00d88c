"""Matplotlib renderings of curves, training traces, and error matrices.

Every function writes a figure file next to the delimited data the CLI
produces, so a report directory is self-contained.  The Agg backend is
forced so rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .mc import GuessingCurve
from .psm import MAX_DECADE_BIN, ErrorMatrix
from .training import TrainingReport


def save_guessing_curves(curves: list[GuessingCurve], path,
                         labels: list[str] | None = None,
                         title: str = "Guessing curves") -> None:
    """Coverage vs. log10 guesses, one line per curve."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, curve in enumerate(curves):
        label = labels[i] if labels else (curve.model_id or f"curve {i}")
        ax.plot(np.log10(curve.guesses), 100.0 * curve.coverage, label=label)
    ax.set_xlabel("log10(guesses)")
    ax.set_ylabel("guessed passwords (%)")
    ax.set_ylim(0, 100)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_training_curve(report: TrainingReport, path,
                        title: str = "Training loss") -> None:
    """Per-epoch mean loss, with the per-step trace faint behind it."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if report.steps:
        xs = np.linspace(0, len(report.epoch_losses), len(report.steps),
                         endpoint=False)
        ax.plot(xs, [s.loss for s in report.steps], color="tab:blue",
                alpha=0.25, linewidth=0.8, label="step loss")
    epochs = np.arange(1, len(report.epoch_losses) + 1)
    ax.plot(epochs, report.epoch_losses, marker="o", color="tab:blue",
            label="epoch mean")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss (nats/token)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_error_matrix(matrix: ErrorMatrix, path,
                      title: str = "Meter vs. oracle decade bins") -> None:
    """Heatmap of oracle bin (rows) against meter bin (columns).

    Cells above the diagonal are overestimates (unsafe), below are
    underestimates (safe); the diagonal is accurate.
    """
    fig, ax = plt.subplots(figsize=(7, 6))
    counts = matrix.counts.astype(float)
    shown = np.ma.masked_where(counts == 0, counts)
    im = ax.imshow(shown, origin="lower", cmap="viridis")
    ax.plot([0, MAX_DECADE_BIN], [0, MAX_DECADE_BIN], color="limegreen",
            linewidth=1.0, alpha=0.8)
    ax.set_xlabel("meter bin (log10 guesses)")
    ax.set_ylabel("oracle bin (log10 guesses)")
    rates = matrix.rates()
    ax.set_title(f"{title}\naccurate {rates['accurate']:.1%}, "
                 f"safe {rates['safe']:.1%}, unsafe {rates['unsafe']:.1%}")
    fig.colorbar(im, ax=ax, label="passwords")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
