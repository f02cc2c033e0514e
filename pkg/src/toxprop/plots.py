"""Figure rendering for CLI reports.

Every function writes a PNG next to the delimited output it illustrates and
returns the path it wrote. Rendering uses the Agg backend, so it works
headless; nothing here opens a window.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np  # noqa: E402

from .beta import PdfCurve  # noqa: E402
from .metrics import PrCurve  # noqa: E402
from .models import TrainReport  # noqa: E402


def save_pdf_curve(curve: PdfCurve, path: str | Path, title: str = "Predicted label density") -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(curve.y, curve.density, lw=2)
    ax.fill_between(curve.y, curve.density, alpha=0.2)
    ax.set_xlabel("toxicity propensity")
    ax.set_ylabel("density")
    ax.set_title(title)
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(bottom=0.0)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_pr_curves(curves: Mapping[str, PrCurve], path: str | Path) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for name, curve in curves.items():
        recall = [p[0] for p in curve.points()]
        precision = [p[1] for p in curve.points()]
        ax.plot(recall, precision, drawstyle="steps-post",
                label=f"{name} (AUC@PR {curve.area:.3f})")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.05)
    ax.set_title("Precision-recall")
    ax.legend(loc="lower left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_training_curve(report: TrainReport, path: str | Path) -> Path:
    path = Path(path)
    epochs = np.arange(report.epochs_run)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, report.train_loss, label="train loss", lw=2)
    val = np.asarray(report.val_loss, dtype=np.float64)
    if not np.all(np.isnan(val)):
        ax.plot(epochs, val, label="validation loss", lw=2)
    ax.axvline(report.best_epoch, color="grey", ls="--", lw=1, label=f"best epoch {report.best_epoch}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title("Training curve")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_score_scatter(
    labels: Sequence[float], predictions: Sequence[float], path: str | Path
) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(4.8, 4.8))
    ax.scatter(labels, predictions, s=8, alpha=0.4, edgecolors="none")
    ax.plot([0, 1], [0, 1], color="grey", ls="--", lw=1)
    ax.set_xlabel("label")
    ax.set_ylabel("prediction")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_title("Predictions vs labels")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_label_histogram(
    labels: Sequence[float], path: str | Path, curve: PdfCurve | None = None
) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(labels, bins=30, range=(0.0, 1.0), density=True, alpha=0.6, label="labels")
    if curve is not None:
        ax.plot(curve.y, curve.density, lw=2, label="fitted density")
        ax.legend()
    ax.set_xlabel("toxicity propensity")
    ax.set_ylabel("density")
    ax.set_title("Label distribution")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
