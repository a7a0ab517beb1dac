"""SVG renderings of the CSV artifacts (accuracy curves, fold losses, baseline bars, ROC, t-SNE)."""

from __future__ import annotations

import io
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .audio_io import atomic_write_text  # noqa: E402

# fixed ids and no timestamp, so equal inputs give byte-identical files
_RC = {"svg.hashsalt": "moodwave", "svg.fonttype": "none"}


def _save(fig, path: str | os.PathLike) -> None:
    buf = io.StringIO()
    with plt.rc_context(_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    atomic_write_text(path, buf.getvalue())


def plot_train_log(log, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(log.epoch, log.train_acc, label="train")
    ax.plot(log.epoch, log.eval_acc, label="eval")
    ax.set_xlabel("epoch")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    ax.set_title(title)
    ax.legend()
    _save(fig, path)


def plot_fold_losses(losses_by_arch: dict[str, list[float]], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for arch, losses in losses_by_arch.items():
        ax.plot(np.arange(1, len(losses) + 1), losses, marker="o", label=arch)
    ax.set_xlabel("fold")
    ax.set_ylabel("validation loss")
    ax.legend()
    _save(fig, path)


def plot_bars(results: dict[str, float], path, ylabel: str = "accuracy") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    names = list(results)
    ax.bar(names, [results[n] for n in names])
    ax.set_ylim(0, 1)
    ax.set_ylabel(ylabel)
    _save(fig, path)


def plot_roc(curves, path, class_names=None) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    for c, curve in enumerate(curves):
        name = class_names[c] if class_names else str(c)
        auc = "undefined" if not curve.defined else f"{curve.auc:.3f}"
        ax.step(curve.fpr, curve.tpr, where="post", label=f"{name} (AUC {auc})")
    ax.plot([0, 1], [0, 1], color="grey", linestyle=":")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.legend(loc="lower right")
    _save(fig, path)


def plot_embedding(y: np.ndarray, labels, path, class_names=None) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    labels = np.asarray(labels)
    for c in np.unique(labels):
        sel = labels == c
        name = class_names[c] if class_names else str(c)
        ax.scatter(y[sel, 0], y[sel, 1], s=8, label=name)
    ax.legend()
    _save(fig, path)
