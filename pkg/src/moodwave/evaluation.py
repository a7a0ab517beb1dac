"""Accuracy, confusion matrices and one-vs-rest ROC curves."""

from __future__ import annotations

import io
import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError


def accuracy(preds, labels) -> float:
    preds, labels = np.asarray(preds), np.asarray(labels)
    if preds.shape != labels.shape:
        raise ValueError(f"length mismatch: {preds.shape} vs {labels.shape}")
    if preds.size == 0:
        raise DataError("accuracy of an empty prediction set is undefined")
    return float(np.count_nonzero(preds == labels) / preds.size)


def confusion(preds, labels, n_classes: int) -> np.ndarray:
    """C x C counts with rows = true class and columns = predicted class."""
    preds, labels = np.asarray(preds, dtype=np.int64), np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape:
        raise ValueError(f"length mismatch: {preds.shape} vs {labels.shape}")
    for name, arr in (("prediction", preds), ("label", labels)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise ValueError(f"{name} outside [0, {n_classes})")
    out = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(out, (labels, preds), 1)
    return out


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # first threshold is +inf (nothing predicted positive)
    auc: float  # nan when the class has no positives or no negatives
    defined: bool


def roc_curve(scores, positive) -> RocCurve:
    """ROC for one binary problem; a sample is positive when its score >= threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    if not np.all(np.isfinite(scores)):
        raise NumericalError("non-finite scores")
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    order = np.argsort(-scores, kind="stable")
    s, p = scores[order], positive[order]
    # last index of each run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1] if s.size else np.array([], dtype=np.int64)
    tp = np.cumsum(p)[ends]
    fp = (ends + 1) - tp
    tps = np.r_[0, tp].astype(np.float64)
    fps = np.r_[0, fp].astype(np.float64)
    thresholds = np.r_[np.inf, s[ends]]
    defined = n_pos > 0 and n_neg > 0
    tpr = tps / n_pos if n_pos else np.zeros_like(tps)
    fpr = fps / n_neg if n_neg else np.zeros_like(fps)
    auc = float(np.trapezoid(tpr, fpr)) if defined else float("nan")
    return RocCurve(fpr, tpr, thresholds, auc, defined)


def roc_ovr(scores, labels, n_classes: int | None = None) -> list[RocCurve]:
    """One-vs-rest ROC curve per class from an N x C score matrix."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.ndim != 2 or scores.shape[0] != labels.size:
        raise ValueError(f"scores shape {scores.shape} does not match {labels.size} labels")
    n_classes = scores.shape[1] if n_classes is None else n_classes
    return [roc_curve(scores[:, c], labels == c) for c in range(n_classes)]


def roc_csv(curves: list[RocCurve]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "fpr", "tpr", "threshold"])
    for c, curve in enumerate(curves):
        for f, t, th in zip(curve.fpr, curve.tpr, curve.thresholds):
            w.writerow([c, repr(float(f)), repr(float(t)), repr(float(th))])
    return buf.getvalue()


def auc_csv(curves: list[RocCurve]) -> str:
    lines = ["class,auc"] + [f"{c},{curve.auc!r}" for c, curve in enumerate(curves)]
    return "\n".join(lines) + "\n"
