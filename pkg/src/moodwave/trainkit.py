"""Splits, per-fold normalisation, training loops, early stopping and cross-validation."""

from __future__ import annotations

import io
import csv
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import ExperimentConfig
from .errors import DataError
from .seeds import SHUFFLE, SPLIT, rng_for
from .seqnet import AdamW, SequenceClassifier, build_model, clip_grad_norm, cross_entropy

STD_FLOOR = 1e-8
CLIPPED_ARCHS = ("rnn", "brnn")


# --------------------------------------------------------------------------- #
# Splits


@dataclass
class SplitPlan:
    train: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.int64))
    eval: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.int64))
    test: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.int64))
    folds: list[np.ndarray] | None = None
    seed: int = 0

    def fold(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(train, validation) indices with fold ``i`` held out."""
        if self.folds is None:
            raise ValueError("not a k-fold plan")
        train = np.concatenate([f for j, f in enumerate(self.folds) if j != i])
        return train, self.folds[i]

    def remap(self, new_position: np.ndarray) -> SplitPlan:
        """The same plan after the dataset is reordered so that old index ``i`` sits at ``new_position[i]``."""
        m = lambda a: new_position[a]  # noqa: E731
        folds = None if self.folds is None else [m(f) for f in self.folds]
        return SplitPlan(m(self.train), m(self.eval), m(self.test), folds, self.seed)


def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    exact = weights / weights.sum() * total if weights.sum() else np.zeros_like(weights, dtype=float)
    base = np.floor(exact).astype(np.int64)
    short = total - base.sum()
    order = np.argsort(-(exact - base), kind="stable")
    base[order[:short]] += 1
    return base


def make_split(labels: Sequence[int] | int, ratios: Sequence[float] = (0.8, 0.1, 0.1), seed: int = 0) -> SplitPlan:
    """Seeded train/eval/test split, stratified by label.

    ``labels`` may be a label sequence or just the dataset size (a single
    class). Split totals are ``round(N * ratio)`` for eval and test, the rest
    is training, and each class's share of a split is within one sample of
    its proportional quota.
    """
    if abs(sum(ratios) - 1.0) > 1e-9 or len(ratios) != 3:
        raise ValueError(f"ratios must be three values summing to 1, got {ratios}")
    labels = np.zeros(labels, dtype=np.int64) if isinstance(labels, (int, np.integer)) else np.asarray(labels)
    n = labels.size
    n_eval = int(round(n * ratios[1]))
    n_test = int(round(n * ratios[2]))
    n_splits = sum(r > 0 for r in ratios)
    classes, counts = np.unique(labels, return_counts=True)
    for c, k in zip(classes, counts):
        if k < n_splits:
            raise DataError(f"class {c} has {k} samples, fewer than the {n_splits} splits")

    eval_quota = _largest_remainder(counts.astype(float), n_eval)
    test_quota = _largest_remainder(counts.astype(float), n_test)
    rng = rng_for(seed, SPLIT)
    parts = {"train": [], "eval": [], "test": []}
    for c, qe, qt in zip(classes, eval_quota, test_quota):
        idx = rng.permutation(np.flatnonzero(labels == c))
        parts["eval"].append(idx[:qe])
        parts["test"].append(idx[qe:qe + qt])
        parts["train"].append(idx[qe + qt:])
    out = {k: np.sort(np.concatenate(v)).astype(np.int64) for k, v in parts.items()}
    return SplitPlan(out["train"], out["eval"], out["test"], seed=seed)


def make_kfold(n: int, k: int = 5, seed: int = 0) -> SplitPlan:
    """Seeded shuffle into ``k`` folds whose sizes differ by at most one."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"cannot make {k} folds from {n} samples")
    perm = rng_for(seed, SPLIT, k).permutation(n)
    folds = [np.sort(f).astype(np.int64) for f in np.array_split(perm, k)]
    return SplitPlan(folds=folds, seed=seed)


# --------------------------------------------------------------------------- #
# Normalisation


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray


def fit_norm(x_train: np.ndarray) -> NormStats:
    """Per-feature-row mean and std over every frame of every training clip (N, D, T)."""
    x_train = np.asarray(x_train, dtype=np.float64)
    if x_train.shape[0] == 0:
        raise ValueError("cannot fit normalisation on an empty training set")
    mean = x_train.mean(axis=(0, 2))
    std = np.maximum(x_train.std(axis=(0, 2)), STD_FLOOR)
    return NormStats(mean, std)


def apply_norm(x: np.ndarray, stats: NormStats) -> np.ndarray:
    return (x - stats.mean[:, None]) / stats.std[:, None]


# --------------------------------------------------------------------------- #
# Training


@dataclass
class TrainLog:
    epoch: list[int] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    eval_acc: list[float] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    eval_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stop_epoch: int = 0
    wall_time: float = 0.0

    def __len__(self) -> int:
        return len(self.epoch)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_acc", "eval_acc", "train_loss", "eval_loss"])
        for row in zip(self.epoch, self.train_acc, self.eval_acc, self.train_loss, self.eval_loss):
            w.writerow([row[0], *(repr(float(v)) for v in row[1:])])
        return buf.getvalue()


def early_stop(losses: Sequence[float], patience: int = 20, min_delta: float = 1e-4) -> bool:
    """True once the best loss has not improved by more than ``min_delta`` for ``patience`` epochs."""
    if patience < 1:
        raise ValueError("patience must be at least 1")
    best, wait = np.inf, 0
    for loss in losses:
        if loss < best - min_delta:
            best, wait = loss, 0
        else:
            wait += 1
    return wait >= patience


def evaluate_model(model: SequenceClassifier, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """(accuracy, mean cross-entropy) in inference mode."""
    if len(y) == 0:
        return float("nan"), float("nan")
    logits = model.predict_logits(x)
    loss, _ = cross_entropy(logits, y)
    return float(np.mean(np.argmax(logits, axis=1) == y)), loss


def fit_model(
    arch: str,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_eval: np.ndarray,
    y_eval: np.ndarray,
    cfg: ExperimentConfig,
    early_stopping: bool = True,
    target_train_acc: float | None = None,
) -> tuple[SequenceClassifier, TrainLog]:
    """Train one model on already-normalised data.

    Each epoch runs shuffled minibatches (gradient clipping for RNN and
    BRNN only), then scores the training and evaluation sets in inference
    mode. The parameters of the epoch with the best evaluation accuracy
    (ties: lower evaluation loss, then earlier) are restored at the end.
    ``target_train_acc`` ends training as soon as the training accuracy
    reaches it.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    x_eval = np.asarray(x_eval, dtype=np.float64)
    y_eval = np.asarray(y_eval, dtype=np.int64)
    kw = {"head_widths": cfg.head_widths} if arch == "lstm" else {}
    model = build_model(arch, x_train.shape[1], cfg.hidden_size, cfg.class_count, cfg.dropout, cfg.seed, **kw)
    log = TrainLog()
    if cfg.epochs == 0:
        return model, log
    n = len(y_train)
    if n < 2 and arch == "lstm":
        raise DataError("LSTM training needs at least 2 training samples for batch normalisation")
    opt = AdamW(lr=cfg.lr, weight_decay=cfg.weight_decay)
    shuffle = rng_for(cfg.seed, SHUFFLE)
    n_batches = max(1, -(-n // cfg.batch_size))
    has_eval = len(y_eval) > 0
    best_key, best_state = None, None
    start = time.perf_counter()

    for epoch in range(1, cfg.epochs + 1):
        for batch in np.array_split(shuffle.permutation(n), n_batches):
            loss, grads, _ = model.loss_and_grads(x_train[batch], y_train[batch])
            if arch in CLIPPED_ARCHS and cfg.clip_norm > 0:
                grads, _ = clip_grad_norm(grads, cfg.clip_norm)
            opt.step(model.params, grads)

        tr_acc, tr_loss = evaluate_model(model, x_train, y_train)
        ev_acc, ev_loss = evaluate_model(model, x_eval, y_eval)
        log.epoch.append(epoch)
        log.train_acc.append(tr_acc)
        log.train_loss.append(tr_loss)
        log.eval_acc.append(ev_acc)
        log.eval_loss.append(ev_loss)
        log.stop_epoch = epoch

        if has_eval:
            key = (ev_acc, -ev_loss)
            if best_key is None or key > best_key:
                best_key, best_state, log.best_epoch = key, model.copy_state(), epoch
            if early_stopping and cfg.patience > 0 and early_stop(log.eval_loss, cfg.patience, cfg.min_delta):
                break
        else:
            log.best_epoch = epoch
        if target_train_acc is not None and tr_acc >= target_train_acc:
            break

    if best_state is not None:
        model.load_state(best_state)
    log.wall_time = time.perf_counter() - start
    return model, log


def train_model(
    arch: str,
    x: np.ndarray,
    y: np.ndarray,
    split: SplitPlan,
    cfg: ExperimentConfig,
    early_stopping: bool = True,
) -> tuple[SequenceClassifier, TrainLog]:
    """``fit_model`` on the train/eval parts of ``split`` (data must already be normalised)."""
    y = np.asarray(y)
    return fit_model(arch, x[split.train], y[split.train], x[split.eval], y[split.eval], cfg, early_stopping)


@dataclass
class CVResult:
    fold_losses: list[float]
    logs: list[TrainLog]

    @property
    def mean_loss(self) -> float:
        return float(np.mean(self.fold_losses))

    def to_csv(self) -> str:
        lines = ["fold,val_loss"]
        lines += [f"{i + 1},{loss!r}" for i, loss in enumerate(self.fold_losses)]
        return "\n".join(lines) + "\n"


def run_cv(arch: str, x: np.ndarray, y: np.ndarray, cfg: ExperimentConfig, plan: SplitPlan | None = None) -> CVResult:
    """k-fold cross-validation with normalisation fitted on the training folds only.

    Each fold trains with early stopping on its validation fold and records
    the validation loss of the restored best model.
    """
    y = np.asarray(y, dtype=np.int64)
    plan = make_kfold(len(y), cfg.k_folds, cfg.seed) if plan is None else plan
    losses, logs = [], []
    for i in range(len(plan.folds)):
        tr, va = plan.fold(i)
        stats = fit_norm(x[tr])
        x_tr, x_va = apply_norm(x[tr], stats), apply_norm(x[va], stats)
        model, log = fit_model(arch, x_tr, y[tr], x_va, y[va], cfg)
        _, val_loss = evaluate_model(model, x_va, y[va])
        losses.append(val_loss)
        logs.append(log)
    return CVResult(losses, logs)
