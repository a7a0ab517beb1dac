"""Experiment configuration: one flat dataclass plus a ``key = value`` file format."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import UsageError


@dataclass
class ExperimentConfig:
    # audio / frames
    sample_rate: int = 22050
    clip_seconds: float = 30.0
    n_fft: int = 2048
    hop: int = 512
    frames: int = 1293
    # sequence models
    arch: str = "rnn,brnn,lstm"
    hidden_size: int = 128
    lstm_head: str = "128,64,32"
    epochs: int = 300
    lr: float = 1e-3
    weight_decay: float = 1e-2
    clip_norm: float = 5.0
    dropout: float = 0.2
    batch_size: int = 32
    patience: int = 20
    min_delta: float = 1e-4
    # protocol
    split: str = "0.8,0.1,0.1"
    k_folds: int = 5
    seed: int = 0
    class_count: int = 4
    # baselines
    logreg_l2: float = 1e-4
    logreg_iters: int = 2000
    ridge_alpha: float = 1.0
    lda_shrinkage: float = 0.1
    knn_k: int = 5
    # visualisation
    perplexity: float = 30.0
    tsne_iters: int = 1000
    # augmentation
    augment_specs: str = "noise:20,time_shift:-2..2,pitch_shift:-2|-1|1|2"
    # paths
    manifest: str = ""
    label_names: str = ""
    cache_dir: str = "cache"
    output_dir: str = "out"
    synth_per_class: int = 100
    synth_seconds: float = 3.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        positive = ("sample_rate", "clip_seconds", "n_fft", "hop", "hidden_size", "lr", "batch_size",
                    "k_folds", "class_count", "perplexity", "knn_k", "synth_per_class", "synth_seconds")
        for name in positive:
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("epochs", "weight_decay", "clip_norm", "patience", "min_delta", "logreg_l2",
                     "logreg_iters", "ridge_alpha", "tsne_iters", "frames"):
            if getattr(self, name) < 0:
                raise UsageError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not 0 <= self.dropout < 1:
            raise UsageError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not 0 <= self.lda_shrinkage <= 1:
            raise UsageError(f"lda_shrinkage must lie in [0, 1], got {self.lda_shrinkage}")
        if self.k_folds < 2:
            raise UsageError("k_folds must be at least 2")
        for a in self.archs:
            if a not in ("rnn", "brnn", "lstm"):
                raise UsageError(f"unknown arch {a!r}")
        ratios = self.split_ratios
        if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
            raise UsageError(f"split must be three non-negative ratios summing to 1, got {self.split!r}")

    @property
    def archs(self) -> list[str]:
        return [a.strip() for a in self.arch.split(",") if a.strip()]

    @property
    def head_widths(self) -> tuple[int, ...]:
        try:
            return tuple(int(w) for w in self.lstm_head.split(",") if w.strip())
        except ValueError:
            raise UsageError(f"lstm_head must be comma-separated integers, got {self.lstm_head!r}") from None

    @property
    def split_ratios(self) -> tuple[float, ...]:
        try:
            return tuple(float(r) for r in self.split.split(","))
        except ValueError:
            raise UsageError(f"split must be comma-separated numbers, got {self.split!r}") from None

    @property
    def frame_count(self) -> int | None:
        return self.frames or None

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def coerce(key: str, raw: str):
    if key not in FIELD_TYPES:
        raise UsageError(f"unknown config key {key!r}")
    kind = FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise UsageError(f"config key {key!r}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key = key.strip()
        values[key] = coerce(key, value)
    return (base or ExperimentConfig()).replace(**values)


def load_config(path: str | os.PathLike, base: ExperimentConfig | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"{path}: config file not found")
    return parse_config_text(path.read_text(), base)


def format_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{f.name} = {getattr(cfg, f.name)!s}\n" for f in fields(cfg))
