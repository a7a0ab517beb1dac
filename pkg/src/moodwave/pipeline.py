"""Manifest to feature cache to arrays: the glue shared by the CLI commands."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import Manifest, ManifestEntry, load_clip, load_manifest
from .config import ExperimentConfig
from .errors import DataError, UsageError
from .features import FrameConfig, extract_all, read_features, thread_count, write_features
from .trainkit import SplitPlan, make_split

CACHE_SUFFIX = ".mwf"
SPLIT_NAMES = ("train", "eval", "test")


def frames_for(cfg: ExperimentConfig) -> int:
    """Configured frame count; 0 means derive it from the clip length."""
    if cfg.frames:
        return cfg.frames
    return 1 + int(round(cfg.clip_seconds * cfg.sample_rate)) // cfg.hop


def cache_name(entry: ManifestEntry, root: Path) -> str:
    """Cache file name from the clip path relative to ``root``, separators replaced by ``__``."""
    try:
        rel = os.path.relpath(entry.path, root)
    except ValueError:
        rel = str(entry.path)
    rel = rel.replace("..", "up")
    stem = os.path.splitext(rel)[0]
    return stem.replace(os.sep, "__").replace("/", "__") + CACHE_SUFFIX


def cache_path(cfg: ExperimentConfig, entry: ManifestEntry) -> Path:
    return Path(cfg.cache_dir) / cache_name(entry, Path(cfg.manifest).resolve().parent)


def open_manifest(cfg: ExperimentConfig) -> Manifest:
    if not cfg.manifest:
        raise UsageError("no manifest given (use --manifest PATH or a config file)")
    manifest = load_manifest(cfg.manifest, cfg.label_names or None)
    manifest.validate()
    if manifest.class_count != cfg.class_count:
        raise UsageError(
            f"manifest has {manifest.class_count} label names but class_count is {cfg.class_count}; "
            "pass --class-count to match"
        )
    return manifest


def _resolved(manifest: Manifest) -> Manifest:
    entries = [ManifestEntry(Path(e.path).resolve(), e.label, e.split_hint) for e in manifest.entries]
    return Manifest(entries, manifest.label_names)


@dataclass
class ExtractReport:
    written: list[Path]
    failures: list[str]


def extract_to_cache(manifest: Manifest, cfg: ExperimentConfig, threads: int | None = None) -> ExtractReport:
    """Extract every clip and write one MWF1 file each; failures are collected, not raised."""
    manifest = _resolved(manifest)
    frame_cfg = FrameConfig(cfg.n_fft, cfg.hop, frames_for(cfg))
    Path(cfg.cache_dir).mkdir(parents=True, exist_ok=True)

    def one(entry: ManifestEntry):
        try:
            clip = load_clip(entry.path, cfg.sample_rate, cfg.clip_seconds)
            fm = extract_all(clip, frame_cfg)
            out = cache_path(cfg, entry)
            write_features(out, fm.data, entry.label)
            return out, None
        except (DataError, ValueError, FloatingPointError) as exc:
            return None, f"{entry.path}: {exc}"

    threads = thread_count() if threads is None else threads
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, manifest.entries))
    else:
        results = [one(e) for e in manifest.entries]
    return ExtractReport([r for r, _ in results if r is not None], [f for _, f in results if f is not None])


def load_cached(manifest: Manifest, cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    """(N, 204, T) float64 features and labels for every manifest entry."""
    manifest = _resolved(manifest)
    frames = frames_for(cfg)
    missing = [str(cache_path(cfg, e)) for e in manifest.entries if not cache_path(cfg, e).exists()]
    if missing:
        head = "\n  ".join(missing[:5]) + ("\n  ..." if len(missing) > 5 else "")
        raise DataError(f"{len(missing)} feature cache files missing; run `moodwave extract` first:\n  {head}")
    x = None
    for i, e in enumerate(manifest.entries):
        path = cache_path(cfg, e)
        data, label = read_features(path)
        if label != e.label:
            raise DataError(f"{path}: cached label {label} disagrees with manifest label {e.label}; re-run extract")
        if data.shape[1] != frames:
            raise DataError(f"{path}: {data.shape[1]} frames cached but config expects {frames}; re-run extract")
        if x is None:
            x = np.empty((len(manifest), data.shape[0], frames))
        x[i] = data
    return x, manifest.labels


def split_for(manifest: Manifest, cfg: ExperimentConfig) -> SplitPlan:
    """Use the manifest's split column when every entry has one, else a seeded stratified split."""
    hints = [e.split_hint for e in manifest.entries]
    if all(h is not None for h in hints):
        bad = sorted({h for h in hints if h not in SPLIT_NAMES})
        if bad:
            raise DataError(f"unknown split names {bad}; expected {SPLIT_NAMES}")
        idx = {name: np.array([i for i, h in enumerate(hints) if h == name], dtype=np.int64) for name in SPLIT_NAMES}
        return SplitPlan(idx["train"], idx["eval"], idx["test"], seed=cfg.seed)
    return make_split(manifest.labels, cfg.split_ratios, cfg.seed)
