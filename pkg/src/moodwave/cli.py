"""Command-line driver: ``moodwave <command> [--config FILE] [--key value ...]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import io
import csv
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .audio_io import atomic_write_text, write_manifest
from .augment import expand_dataset, parse_specs
from .baselines import LogisticRegression, make_baselines, results_csv, summarize_many
from .config import ExperimentConfig, coerce, format_config, load_config
from .errors import DataError, NumericalError, UsageError
from .evaluation import accuracy, auc_csv, confusion, roc_csv, roc_ovr
from .pipeline import extract_to_cache, frames_for, load_cached, open_manifest, split_for
from .seqnet import load_checkpoint, save_checkpoint
from .trainkit import NormStats, apply_norm, fit_norm, run_cv, train_model
from .tsne import embedding_csv, tsne

log = logging.getLogger("moodwave")

COMMANDS = ("synth-dataset", "extract", "augment", "train", "cv", "baseline", "evaluate", "visualize")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="moodwave", description="Music emotion recognition pipeline.")
    parser.add_argument("--version", action="version", version=f"moodwave {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    helps = {
        "synth-dataset": "write the seeded four-class synthetic audio set and its manifest",
        "extract": "compute the 204-row feature matrix of every manifest clip into the cache",
        "augment": "expand a manifest with noise, time-shift and pitch-shift copies",
        "train": "train the sequence models and report test accuracy",
        "cv": "k-fold cross-validation losses per architecture",
        "baseline": "fit the classical baselines on frame-mean summaries",
        "evaluate": "confusion matrices and ROC curves for trained checkpoints",
        "visualize": "t-SNE embedding of the clip summaries",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="key = value config file")
        p.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
        for f in fields(ExperimentConfig):
            flags = [f"--{f.name.replace('_', '-')}"]
            if "_" in f.name:
                flags.append(f"--{f.name}")
            p.add_argument(*flags, dest=f.name, metavar=f.name.upper(), default=None)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then the config file, then command-line flags."""
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {f.name: coerce(f.name, getattr(args, f.name)) for f in fields(cfg) if getattr(args, f.name) is not None}
    return cfg.replace(**overrides) if overrides else cfg


def _out(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_run_manifest(cfg: ExperimentConfig, command: str, extra: dict | None = None) -> None:
    lines = [f"command = {command}", f"version = {__version__}"]
    lines += [f"{k} = {v}" for k, v in (extra or {}).items()]
    atomic_write_text(_out(cfg) / f"run_{command}.txt", "\n".join(lines) + "\n" + format_config(cfg))


def _norm_csv(stats: NormStats) -> str:
    rows = [f"{i},{m!r},{s!r}" for i, (m, s) in enumerate(zip(stats.mean.tolist(), stats.std.tolist()))]
    return "row,mean,std\n" + "\n".join(rows) + "\n"


def _read_norm(path: Path) -> NormStats:
    if not path.exists():
        raise DataError(f"{path}: normalisation statistics missing; run `moodwave train` first")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return NormStats(np.array([float(r["mean"]) for r in rows]), np.array([float(r["std"]) for r in rows]))


def _dataset(cfg: ExperimentConfig):
    manifest = open_manifest(cfg)
    x, y = load_cached(manifest, cfg)
    return manifest, x, y


# --------------------------------------------------------------------------- #
# Commands


def cmd_synth_dataset(cfg: ExperimentConfig) -> int:
    from .synth import write_synth_dataset

    out = _out(cfg)
    manifest = write_synth_dataset(out, cfg.synth_per_class, cfg.seed, cfg.synth_seconds, cfg.sample_rate)
    conf = cfg.replace(
        manifest=str((out / "manifest.csv").resolve()),
        clip_seconds=cfg.synth_seconds,
        frames=0,
        class_count=manifest.class_count,
    )
    atomic_write_text(out / "dataset.conf", format_config(conf))
    print(f"wrote {len(manifest)} clips, manifest {out / 'manifest.csv'}, config {out / 'dataset.conf'}")
    return 0


def cmd_extract(cfg: ExperimentConfig) -> int:
    manifest = open_manifest(cfg)
    report = extract_to_cache(manifest, cfg)
    for failure in report.failures:
        print(f"failed: {failure}", file=sys.stderr)
    print(f"extracted {len(report.written)} of {len(manifest)} clips into {cfg.cache_dir} "
          f"({len(report.failures)} failed, {frames_for(cfg)} frames each)")
    return 2 if report.failures else 0


def cmd_augment(cfg: ExperimentConfig) -> int:
    manifest = open_manifest(cfg)
    try:
        specs = parse_specs(cfg.augment_specs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out(cfg) / "augmented"
    expanded, _ = expand_dataset(manifest, specs, cfg.seed, out, cfg.sample_rate, cfg.clip_seconds)
    write_manifest(expanded, out / "manifest.csv")
    _write_run_manifest(cfg, "augment")
    print(f"expanded {len(manifest)} clips to {len(expanded)}; manifest {out / 'manifest.csv'}")
    return 0


def cmd_train(cfg: ExperimentConfig) -> int:
    from .plots import plot_train_log

    manifest, x, y = _dataset(cfg)
    split = split_for(manifest, cfg)
    stats = fit_norm(x[split.train])
    xn = apply_norm(x, stats)
    out = _out(cfg)
    (out / "checkpoints").mkdir(exist_ok=True)
    atomic_write_text(out / "norm.csv", _norm_csv(stats))
    rows = ["arch,test_accuracy"]
    for arch in cfg.archs:
        log.info("training %s on %d clips", arch, len(split.train))
        model, tlog = train_model(arch, xn, y, split, cfg)
        save_checkpoint(model, out / "checkpoints" / f"{arch}.mwc")
        atomic_write_text(out / f"trainlog_{arch}.csv", tlog.to_csv())
        if len(tlog):
            plot_train_log(tlog, out / f"trainlog_{arch}.svg", arch.upper())
        acc = accuracy(model.predict(xn[split.test]), y[split.test]) if len(split.test) else float("nan")
        rows.append(f"{arch},{acc!r}")
        print(f"{arch}: test accuracy {acc:.4f} (best epoch {tlog.best_epoch}, {len(tlog)} epochs)")
    atomic_write_text(out / "results.csv", "\n".join(rows) + "\n")
    _write_run_manifest(cfg, "train", {"train_size": len(split.train), "eval_size": len(split.eval),
                                       "test_size": len(split.test)})
    return 0


def cmd_cv(cfg: ExperimentConfig) -> int:
    from .plots import plot_fold_losses

    _, x, y = _dataset(cfg)
    out = _out(cfg)
    losses = {}
    for arch in cfg.archs:
        log.info("%d-fold cross-validation of %s", cfg.k_folds, arch)
        result = run_cv(arch, x, y, cfg)
        atomic_write_text(out / f"cv_{arch}.csv", result.to_csv())
        losses[arch] = result.fold_losses
        print(f"{arch}: mean validation loss {result.mean_loss:.4f} over {len(result.fold_losses)} folds")
    plot_fold_losses(losses, out / "cv_losses.svg")
    _write_run_manifest(cfg, "cv")
    return 0


def cmd_baseline(cfg: ExperimentConfig) -> int:
    from .plots import plot_bars

    manifest, x, y = _dataset(cfg)
    split = split_for(manifest, cfg)
    s = summarize_many(x)
    results = {}
    for name, model in make_baselines(cfg).items():
        model.fit(s[split.train], y[split.train], n_classes=cfg.class_count)
        results[name] = model.score(s[split.test], y[split.test]) if len(split.test) else float("nan")
        print(f"{name}: test accuracy {results[name]:.4f}")
    out = _out(cfg)
    atomic_write_text(out / "baselines.csv", results_csv(results))
    plot_bars(results, out / "baselines.svg")
    _write_run_manifest(cfg, "baseline")
    return 0


def cmd_evaluate(cfg: ExperimentConfig) -> int:
    from .plots import plot_roc

    manifest, x, y = _dataset(cfg)
    split = split_for(manifest, cfg)
    if not len(split.test):
        raise DataError("the test split is empty; nothing to evaluate")
    out = _out(cfg)
    stats = _read_norm(out / "norm.csv")
    xn = apply_norm(x, stats)
    names = manifest.label_names
    scores = {}
    for arch in cfg.archs:
        ckpt = out / "checkpoints" / f"{arch}.mwc"
        if not ckpt.exists():
            raise DataError(f"{ckpt}: checkpoint missing; run `moodwave train` first")
        scores[arch] = load_checkpoint(ckpt).predict_proba(xn[split.test])
    s = summarize_many(x)
    lr = LogisticRegression(cfg.logreg_l2, cfg.logreg_iters).fit(s[split.train], y[split.train], cfg.class_count)
    scores["logreg"] = lr.predict_proba(s[split.test])

    y_test = y[split.test]
    rows = ["model,accuracy"]
    for name, prob in scores.items():
        preds = np.argmax(prob, axis=1)
        acc = accuracy(preds, y_test)
        rows.append(f"{name},{acc!r}")
        cm = confusion(preds, y_test, cfg.class_count)
        buf = io.StringIO()
        np.savetxt(buf, cm, fmt="%d", delimiter=",")
        atomic_write_text(out / f"confusion_{name}.csv", ",".join(names) + "\n" + buf.getvalue())
        curves = roc_ovr(prob, y_test, cfg.class_count)
        atomic_write_text(out / f"roc_{name}.csv", roc_csv(curves))
        atomic_write_text(out / f"auc_{name}.csv", auc_csv(curves))
        plot_roc(curves, out / f"roc_{name}.svg", names)
        undefined = [names[c] for c, cv in enumerate(curves) if not cv.defined]
        note = f" (AUC undefined for {', '.join(undefined)}: no positives or negatives)" if undefined else ""
        print(f"{name}: accuracy {acc:.4f}{note}")
    atomic_write_text(out / "evaluation.csv", "\n".join(rows) + "\n")
    _write_run_manifest(cfg, "evaluate")
    return 0


def cmd_visualize(cfg: ExperimentConfig) -> int:
    from .plots import plot_embedding

    manifest, x, y = _dataset(cfg)
    s = summarize_many(x)
    sd = s.std(axis=0)
    s = (s - s.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    if cfg.perplexity > len(y) - 1:
        raise UsageError(f"perplexity {cfg.perplexity} needs more than {len(y)} clips; lower --perplexity")
    emb = tsne(s, cfg.perplexity, cfg.tsne_iters, cfg.seed)
    out = _out(cfg)
    ids = [e.clip_id for e in manifest.entries]
    atomic_write_text(out / "tsne.csv", embedding_csv(emb, y, ids))
    plot_embedding(emb, y, out / "tsne.svg", manifest.label_names)
    _write_run_manifest(cfg, "visualize")
    print(f"embedded {len(y)} clips into {out / 'tsne.csv'}")
    return 0


HANDLERS = {
    "synth-dataset": cmd_synth_dataset,
    "extract": cmd_extract,
    "augment": cmd_augment,
    "train": cmd_train,
    "cv": cmd_cv,
    "baseline": cmd_baseline,
    "evaluate": cmd_evaluate,
    "visualize": cmd_visualize,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s", stream=sys.stderr)
        cfg = resolve_config(args)
        return HANDLERS[args.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, FloatingPointError) as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
