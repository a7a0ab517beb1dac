import csv

import numpy as np
import pytest

from moodwave import cli
from moodwave.config import ExperimentConfig, format_config, load_config, parse_config_text
from moodwave.errors import NumericalError, UsageError
from moodwave.features import read_features


# --- config ------------------------------------------------------------------


def test_config_round_trip():
    cfg = ExperimentConfig().replace(epochs=7, lr=0.005, arch="lstm", manifest="/tmp/m.csv")
    assert parse_config_text(format_config(cfg)) == cfg
    assert parse_config_text(format_config(ExperimentConfig())) == ExperimentConfig()


def test_config_unknown_key_named(tmp_path):
    with pytest.raises(UsageError, match="learning_rat"):
        parse_config_text("learning_rat = 0.1\n")
    with pytest.raises(UsageError, match="line 2"):
        parse_config_text("epochs = 3\nnot a pair\n")
    with pytest.raises(UsageError, match="epochs"):
        parse_config_text("epochs = many\n")
    with pytest.raises(UsageError):
        load_config(tmp_path / "absent.conf")
    with pytest.raises(UsageError):
        ExperimentConfig(split="0.5,0.5,0.5")


def test_config_precedence(tmp_path):
    conf = tmp_path / "a.conf"
    conf.write_text("epochs = 9  # from file\nlr = 0.01\n")
    args = cli.build_parser().parse_args(["train", "--config", str(conf), "--epochs", "4"])
    cfg = cli.resolve_config(args)
    assert (cfg.epochs, cfg.lr, cfg.hidden_size) == (4, 0.01, 128)
    args = cli.build_parser().parse_args(["cv", "--k_folds", "3", "--batch-size", "8"])
    cfg = cli.resolve_config(args)
    assert (cfg.k_folds, cfg.batch_size) == (3, 8)


# --- exit codes --------------------------------------------------------------


def test_usage_errors_exit_1(capsys):
    assert cli.main(["frobnicate"]) == 1
    assert cli.main(["train", "--bogus", "1"]) == 1
    assert cli.main(["train"]) == 1  # no manifest
    assert cli.main(["train", "--epochs", "-1"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_missing_cache_exit_2(tmp_path, capsys):
    (tmp_path / "m.csv").write_text("path,label\na.wav,0\n")
    code = cli.main(["train", "--manifest", str(tmp_path / "m.csv"), "--cache-dir", str(tmp_path / "c")])
    assert code == 2
    assert "moodwave extract" in capsys.readouterr().err


def test_numeric_abort_exit_3(monkeypatch, tmp_path):
    def boom(cfg):
        raise NumericalError("non-finite values in logits")

    monkeypatch.setitem(cli.HANDLERS, "train", boom)
    assert cli.main(["train"]) == 3


def test_extract_missing_audio_names_path(tmp_path, capsys):
    (tmp_path / "m.csv").write_text("path,label\nghost.wav,0\n")
    code = cli.main(["extract", "--manifest", str(tmp_path / "m.csv"), "--cache-dir", str(tmp_path / "c")])
    assert code == 2
    assert "ghost.wav" in capsys.readouterr().err


# --- commands on a tiny synthetic set ----------------------------------------


@pytest.fixture(scope="module")
def tiny_set(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert cli.main(["synth-dataset", "--output-dir", str(data), "--synth-per-class", "6",
                     "--synth-seconds", "1.0", "--seed", "3"]) == 0
    conf = data / "dataset.conf"
    assert cli.main(["extract", "--config", str(conf), "--cache-dir", str(root / "cache")]) == 0
    return root, conf


def _run(tiny_set, cmd, out, *extra):
    root, conf = tiny_set
    args = [cmd, "--config", str(conf), "--cache-dir", str(root / "cache"), "--output-dir", str(root / out),
            "--epochs", "3", "--hidden-size", "16", "--lstm-head", "16,8,8", *extra]
    return cli.main(args)


def test_synth_dataset_layout(tiny_set):
    root, conf = tiny_set
    cfg = load_config(conf)
    assert cfg.frames == 0 and cfg.clip_seconds == 1.0
    rows = list(csv.DictReader(open(root / "data" / "manifest.csv")))
    assert len(rows) == 24
    assert (root / "data" / "labels.txt").read_text().split() == ["sine_pad", "click_rich", "noise", "arpeggio"]


def test_extract_is_byte_deterministic(tiny_set):
    root, conf = tiny_set
    assert cli.main(["extract", "--config", str(conf), "--cache-dir", str(root / "cache2")]) == 0
    first = sorted((root / "cache").iterdir())
    second = sorted((root / "cache2").iterdir())
    assert [p.name for p in first] == [p.name for p in second] and len(first) == 24
    assert all(a.read_bytes() == b.read_bytes() for a, b in zip(first, second))
    data, label = read_features(first[0])
    assert data.shape == (204, 1 + 22050 // 512)


def test_train_evaluate_chain(tiny_set):
    root, _ = tiny_set
    assert _run(tiny_set, "train", "run") == 0
    out = root / "run"
    rows = (out / "results.csv").read_text().splitlines()
    assert rows[0] == "arch,test_accuracy" and [r.split(",")[0] for r in rows[1:]] == ["rnn", "brnn", "lstm"]
    for arch in ("rnn", "brnn", "lstm"):
        assert (out / "checkpoints" / f"{arch}.mwc").read_bytes()[:4] == b"MWC1"
        log = (out / f"trainlog_{arch}.csv").read_text().splitlines()
        assert log[0] == "epoch,train_acc,eval_acc,train_loss,eval_loss" and len(log) == 4
        assert (out / f"trainlog_{arch}.svg").exists()
    norm = list(csv.DictReader(open(out / "norm.csv")))
    assert len(norm) == 204
    manifest = (out / "run_train.txt").read_text()
    assert "command = train" in manifest and "seed = 3" in manifest

    assert _run(tiny_set, "evaluate", "run") == 0
    ev = (out / "evaluation.csv").read_text().splitlines()
    assert ev[0] == "model,accuracy" and len(ev) == 5
    cm = np.loadtxt(out / "confusion_rnn.csv", delimiter=",", skiprows=1)
    assert cm.shape == (4, 4) and cm.sum() == 2  # 10% of 24 clips, rounded
    assert (out / "roc_lstm.csv").read_text().startswith("class,fpr,tpr,threshold")


def test_train_twice_is_byte_identical(tiny_set):
    root, _ = tiny_set
    assert _run(tiny_set, "train", "a", "--arch", "rnn") == 0
    assert _run(tiny_set, "train", "b", "--arch", "rnn") == 0
    for name in ("results.csv", "trainlog_rnn.csv", "norm.csv", "checkpoints/rnn.mwc", "trainlog_rnn.svg"):
        assert (root / "a" / name).read_bytes() == (root / "b" / name).read_bytes(), name


def test_cv_command(tiny_set):
    root, _ = tiny_set
    assert _run(tiny_set, "cv", "cv", "--arch", "rnn,lstm") == 0
    rows = (root / "cv" / "cv_rnn.csv").read_text().splitlines()
    assert rows[0] == "fold,val_loss" and len(rows) == 6
    assert (root / "cv" / "cv_losses.svg").exists() and (root / "cv" / "cv_lstm.csv").exists()


def test_baseline_command(tiny_set):
    root, _ = tiny_set
    assert _run(tiny_set, "baseline", "base") == 0
    rows = (root / "base" / "baselines.csv").read_text().splitlines()
    assert rows[0] == "model,accuracy"
    assert [r.split(",")[0] for r in rows[1:]] == ["logreg", "ridge", "lda", "gnb", "knn", "ovr"]


def test_visualize_command(tiny_set):
    root, _ = tiny_set
    assert _run(tiny_set, "visualize", "vis", "--perplexity", "5", "--tsne-iters", "300") == 0
    rows = list(csv.DictReader(open(root / "vis" / "tsne.csv")))
    assert len(rows) == 24 and set(rows[0]) == {"id", "label", "x", "y"}
    assert rows[0]["id"] == "sine_pad_000"
    assert _run(tiny_set, "visualize", "vis2", "--perplexity", "50") == 1


def test_evaluate_without_training_is_data_error(tiny_set):
    assert _run(tiny_set, "evaluate", "fresh") == 2


def test_augment_command(tiny_set):
    root, conf = tiny_set
    code = cli.main(["augment", "--config", str(conf), "--output-dir", str(root / "aug"),
                     "--augment-specs", "noise:20,time_shift:-0.5..0.5,pitch_shift:-2|2"])
    assert code == 0
    rows = list(csv.DictReader(open(root / "aug" / "augmented" / "manifest.csv")))
    assert len(rows) == 96
    assert cli.main(["augment", "--config", str(conf), "--output-dir", str(root / "aug2"),
                     "--augment-specs", "wobble:3"]) == 1
