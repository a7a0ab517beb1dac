"""End-to-end acceptance gates.

Each test prints one ``PASS``/``FAIL`` line for its criterion (visible with
``pytest -v`` or ``-s``) and then asserts, so a failing gate fails the run.
"""

import csv
import time

import numpy as np
import pytest

from moodwave import cli
from moodwave.audio_io import AudioClip, Manifest, ManifestEntry, synth_signal, write_wav
from moodwave.augment import expand_dataset
from moodwave.baselines import BinaryLogisticRegression, GaussianNB, KNeighbors, OneVsRest, RidgeClassifier
from moodwave.config import ExperimentConfig, load_config
from moodwave.evaluation import accuracy, roc_curve, roc_ovr
from moodwave.features import chroma_stft, cqt, estimate_tempo, spectral_descriptors, stft
from moodwave.pipeline import load_cached, open_manifest
from moodwave.seqnet import cross_entropy
from moodwave.trainkit import fit_model, fit_norm, make_kfold, run_cv
from moodwave.tsne import loo_1nn_accuracy, tsne

from conftest import SR, peak_hz, rel_error, tone
from test_seqnet import numeric_grad, seeded_batch, small_model

SYNTH_EPOCHS = 20
SYNTH_PATIENCE = 10


def report(capsys, number, title, ok, detail=""):
    with capsys.disabled():
        print(f"\n[acceptance {number}] {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else ""))
    assert ok, f"criterion {number} failed: {detail}"


# --- shared synthetic experiment ---------------------------------------------


def _pipeline(root, name):
    """synth-dataset -> extract -> train -> baseline through the CLI, as a user would run it."""
    data = root / f"{name}_data"
    out = root / f"{name}_out"
    assert cli.main(["synth-dataset", "--output-dir", str(data), "--seed", "0"]) == 0
    common = ["--config", str(data / "dataset.conf"), "--cache-dir", str(root / f"{name}_cache"),
              "--output-dir", str(out), "--epochs", str(SYNTH_EPOCHS), "--patience", str(SYNTH_PATIENCE)]
    assert cli.main(["extract", *common]) == 0
    assert cli.main(["train", *common]) == 0
    assert cli.main(["baseline", *common]) == 0
    return data, out, common


@pytest.fixture(scope="session")
def synth_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept")
    start = time.perf_counter()
    data, out, common = _pipeline(root, "a")
    return {"root": root, "data": data, "out": out, "common": common, "seconds": time.perf_counter() - start}


def _csv_dict(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return {r[0]: float(r[1]) for r in rows[1:]}


# --- 1. feature oracles ------------------------------------------------------


def test_criterion_1_feature_oracles(capsys):
    start = time.perf_counter()
    checks = {}

    sine = synth_signal("sine", 2.0, SR, frequency=1000.0)
    cent = spectral_descriptors(stft(sine), sine)["spectral_centroid"][0, 4:-4]
    checks["centroid within 2%"] = bool(np.all(np.abs(cent / 1000.0 - 1) < 0.02))

    a440 = synth_signal("sine", 3.0, SR, frequency=440.0)
    hits = np.argmax(chroma_stft(stft(a440)), axis=0) == 9
    checks["chroma_stft argmax A >95%"] = hits.mean() > 0.95
    cq = np.argmax(cqt(tone(261.63, 2.0)), axis=0) == 36
    checks["cqt argmax C4 >95%"] = cq.mean() > 0.95

    for bpm in (90, 120):
        clicks = synth_signal("click_train", 10.0, SR, bpm=bpm)
        est = estimate_tempo(clicks, stft(clicks))
        checks[f"tempo {bpm} within 2 BPM"] = abs(est.bpm - bpm) <= 2

    noise = synth_signal("white_noise", 1.0, SR, seed=2)
    spec = stft(noise)
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(2048) / 2048)
    padded = np.pad(noise.samples, 1024, mode="reflect")
    worst = 0.0
    for t in range(spec.n_frames):
        e_time = np.sum((padded[t * 512:t * 512 + 2048] * w) ** 2)
        p = spec.power[:, t]
        e_freq = (p[0] + p[-1] + 2 * p[1:-1].sum()) / 2048
        worst = max(worst, abs(e_freq - e_time) / e_time)
    checks["Parseval rel err < 1e-6"] = worst < 1e-6

    elapsed = time.perf_counter() - start
    checks["runtime < 60 s"] = elapsed < 60
    failed = [k for k, v in checks.items() if not v]
    report(capsys, 1, "feature-oracle suite", not failed,
           f"{len(checks) - len(failed)}/{len(checks)} checks, {elapsed:.1f} s, Parseval {worst:.1e}"
           + (f", failed: {failed}" if failed else ""))


# --- 2. gradients ------------------------------------------------------------


def test_criterion_2_gradient_suite(capsys):
    start = time.perf_counter()
    worst = {}
    for arch in ("rnn", "brnn", "lstm"):
        model = small_model(arch)
        x, y = seeded_batch()

        def loss():
            logits, _ = model.forward(x, train=True, rng=np.random.default_rng(42))
            return cross_entropy(logits, y)[0]

        logits, cache = model.forward(x, train=True, rng=np.random.default_rng(42))
        grads, _ = model.backward(cache, cross_entropy(logits, y)[1])
        worst[arch] = max(rel_error(grads[k], numeric_grad(loss, p)) for k, p in model.params.items())
    elapsed = time.perf_counter() - start
    ok = all(v < 1e-4 for v in worst.values()) and elapsed < 60
    detail = ", ".join(f"{a} {v:.1e}" for a, v in worst.items()) + f", {elapsed:.1f} s"
    report(capsys, 2, "finite-difference gradients for all parameters", ok, detail)


# --- 3. overfit gate ---------------------------------------------------------


def test_criterion_3_overfit_gate(capsys):
    rng = np.random.default_rng(0)
    y = np.repeat(np.arange(4), 8)
    centers = rng.standard_normal((4, 204, 1))
    x = centers[y] + rng.standard_normal((32, 204, 50))
    cfg = ExperimentConfig()  # defaults: 300 epochs, H=128, lr 1e-3, batch 32
    start = time.perf_counter()
    reached = {}
    for arch in ("rnn", "brnn", "lstm"):
        model, log = fit_model(arch, x, y, x[:0], y[:0], cfg, target_train_acc=1.0)
        reached[arch] = log.epoch[-1] if log.train_acc and log.train_acc[-1] == 1.0 else None
    elapsed = time.perf_counter() - start
    ok = all(v is not None and v <= 300 for v in reached.values()) and elapsed < 300
    detail = ", ".join(f"{a} epoch {v}" for a, v in reached.items()) + f", {elapsed:.0f} s"
    report(capsys, 3, "100% train accuracy on 32 separable sequences", ok, detail)


# --- 4. synthetic four-class experiment -------------------------------------


def test_criterion_4_synthetic_experiment(capsys, synth_run):
    out = synth_run["out"]
    nets = _csv_dict(out / "results.csv")
    base = _csv_dict(out / "baselines.csv")
    manifest = open_manifest(load_config(synth_run["data"] / "dataset.conf"))
    checks = {
        "400 clips of 3 s": len(manifest) == 400 and load_config(synth_run["data"] / "dataset.conf").clip_seconds == 3.0,
        "networks >= 0.90": all(nets[a] >= 0.90 for a in ("rnn", "brnn", "lstm")),
        "logreg, lda >= 0.80": base["logreg"] >= 0.80 and base["lda"] >= 0.80,
        "all baselines > 0.25": len(base) == 6 and all(v > 0.25 for v in base.values()),
        "runtime < 10 min": synth_run["seconds"] < 600,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = ", ".join(f"{k} {v:.3f}" for k, v in {**nets, **base}.items()) + f", {synth_run['seconds']:.0f} s"
    report(capsys, 4, "synthetic 4-class experiment", not failed, detail + (f", failed: {failed}" if failed else ""))


# --- 5. augmentation ---------------------------------------------------------


def test_criterion_5_augmentation_gate(capsys, tmp_path):
    rng = np.random.default_rng(5)
    entries, clips = [], {}
    for i in range(100):
        f = float(rng.uniform(220.0, 660.0))
        t = np.arange(3 * SR) / SR
        clip = AudioClip(0.5 * np.sin(2 * np.pi * f * t) + 0.1 * np.sin(2 * np.pi * 2 * f * t), SR, f"tone{i:03d}")
        path = tmp_path / "src" / f"tone{i:03d}.wav"
        write_wav(path, clip)
        entries.append(ManifestEntry(path, i % 4))
    manifest = Manifest(entries, ["Q1", "Q2", "Q3", "Q4"])
    expanded_manifest, expanded = expand_dataset(manifest, seed=0, out_dir=tmp_path / "aug", sample_rate=SR, seconds=3.0)

    problems = []
    if len(expanded_manifest) != 400 or len(expanded) != 400:
        problems.append(f"{len(expanded)} outputs")
    for item in expanded:
        src = expanded[4 * item.source_index].clip
        if item.label != manifest.entries[item.source_index].label:
            problems.append(f"label changed on {item.clip.source_id}")
        if len(item.clip) != len(src):
            problems.append(f"length changed on {item.clip.source_id}")
        if item.kind == "noise":
            snr = 10 * np.log10(np.mean(src.samples ** 2) / np.mean((item.clip.samples - src.samples) ** 2))
            if abs(snr - 20.0) > 0.5:
                problems.append(f"SNR {snr:.2f} dB on {item.clip.source_id}")
        elif item.kind == "pitch_shift":
            ratio = peak_hz(item.clip.samples[SR // 4:-SR // 4], SR) / peak_hz(src.samples, SR)
            if abs(ratio / 2 ** (item.value / 12) - 1) > 0.03:
                problems.append(f"pitch ratio {ratio:.4f} on {item.clip.source_id}")
        elif item.kind == "time_shift":
            shifted = np.roll(src.samples, int(round(item.value * SR)))
            if not np.array_equal(shifted, item.clip.samples):
                problems.append(f"shift mismatch on {item.clip.source_id}")
    counts = np.bincount(expanded_manifest.labels, minlength=4).tolist()
    if counts != [100] * 4:
        problems.append(f"label histogram {counts}")
    report(capsys, 5, "augmentation expands 100 clips to 400 with invariants", not problems,
           "; ".join(problems[:5]) if problems else "labels, SNR, pitch ratio and duration hold on all 400")


# --- 6. cross-validation protocol --------------------------------------------


def test_criterion_6_cv_protocol(capsys, synth_run, monkeypatch):
    import moodwave.trainkit as tk

    cfg = load_config(synth_run["data"] / "dataset.conf").replace(cache_dir=str(synth_run["root"] / "a_cache"))
    x, y = load_cached(open_manifest(cfg), cfg)
    plan = make_kfold(len(y), 5, cfg.seed)

    seen = []
    real = tk.fit_norm
    monkeypatch.setattr(tk, "fit_norm", lambda xt: seen.append(xt) or real(xt))
    res = run_cv("rnn", x, y, cfg.replace(epochs=3, patience=2), plan)
    monkeypatch.undo()
    train_only = all(np.array_equal(s, x[plan.fold(i)[0]]) for i, s in enumerate(seen))

    tr, va = plan.fold(0)
    poisoned = x.copy()
    poisoned[va] = 1e12
    clean, dirty = fit_norm(x[tr]), fit_norm(poisoned[tr])
    sentinel = np.array_equal(clean.mean, dirty.mean) and np.array_equal(clean.std, dirty.std)
    ok = len(res.fold_losses) == 5 and all(np.isfinite(res.fold_losses)) and train_only and sentinel
    report(capsys, 6, "5-fold CV with train-only normalisation", ok,
           f"fold losses {[round(v, 4) for v in res.fold_losses]}, sentinel {'held' if sentinel else 'leaked'}")


# --- 7. baseline oracles -----------------------------------------------------


def test_criterion_7_baseline_oracles(capsys):
    rng = np.random.default_rng(7)
    checks = {}

    xk, yk, q = rng.standard_normal((50, 3)), rng.integers(0, 3, 50), rng.standard_normal((20, 3))
    agree = True
    for k in range(1, 51):
        pred = KNeighbors(k, standardize=False).fit(xk, yk, n_classes=3).predict(q)
        for i, point in enumerate(q):
            order = sorted(range(50), key=lambda j: (float(np.sum((point - xk[j]) ** 2)), j))[:k]
            agree &= pred[i] == int(np.argmax(np.bincount(yk[order], minlength=3)))
    checks["k-NN equals exhaustive scan"] = bool(agree)

    xr = rng.standard_normal((60, 5))
    ridge = RidgeClassifier(alpha=1.0).fit(xr, rng.integers(0, 3, 60))
    checks["ridge residual < 1e-8"] = ridge.normal_residual() < 1e-8

    xb = np.concatenate([rng.standard_normal((40, 2)), rng.standard_normal((40, 2)) + [1.5, 1.0]])
    yb = np.repeat([0, 1], 40)
    ovr = OneVsRest().fit(xb, yb).predict(xb)
    direct = (BinaryLogisticRegression().fit(xb, yb).logit(xb) > 0).astype(int)
    checks["OvR(C=2) equals binary LR"] = bool(np.array_equal(ovr, direct))

    base = rng.standard_normal(200)
    gnb = GaussianNB(standardize=False).fit(np.concatenate([base, 10 - base])[:, None], np.repeat([0, 1], 200))
    s = gnb.decision_function(np.array([[5.0]]))[0]
    checks["GNB boundary at midpoint"] = abs(s[1] - s[0]) < 1e-9 and gnb.predict(np.array([[4.99], [5.01]])).tolist() == [0, 1]

    failed = [k for k, v in checks.items() if not v]
    report(capsys, 7, "baseline oracles", not failed, f"{len(checks) - len(failed)}/{len(checks)} checks"
           + (f", failed: {failed}" if failed else ""))


# --- 8. metrics --------------------------------------------------------------


def test_criterion_8_metric_suite(capsys):
    rng = np.random.default_rng(0)
    perfect = roc_curve(np.linspace(1, 0, 20), np.arange(20) < 7).auc
    null = roc_ovr(rng.random((2000, 4)), rng.integers(0, 4, 2000))
    null_aucs = [c.auc for c in null]

    x = rng.standard_normal((200, 10))
    labels = np.repeat([0, 1], 100)
    x[labels == 1, 0] += 8.0
    nn = loo_1nn_accuracy(tsne(x, 30.0, 1000, seed=0), labels)

    y90 = np.arange(90) % 4
    preds = y90.copy()
    preds[48:] = (preds[48:] + 1) % 4
    acc = accuracy(preds, y90)

    ok = perfect == 1.0 and all(abs(a - 0.5) <= 0.03 for a in null_aucs) and nn >= 0.95 and round(100 * acc, 2) == 53.33
    report(capsys, 8, "metrics: AUC, t-SNE separation, 48/90", ok,
           f"perfect AUC {perfect}, null AUCs {[round(a, 3) for a in null_aucs]}, t-SNE 1-NN {nn:.3f}, 48/90 = {100 * acc:.2f}%")


# --- 9. determinism ----------------------------------------------------------


def test_criterion_9_determinism(capsys, synth_run):
    _, out_b, _ = _pipeline(synth_run["root"], "b")
    out_a = synth_run["out"]
    names = ["results.csv", "baselines.csv", "norm.csv"] + [f"trainlog_{a}.csv" for a in ("rnn", "brnn", "lstm")]
    differ = [n for n in names if (out_a / n).read_bytes() != (out_b / n).read_bytes()]
    report(capsys, 9, "two full runs give byte-identical CSVs", not differ,
           f"compared {len(names)} files" + (f", differing: {differ}" if differ else ""))
