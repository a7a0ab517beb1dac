import numpy as np
import pytest

from moodwave.config import ExperimentConfig
from moodwave.errors import DataError
from moodwave.trainkit import (
    CVResult,
    NormStats,
    apply_norm,
    early_stop,
    fit_model,
    fit_norm,
    make_kfold,
    make_split,
    run_cv,
    train_model,
)


def toy_sequences(n_per=12, classes=3, d=6, t=8, seed=0):
    """Class k shifts feature row k upward: easily separable sequences."""
    rng = np.random.default_rng(seed)
    y = np.repeat(np.arange(classes), n_per)
    x = rng.standard_normal((len(y), d, t)) * 0.5
    x[np.arange(len(y)), y] += 2.0
    return x, y


def tiny_cfg(**kw):
    base = dict(hidden_size=8, class_count=3, epochs=15, batch_size=8, patience=5, lstm_head="8,8,8", lr=0.01)
    base.update(kw)
    return ExperimentConfig().replace(**base)


# --- splits ------------------------------------------------------------------


def test_split_900_sizes_and_strata():
    y = np.repeat(np.arange(4), 225)
    plan = make_split(y, seed=0)
    assert (len(plan.train), len(plan.eval), len(plan.test)) == (720, 90, 90)
    allidx = np.concatenate([plan.train, plan.eval, plan.test])
    assert np.array_equal(np.sort(allidx), np.arange(900))
    for part, frac in ((plan.train, 0.8), (plan.eval, 0.1), (plan.test, 0.1)):
        counts = np.bincount(y[part], minlength=4)
        assert np.all(np.abs(counts - frac * 225) <= 1)


def test_split_ten_and_determinism():
    plan = make_split(10, seed=3)
    assert (len(plan.train), len(plan.eval), len(plan.test)) == (8, 1, 1)
    again = make_split(10, seed=3)
    assert all(np.array_equal(a, b) for a, b in zip((plan.train, plan.eval, plan.test), (again.train, again.eval, again.test)))
    other = make_split(np.arange(100) % 4, seed=4)
    first = make_split(np.arange(100) % 4, seed=3)
    assert not np.array_equal(other.test, first.test)


def test_split_errors():
    with pytest.raises(DataError):
        make_split([0, 0, 0, 1, 1], seed=0)
    with pytest.raises(ValueError):
        make_split(10, ratios=(0.5, 0.2, 0.2))


def test_kfold_sizes():
    plan = make_kfold(3600, 5, seed=0)
    assert [len(f) for f in plan.folds] == [720] * 5
    plan = make_kfold(7, 5, seed=1)
    assert sorted(len(f) for f in plan.folds) == [1, 1, 1, 2, 2]
    allidx = np.concatenate(plan.folds)
    assert np.array_equal(np.sort(allidx), np.arange(7))
    tr, va = plan.fold(2)
    assert set(tr.tolist()).isdisjoint(va.tolist()) and len(tr) + len(va) == 7
    with pytest.raises(ValueError):
        make_kfold(10, 1)
    with pytest.raises(ValueError):
        make_kfold(3, 5)


# --- normalisation -----------------------------------------------------------


def test_norm_examples():
    x = np.full((3, 2, 4), 5.0)
    stats = fit_norm(x)
    assert np.all(stats.std == 1e-8)
    assert np.all(apply_norm(x, stats) == 0)
    z = np.random.default_rng(0).standard_normal((10, 3, 20))
    z = (z - z.mean(axis=(0, 2), keepdims=True)) / z.std(axis=(0, 2), keepdims=True)
    assert np.max(np.abs(apply_norm(z, fit_norm(z)) - z)) < 1e-9
    raw = np.random.default_rng(1).standard_normal((10, 3, 20)) * 7 + 3
    again = fit_norm(apply_norm(raw, fit_norm(raw)))
    assert np.allclose(again.mean, 0, atol=1e-6) and np.allclose(again.std, 1, atol=1e-6)


def test_norm_leak_sentinel():
    x, y = toy_sequences()
    plan = make_split(y, seed=0)
    clean = fit_norm(x[plan.train])
    poisoned = x.copy()
    poisoned[plan.eval] = 1e9
    poisoned[plan.test] = -1e9
    dirty = fit_norm(poisoned[plan.train])
    assert np.array_equal(clean.mean, dirty.mean) and np.array_equal(clean.std, dirty.std)


def test_cv_never_sees_validation_rows_in_stats(monkeypatch):
    import moodwave.trainkit as tk

    x, y = toy_sequences(n_per=5)
    plan = make_kfold(len(y), 5, seed=0)
    seen = []
    real = tk.fit_norm

    def spy(x_train):
        seen.append(x_train.copy())
        return real(x_train)

    monkeypatch.setattr(tk, "fit_norm", spy)
    run_cv("rnn", x, y, tiny_cfg(epochs=1), plan)
    for i, stats_input in enumerate(seen):
        tr, va = plan.fold(i)
        assert np.array_equal(stats_input, x[tr])


# --- early stopping ----------------------------------------------------------


def test_early_stop_rules():
    assert not any(early_stop(list(np.linspace(1, 0, k)), 20) for k in range(1, 100))
    const = [1.0] * 40
    stops = [k for k in range(1, 41) if early_stop(const[:k], 20)]
    assert stops[0] == 21
    # improvement at epoch 15 resets the counter
    series = [1.0] * 14 + [0.5] + [0.5] * 30
    first = next(k for k in range(1, len(series) + 1) if early_stop(series[:k], 20))
    assert first == 35
    # a gain smaller than min_delta does not count as improvement
    assert early_stop([1.0, 1.0 - 5e-5] + [1.0] * 5, 6, min_delta=1e-4)
    assert not early_stop([1.0, 1.0 - 2e-4] + [1.0] * 5, 6, min_delta=1e-4)
    with pytest.raises(ValueError):
        early_stop([1.0], 0)


# --- training ----------------------------------------------------------------


def test_epochs_zero_returns_untrained():
    x, y = toy_sequences()
    model, log = train_model("lstm", x, y, make_split(y, seed=0), tiny_cfg(epochs=0))
    assert len(log) == 0 and log.to_csv() == "epoch,train_acc,eval_acc,train_loss,eval_loss\n"
    fresh, _ = train_model("lstm", x, y, make_split(y, seed=0), tiny_cfg(epochs=0))
    assert all(np.array_equal(a, b) for a, b in zip(model.params.values(), fresh.params.values()))


@pytest.mark.parametrize("arch", ["rnn", "brnn", "lstm"])
def test_training_is_deterministic_and_learns(arch):
    x, y = toy_sequences()
    plan = make_split(y, seed=0)
    cfg = tiny_cfg()
    m1, log1 = train_model(arch, x, y, plan, cfg)
    m2, log2 = train_model(arch, x, y, plan, cfg)
    assert log1.to_csv() == log2.to_csv()
    assert all(np.array_equal(a, b) for a, b in zip(m1.params.values(), m2.params.values()))
    assert max(log1.train_acc) == 1.0
    rows = log1.to_csv().splitlines()
    assert rows[0] == "epoch,train_acc,eval_acc,train_loss,eval_loss" and len(rows) == len(log1) + 1


def test_best_epoch_is_restored():
    x, y = toy_sequences()
    plan = make_split(y, seed=0)
    model, log = train_model("rnn", x, y, plan, tiny_cfg(epochs=8, patience=0))
    keys = [(a, -l) for a, l in zip(log.eval_acc, log.eval_loss)]
    assert log.best_epoch == 1 + max(range(len(keys)), key=lambda i: (keys[i], -i))
    from moodwave.trainkit import evaluate_model

    acc, loss = evaluate_model(model, x[plan.eval], y[plan.eval])
    assert acc == log.eval_acc[log.best_epoch - 1] and loss == log.eval_loss[log.best_epoch - 1]


def test_early_stopping_truncates_log():
    x, y = toy_sequences()
    plan = make_split(y, seed=0)
    _, log = train_model("rnn", x, y, plan, tiny_cfg(epochs=200, patience=3, lr=0.05))
    assert len(log) < 200 and log.stop_epoch == len(log)
    assert early_stop(log.eval_loss, 3, 1e-4)


# --- cross-validation --------------------------------------------------------


def test_run_cv_five_folds_and_permutation_invariance():
    x, y = toy_sequences(n_per=5)
    cfg = tiny_cfg(epochs=3)
    res = run_cv("rnn", x, y, cfg)
    assert len(res.fold_losses) == 5 and len(res.logs) == 5
    assert res.mean_loss == pytest.approx(np.mean(res.fold_losses))
    text = res.to_csv().splitlines()
    assert text[0] == "fold,val_loss" and [r.split(",")[0] for r in text[1:]] == ["1", "2", "3", "4", "5"]

    plan = make_kfold(len(y), 5, cfg.seed)
    perm = np.random.default_rng(9).permutation(len(y))  # new position of old index i
    xp, yp = np.empty_like(x), np.empty_like(y)
    xp[perm], yp[perm] = x, y
    moved = run_cv("rnn", xp, yp, cfg, plan.remap(perm))
    assert moved.fold_losses == res.fold_losses


def test_cv_degenerate_identical_samples():
    x = np.ones((10, 4, 5))
    y = np.zeros(10, dtype=np.int64)
    cfg = tiny_cfg(class_count=2, epochs=200, patience=0, lr=0.05, weight_decay=0.0)
    res = run_cv("rnn", x, y, cfg)
    assert max(res.fold_losses) < 0.01  # chance level would be ln 2


def test_cvresult_csv():
    assert CVResult([0.5, 0.25], []).to_csv() == "fold,val_loss\n1,0.5\n2,0.25\n"


def test_normstats_type():
    s = NormStats(np.zeros(2), np.ones(2))
    assert apply_norm(np.ones((1, 2, 3)), s).shape == (1, 2, 3)


def test_fit_model_without_eval_keeps_last_epoch():
    x, y = toy_sequences()
    model, log = fit_model("rnn", x, y, x[:0], y[:0], tiny_cfg(epochs=4))
    assert log.best_epoch == 4 and np.all(np.isnan(log.eval_acc))
