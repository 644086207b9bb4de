import hashlib
import importlib
import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from astgcn.augment import TGCN_SPEC, AugmentSpec
from astgcn.dataset import generate_synthetic
from astgcn.errors import CheckpointError, DivergenceDetectedError, ShapeMismatchError
from astgcn.model import ModelDims, ModelParameters, init_params
from astgcn.train import (
    AdamMoments,
    TrainConfig,
    adam_step,
    load_checkpoint,
    loss,
    loss_and_grads,
    regularizer,
    save_checkpoint,
    train,
)

from conftest import random_graph, small_model

# the package re-exports train(), which shadows the submodule attribute
train_mod = importlib.import_module("astgcn.train")

QUICK = TrainConfig(epochs=3, hidden_units=6, learning_rate=0.01, batch_size=32, lambda_reg=1e-5)


@pytest.fixture(scope="module")
def tiny_data():
    return generate_synthetic(6, 300, seed=5)


def test_defaults():
    c = TrainConfig()
    assert (c.learning_rate, c.batch_size, c.train_ratio, c.epochs, c.hidden_units, c.seq_len) == \
        (0.001, 64, 0.8, 3000, 100, 4)
    assert c.gc_width == 100
    assert c.lr_decay == 1.0


def test_config_validation_and_mapping():
    with pytest.raises(ValueError):
        TrainConfig(train_ratio=1.0)
    with pytest.raises(ValueError):
        TrainConfig(model="lstm")
    c = TrainConfig.from_mapping({"epochs": "7", "learning_rate": "0.01", "model": "gru",
                                  "gc_units": "none", "unrelated": "x"})
    assert (c.epochs, c.learning_rate, c.model, c.gc_units) == (7, 0.01, "gru", None)


# --- loss --------------------------------------------------------------------

def test_loss_examples():
    assert loss([[1.0, 2.0]], [[1.0, 2.0]]) == 0.0
    assert loss([[1.0]], [[3.0]]) == 4.0
    dims = ModelDims(1, 1, 1, 1, 1)
    p = ModelParameters(dims, {k: np.zeros(s) for k, s in dims.shapes().items()})
    p.tensors["W_g"] = np.array([[2.0]])
    p.tensors["b_u"] = np.array([5.0])  # biases are not regularised
    assert loss([[0.0]], [[0.0]], p, lambda_reg=1.0) == 4.0
    with pytest.raises(ShapeMismatchError):
        loss([[1.0]], [[1.0, 2.0]])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 9999), lam=st.floats(0, 10))
def test_loss_nonnegative_and_regulariser_brute_force(seed, lam):
    p = small_model(seed)
    brute = 0.0
    for k, v in p.tensors.items():
        if k.startswith("W_"):
            for x in v.ravel():
                brute += x * x
    assert regularizer(p) == pytest.approx(brute, rel=1e-12)
    rng = np.random.default_rng(seed)
    y, yh = rng.normal(size=(2, 5, 2))
    value = loss(y, yh, p, lam)
    assert value >= 0
    assert value == pytest.approx(np.mean((y - yh) ** 2) + lam * brute, rel=1e-12)


def test_first_order_descent(rng):
    graph = random_graph(rng, 5)
    x = rng.normal(size=(8, 3, 5, 3))
    y = rng.normal(size=(8, 5, 2))
    for seed in range(10):
        p = init_params(ModelDims(3, 3, 4, 2, 5), seed)
        before, grads = loss_and_grads(p, graph, x, y, 1e-3)
        stepped = type(p)(p.dims, {k: v - 1e-6 * grads[k] for k, v in p.tensors.items()})
        after, _ = loss_and_grads(stepped, graph, x, y, 1e-3)
        assert after < before


# --- Adam --------------------------------------------------------------------

def scalar_adam(g_seq, x0, lr, b1=0.9, b2=0.999, eps=1e-8):
    x, m, v, trace = x0, 0.0, 0.0, []
    for t, g in enumerate(g_seq, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x = x - lr * (m / (1 - b1 ** t)) / ((v / (1 - b2 ** t)) ** 0.5 + eps)
        trace.append(x)
    return trace


def one_scalar(x):
    dims = ModelDims(1, 1, 1, 1, 1)
    t = {k: np.zeros(s) for k, s in dims.shapes().items()}
    t["W_g"] = np.array([[x]])
    return ModelParameters(dims, t)


def test_adam_matches_scalar_trace(rng):
    gs = rng.normal(size=10)
    p = one_scalar(0.3)
    mom = AdamMoments.zeros_like(p)
    ref = scalar_adam(gs, 0.3, 0.01)
    for t, g in enumerate(gs, start=1):
        grads = {k: np.zeros_like(v) for k, v in p.tensors.items()}
        grads["W_g"] = np.array([[g]])
        p, mom = adam_step(p, grads, mom, t, 0.01)
        assert abs(p["W_g"][0, 0] - ref[t - 1]) < 1e-12


def test_adam_zero_gradient_leaves_params():
    p = small_model(1)
    mom = AdamMoments.zeros_like(p)
    q, _ = adam_step(p, {k: np.zeros_like(v) for k, v in p.tensors.items()}, mom, 1, 0.1)
    assert all(np.array_equal(p[k], q[k]) for k in p.names())


def test_adam_constant_gradient_unit_step():
    p = one_scalar(0.0)
    mom = AdamMoments.zeros_like(p)
    prev = 0.0
    for t in range(1, 2001):
        grads = {k: np.zeros_like(v) for k, v in p.tensors.items()}
        grads["W_g"] = np.array([[0.37]])
        p, mom = adam_step(p, grads, mom, t, 1e-3)
        step = prev - p["W_g"][0, 0]
        prev = p["W_g"][0, 0]
    assert step == pytest.approx(1e-3, rel=1e-6)


def test_adam_rejects_step_zero():
    p = small_model(0)
    with pytest.raises(ValueError):
        adam_step(p, dict(p.tensors), AdamMoments.zeros_like(p), 0, 0.1)


# --- training loop -----------------------------------------------------------

def test_zero_epochs_returns_init(tiny_data):
    s, a, g = tiny_data
    r = train(replace(QUICK, epochs=0), s, g, a, AugmentSpec())
    init = init_params(r.params.dims, QUICK.seed)
    assert r.loss_history == []
    assert all(np.array_equal(r.params[k], init[k]) for k in init.names() if k != "b_o")
    assert np.all(r.params["b_o"] == np.mean(r.prepared.train_y))


def test_same_seed_same_history(tiny_data):
    s, a, g = tiny_data
    r1 = train(QUICK, s, g, a, AugmentSpec())
    r2 = train(QUICK, s, g, a, AugmentSpec())
    assert r1.loss_history == r2.loss_history
    r3 = train(replace(QUICK, seed=1), s, g, a, AugmentSpec())
    assert r3.loss_history != r1.loss_history


def test_lr_decay_schedule(tiny_data, monkeypatch):
    s, a, g = tiny_data
    seen = []
    real = train_mod.adam_step

    def spy(params, grads, moments, step, lr):
        seen.append(lr)
        return real(params, grads, moments, step, lr)

    monkeypatch.setattr(train_mod, "adam_step", spy)
    cfg = replace(QUICK, epochs=3, lr_decay=0.5)
    train(cfg, s, g, a, AugmentSpec())
    per_epoch = len(seen) // 3
    expected = [cfg.learning_rate * 0.5 ** e for e in range(3) for _ in range(per_epoch)]
    assert seen == expected
    with pytest.raises(ValueError):
        TrainConfig(lr_decay=0.0)


def test_attributes_off_equals_tgcn_run(tiny_data):
    s, a, g = tiny_data
    off = train(QUICK, s, g, a, AugmentSpec(False, False, 3))
    plain = train(QUICK, s, g, None, TGCN_SPEC)
    assert off.loss_history == plain.loss_history
    assert all(np.array_equal(off.params[k], plain.params[k]) for k in plain.params.names())


@pytest.mark.parametrize("model", ["gru", "gcn"])
def test_baselines_train(tiny_data, model):
    s, a, g = tiny_data
    r = train(replace(QUICK, model=model), s, g, a, AugmentSpec())
    assert len(r.loss_history) == QUICK.epochs and np.isfinite(r.loss_history).all()
    assert r.params.dims.kind == ("gcn" if model == "gcn" else "astgcn")


def test_checkpoint_round_trip_bit_identical(tmp_path, tiny_data):
    s, a, g = tiny_data
    r = train(replace(QUICK, checkpoint_every=1), s, g, a, AugmentSpec(), checkpoint_dir=tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "checkpoint.json", "checkpoint_epoch1.json", "checkpoint_epoch2.json", "checkpoint_epoch3.json"]
    m = load_checkpoint(tmp_path / "checkpoint.json")
    assert m.spec == r.model.spec and m.config == r.model.config
    assert m.max_speed == r.model.max_speed and m.encodings == r.model.encodings
    x = r.prepared.test_x
    assert np.array_equal(m.predict(x, g), r.model.predict(x, g))
    resaved = tmp_path / "again.json"
    save_checkpoint(resaved, m)
    assert resaved.read_bytes() == (tmp_path / "checkpoint.json").read_bytes()


def test_checkpoint_is_deterministic(tmp_path, tiny_data):
    s, a, g = tiny_data
    digests = []
    for k in range(2):
        train(QUICK, s, g, a, AugmentSpec(), checkpoint_dir=tmp_path / str(k))
        digests.append(hashlib.sha256((tmp_path / str(k) / "checkpoint.json").read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_bad_checkpoints(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(CheckpointError):
        load_checkpoint(p)
    p.write_text(json.dumps({"format": "astgcn-checkpoint"}))
    with pytest.raises(CheckpointError):
        load_checkpoint(p)


def test_divergence_saves_last_good(tmp_path, tiny_data, monkeypatch):
    s, a, g = tiny_data
    real = train_mod.loss_and_grads
    calls = {"n": 0}
    batches_per_epoch = -(-len(train_mod.prepare(s, a, AugmentSpec(), QUICK).train_x) // QUICK.batch_size)

    def flaky(*args):
        calls["n"] += 1
        value, grads = real(*args)
        return (float("nan") if calls["n"] > batches_per_epoch + 1 else value), grads

    monkeypatch.setattr(train_mod, "loss_and_grads", flaky)
    with pytest.raises(DivergenceDetectedError) as e:
        train(QUICK, s, g, a, AugmentSpec(), checkpoint_dir=tmp_path)
    assert e.value.epoch == 2
    saved = load_checkpoint(tmp_path / "checkpoint_last_good.json")
    assert saved.params.all_finite()
    monkeypatch.setattr(train_mod, "loss_and_grads", real)
    one = train(replace(QUICK, epochs=1), s, g, a, AugmentSpec())
    assert all(np.array_equal(saved.params[k], one.params[k]) for k in one.params.names())


@pytest.mark.slow
def test_loss_falls_below_quarter_of_first_epoch():
    series, attrs, graph = generate_synthetic(20, 2000, 0, effect_size=10.0)
    cfg = TrainConfig(epochs=200, hidden_units=16, seed=0)
    history = train(cfg, series, graph, attrs, AugmentSpec(True, True)).loss_history
    print(f"final/first loss ratio {history[-1] / history[0]:.4f}")
    assert history[-1] < 0.25 * history[0]
