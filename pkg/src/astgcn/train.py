"""Loss, Adam, the mini-batch training loop and checkpoint files."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .augment import AugmentSpec, augment_series
from .dataset import (
    AttributeBundle,
    ChannelEncoding,
    DataSplit,
    SpeedSeries,
    chronological_split,
    make_windows,
)
from .errors import (
    CheckpointError,
    DivergenceDetectedError,
    NonFiniteActivationError,
    ShapeMismatchError,
)
from .graph import RoadGraph, isolated_graph
from .model import ModelDims, ModelParameters, backward, forward, init_params

log = logging.getLogger(__name__)

MODELS = ("astgcn", "gru", "gcn")
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 64
    train_ratio: float = 0.8
    epochs: int = 3000
    hidden_units: int = 100
    gc_units: int | None = None  # None -> hidden_units
    gc_layers: int = 1
    lambda_reg: float = 1.5e-3
    seed: int = 0
    seq_len: int = 4
    t_out: int = 4
    model: str = "astgcn"
    checkpoint_every: int = 0  # 0 -> only the final checkpoint
    lr_decay: float = 1.0  # learning rate multiplied by this after every epoch

    def __post_init__(self):
        if not 0 < self.train_ratio < 1:
            raise ValueError("train_ratio must lie in (0, 1)")
        for name in ("learning_rate", "batch_size", "hidden_units", "seq_len", "t_out"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0 or self.lambda_reg < 0 or self.checkpoint_every < 0:
            raise ValueError("epochs, lambda_reg and checkpoint_every must be non-negative")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must lie in (0, 1]")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")

    @property
    def gc_width(self) -> int:
        return self.gc_units or self.hidden_units

    @classmethod
    def from_mapping(cls, values: dict) -> "TrainConfig":
        """Build from string or typed values; unknown keys are ignored."""
        kw = {}
        for f in fields(cls):
            if f.name not in values or values[f.name] is None:
                continue
            v = values[f.name]
            if isinstance(v, str):
                typ = f.type if isinstance(f.type, str) else f.type.__name__
                v = float(v) if typ.startswith("float") else (None if v.lower() == "none" else
                                                              (v if typ == "str" else int(v)))
            kw[f.name] = v
        return cls(**kw)


# ---------------------------------------------------------------------------
# loss


def regularizer(params: ModelParameters) -> float:
    return float(sum(np.sum(params[k] ** 2) for k in params.weight_names()))


def loss(y_true, y_pred, params: ModelParameters | None = None, lambda_reg: float = 0.0) -> float:
    """Mean squared error plus lambda * sum of squared weights (biases excluded)."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ShapeMismatchError(f"y_true {y_true.shape} vs y_pred {y_pred.shape}")
    value = float(np.mean((y_true - y_pred) ** 2))
    if params is not None and lambda_reg:
        value += lambda_reg * regularizer(params)
    return value


def loss_and_grads(params: ModelParameters, graph: RoadGraph, inputs, targets,
                   lambda_reg: float) -> tuple[float, dict[str, np.ndarray]]:
    pred, tape = forward(inputs, params, graph)
    value = loss(targets, pred, params, lambda_reg)
    grads = backward(tape, 2.0 * (pred - targets) / pred.size)
    if lambda_reg:
        for k in params.weight_names():
            grads[k] += 2.0 * lambda_reg * params[k]
    return value, grads


# ---------------------------------------------------------------------------
# Adam


@dataclass(eq=False)
class AdamMoments:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def zeros_like(cls, params: ModelParameters) -> "AdamMoments":
        return cls({k: np.zeros_like(a) for k, a in params.tensors.items()},
                   {k: np.zeros_like(a) for k, a in params.tensors.items()})


def adam_step(params: ModelParameters, grads, moments: AdamMoments, step_index: int,
              lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
              ) -> tuple[ModelParameters, AdamMoments]:
    """One bias-corrected Adam update; returns new parameters and moments."""
    if step_index < 1:
        raise ValueError("step_index starts at 1")
    c1 = 1.0 - beta1 ** step_index
    c2 = 1.0 - beta2 ** step_index
    new_p, new_m, new_v = {}, {}, {}
    for k, p in params.tensors.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ShapeMismatchError(f"gradient {k} has shape {g.shape}, parameter {p.shape}")
        m = beta1 * moments.m[k] + (1.0 - beta1) * g
        v = beta2 * moments.v[k] + (1.0 - beta2) * g * g
        new_p[k] = p - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        new_m[k], new_v[k] = m, v
    return ModelParameters(params.dims, new_p), AdamMoments(new_m, new_v)


# ---------------------------------------------------------------------------
# data preparation


@dataclass(eq=False)
class Prepared:
    split: DataSplit
    x_norm: np.ndarray          # T x n
    features: np.ndarray        # T x n x F (augmented)
    train_x: np.ndarray         # N x L x n x F
    train_y: np.ndarray         # N x n x t_out
    test_x: np.ndarray
    test_y: np.ndarray
    test_starts: np.ndarray     # first target index of each test window


def window_tensors(features, x_norm, windows) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    L, T = windows[0].seq_len, windows[0].t_out
    starts = np.array([w.start for w in windows])
    inputs = features[starts[:, None] + np.arange(L)]
    targets = x_norm[starts[:, None] + L + np.arange(T)].transpose(0, 2, 1)
    return inputs, np.ascontiguousarray(targets), starts + L


def prepare(series: SpeedSeries, attrs: AttributeBundle | None, spec: AugmentSpec,
            config: TrainConfig, max_speed: float | None = None) -> Prepared:
    split = chronological_split(series, config.train_ratio, config.seq_len, config.t_out)
    if max_speed is not None:
        split = replace(split, max_speed=max_speed)
    x = series.with_max_speed(split.max_speed).normalized()
    feats = augment_series(x, attrs, spec)
    tr_x, tr_y, _ = window_tensors(feats, x, make_windows(split.train, config.seq_len, config.t_out))
    te_x, te_y, te_s = window_tensors(feats, x, make_windows(split.test, config.seq_len, config.t_out))
    return Prepared(split, x, feats, tr_x, tr_y, te_x, te_y, te_s)


def model_dims(config: TrainConfig, n_features: int, n_nodes: int) -> ModelDims:
    if config.model == "gcn":
        return ModelDims(n_features * config.seq_len, config.gc_width, config.hidden_units,
                         config.t_out, n_nodes, 2, "gcn")
    return ModelDims(n_features, config.gc_width, config.hidden_units, config.t_out,
                     n_nodes, config.gc_layers)


def effective_graph(config: TrainConfig, graph: RoadGraph) -> RoadGraph:
    """GRU-only baseline drops the topology (identity propagation)."""
    return isolated_graph(graph.n) if config.model == "gru" else graph


# ---------------------------------------------------------------------------
# trained model + checkpoints


@dataclass(eq=False)
class TrainedModel:
    params: ModelParameters
    spec: AugmentSpec
    config: TrainConfig
    max_speed: float
    encodings: tuple[ChannelEncoding, ...] = ()

    def predict(self, inputs, graph: RoadGraph, chunk: int = 256) -> np.ndarray:
        """Normalised predictions for a B x L x n x F batch."""
        g = effective_graph(self.config, graph)
        out = [forward(inputs[i:i + chunk], self.params, g)[0]
               for i in range(0, len(inputs), chunk)]
        return np.concatenate(out, axis=0)

    def to_dict(self) -> dict:
        return {
            "format": "astgcn-checkpoint",
            "version": CHECKPOINT_VERSION,
            "dims": self.params.dims.to_dict(),
            "augment": self.spec.to_dict(),
            "config": asdict(self.config),
            "max_speed": self.max_speed,
            "encodings": [e.to_dict() for e in self.encodings],
            "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                       for k, v in self.params.tensors.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("format") != "astgcn-checkpoint" or "version" not in d:
            raise CheckpointError("not an astgcn checkpoint")
        if d["version"] != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {d['version']}")
        dims = ModelDims(**d["dims"])
        tensors = {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"])
                   for k, v in d["params"].items()}
        if {k: t.shape for k, t in tensors.items()} != dims.shapes():
            raise CheckpointError("parameter shapes do not match recorded dims")
        return cls(ModelParameters(dims, tensors), AugmentSpec.from_dict(d["augment"]),
                   TrainConfig(**d["config"]), float(d["max_speed"]),
                   tuple(ChannelEncoding.from_dict(e) for e in d["encodings"]))


def save_checkpoint(path, model: TrainedModel) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model.to_dict(), sort_keys=True))
    return path


def load_checkpoint(path) -> TrainedModel:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path}: {e}") from None
    return TrainedModel.from_dict(d)


# ---------------------------------------------------------------------------
# training loop


@dataclass(eq=False)
class TrainResult:
    model: TrainedModel
    loss_history: list[float] = field(default_factory=list)
    prepared: Prepared | None = None

    @property
    def params(self) -> ModelParameters:
        return self.model.params


def output_bias_name(params: ModelParameters) -> str:
    return "b_2" if params.dims.kind == "gcn" else "b_o"


def train(config: TrainConfig, series: SpeedSeries, graph: RoadGraph,
          attrs: AttributeBundle | None = None, spec: AugmentSpec | None = None,
          checkpoint_dir=None, prepared: Prepared | None = None) -> TrainResult:
    """Train with Adam on shuffled mini-batches of windows.

    Returns the final model and the per-epoch mean training loss. With
    ``checkpoint_dir`` set, ``checkpoint.json`` is written at the end and
    ``checkpoint_epoch{k}.json`` every ``config.checkpoint_every`` epochs.
    """
    spec = spec or AugmentSpec(False, False)
    if series.n != graph.n:
        raise ShapeMismatchError(f"speed series has {series.n} nodes, graph has {graph.n}")
    data = prepared or prepare(series, attrs, spec, config)
    g = effective_graph(config, graph)
    encodings = attrs.encodings if attrs is not None else ()
    params = init_params(model_dims(config, data.features.shape[-1], graph.n), config.seed)
    # start the output at the mean target so Adam's second moments are not
    # inflated by a large initial level error
    params.tensors[output_bias_name(params)][:] = float(np.mean(data.train_y))
    moments = AdamMoments.zeros_like(params)
    rng = np.random.default_rng(config.seed)
    n_train = len(data.train_x)
    history: list[float] = []
    step = 0

    def snapshot(p):
        return TrainedModel(p, spec, config, data.split.max_speed, encodings)

    for epoch in range(1, config.epochs + 1):
        lr = config.learning_rate * config.lr_decay ** (epoch - 1)
        order = rng.permutation(n_train)
        epoch_start = params
        total = 0.0
        for lo in range(0, n_train, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            try:
                value, grads = loss_and_grads(params, g, data.train_x[idx], data.train_y[idx],
                                              config.lambda_reg)
            except NonFiniteActivationError:
                value = float("nan")
            if not np.isfinite(value):
                last_good = snapshot(epoch_start)
                if checkpoint_dir is not None:
                    save_checkpoint(Path(checkpoint_dir) / "checkpoint_last_good.json", last_good)
                raise DivergenceDetectedError(epoch, last_good)
            step += 1
            params, moments = adam_step(params, grads, moments, step, lr)
            total += value * len(idx)
        history.append(total / n_train)
        log.debug("epoch %d loss %.6g", epoch, history[-1])
        if checkpoint_dir is not None and config.checkpoint_every and epoch % config.checkpoint_every == 0:
            save_checkpoint(Path(checkpoint_dir) / f"checkpoint_epoch{epoch}.json", snapshot(params))

    result = TrainResult(snapshot(params), history, data)
    if checkpoint_dir is not None:
        save_checkpoint(Path(checkpoint_dir) / "checkpoint.json", result.model)
    return result
