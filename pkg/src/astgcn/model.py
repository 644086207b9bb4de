"""AST-GCN forecaster with hand-written forward and backward passes.

One recurrent step::

    G   = gc(E_t)                               # A_hat @ E_t @ W_g + b_g
    u   = sigmoid([G | h_prev] @ W_u + b_u)
    r   = sigmoid([G | h_prev] @ W_r + b_r)
    c   = tanh([G | r * h_prev] @ W_c + b_c)
    h   = u * h_prev + (1 - u) * c

After the last input step the hidden state of every node is mapped to all
``t_out`` horizons by a shared linear head ``h @ W_o + b_o``.

All arrays are float64. Every function accepts an optional leading batch axis:
a sequence is ``L x n x F`` or ``B x L x n x F``.

``kind="gcn"`` selects the GCN-only baseline (no recurrence): the input window
is flattened per node and passed through two graph convolutions with a ReLU
between them.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NonFiniteActivationError, ShapeMismatchError, TapeMismatchError
from .graph import RoadGraph

KINDS = ("astgcn", "gcn")


@dataclass(frozen=True)
class ModelDims:
    n_features: int
    gc_units: int
    hidden: int
    t_out: int
    n_nodes: int
    gc_layers: int = 1
    kind: str = "astgcn"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.gc_layers not in (1, 2):
            raise ValueError("gc_layers must be 1 or 2")
        for name in ("n_features", "gc_units", "hidden", "t_out", "n_nodes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def shapes(self) -> dict[str, tuple[int, ...]]:
        F, g, h, T = self.n_features, self.gc_units, self.hidden, self.t_out
        if self.kind == "gcn":
            return {"W_1": (F, g), "b_1": (g,), "W_2": (g, T), "b_2": (T,)}
        s = {"W_g": (F, g), "b_g": (g,)}
        if self.gc_layers == 2:
            s.update({"W_g2": (g, g), "b_g2": (g,)})
        for gate in "urc":
            s[f"W_{gate}"] = (g + h, h)
            s[f"b_{gate}"] = (h,)
        s.update({"W_o": (h, T), "b_o": (T,)})
        return s

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class ModelParameters:
    dims: ModelDims
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def weight_names(self) -> list[str]:
        """Matrices that are regularised; biases excluded."""
        return [k for k in self.tensors if k.startswith("W_")]

    @property
    def count(self) -> int:
        return sum(v.size for v in self.tensors.values())

    def copy(self) -> "ModelParameters":
        return ModelParameters(self.dims, {k: v.copy() for k, v in self.tensors.items()})

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.tensors.values()])

    def with_flat(self, vec: np.ndarray) -> "ModelParameters":
        out, i = {}, 0
        for k, v in self.tensors.items():
            out[k] = np.asarray(vec[i:i + v.size], dtype=np.float64).reshape(v.shape).copy()
            i += v.size
        return ModelParameters(self.dims, out)

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.tensors.values())


def glorot_bound(shape) -> float:
    return float(np.sqrt(6.0 / (shape[0] + shape[1])))


def init_params(dims: ModelDims, seed: int) -> ModelParameters:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in dims.shapes().items():
        if name.startswith("W_"):
            b = glorot_bound(shape)
            tensors[name] = rng.uniform(-b, b, size=shape)
        else:
            tensors[name] = np.zeros(shape)
    return ModelParameters(dims, tensors)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _flat(x: np.ndarray) -> np.ndarray:
    return x.reshape(-1, x.shape[-1])


def _outer_sum(x: np.ndarray, dz: np.ndarray) -> np.ndarray:
    """Sum over every leading axis of x^T dz."""
    return _flat(x).T @ _flat(dz)


# ---------------------------------------------------------------------------
# graph convolution


@dataclass(eq=False)
class GcCache:
    ae: np.ndarray                 # A_hat @ E
    z1: np.ndarray | None = None   # first-layer pre-activation (2-layer only)
    a_h1: np.ndarray | None = None  # A_hat @ relu(z1)


def _gc(E, params: ModelParameters, graph: RoadGraph):
    ae = np.matmul(graph.propagation, E)
    if params.dims.gc_layers == 1:
        return ae @ params["W_g"] + params["b_g"], GcCache(ae)
    z1 = ae @ params["W_g"] + params["b_g"]
    a_h1 = np.matmul(graph.propagation, np.maximum(z1, 0.0))
    return a_h1 @ params["W_g2"] + params["b_g2"], GcCache(ae, z1, a_h1)


def gc(E_t, params: ModelParameters, graph: RoadGraph) -> np.ndarray:
    """Graph convolution of an n x F input (leading batch axes allowed)."""
    E = np.asarray(E_t, dtype=np.float64)
    if E.ndim < 2 or E.shape[-2] != graph.n or E.shape[-1] != params.dims.n_features:
        raise ShapeMismatchError(
            f"gc input {E.shape} incompatible with n={graph.n}, F={params.dims.n_features}"
        )
    return _gc(E, params, graph)[0]


def _gc_backward(cache: GcCache, dG, params: ModelParameters, graph: RoadGraph, grads):
    if params.dims.gc_layers == 1:
        grads["W_g"] += _outer_sum(cache.ae, dG)
        grads["b_g"] += _flat(dG).sum(axis=0)
        return
    grads["W_g2"] += _outer_sum(cache.a_h1, dG)
    grads["b_g2"] += _flat(dG).sum(axis=0)
    d_ah1 = dG @ params["W_g2"].T
    # propagation is symmetric, so its transpose is itself
    dz1 = np.matmul(graph.propagation, d_ah1) * (cache.z1 > 0)
    grads["W_g"] += _outer_sum(cache.ae, dz1)
    grads["b_g"] += _flat(dz1).sum(axis=0)


# ---------------------------------------------------------------------------
# recurrent cell


@dataclass(eq=False)
class CellState:
    h: np.ndarray
    h_prev: np.ndarray
    gc_cache: GcCache
    x_gate: np.ndarray   # [G | h_prev]
    x_cand: np.ndarray   # [G | r * h_prev]
    u: np.ndarray
    r: np.ndarray
    c: np.ndarray


def cell_step(E_t, h_prev, params: ModelParameters, graph: RoadGraph) -> CellState:
    dims = params.dims
    E = np.asarray(E_t, dtype=np.float64)
    hp = np.asarray(h_prev, dtype=np.float64)
    if E.shape[-2:] != (graph.n, dims.n_features):
        raise ShapeMismatchError(f"E_t has shape {E.shape}, expected (..., {graph.n}, {dims.n_features})")
    if hp.shape != E.shape[:-1] + (dims.hidden,):
        raise ShapeMismatchError(f"h_prev has shape {hp.shape}, expected {E.shape[:-1] + (dims.hidden,)}")
    G, cache = _gc(E, params, graph)
    x_gate = np.concatenate([G, hp], axis=-1)
    u = sigmoid(x_gate @ params["W_u"] + params["b_u"])
    r = sigmoid(x_gate @ params["W_r"] + params["b_r"])
    x_cand = np.concatenate([G, r * hp], axis=-1)
    c = np.tanh(x_cand @ params["W_c"] + params["b_c"])
    h = u * hp + (1.0 - u) * c
    if not np.isfinite(h).all():
        raise NonFiniteActivationError("hidden state became non-finite")
    return CellState(h, hp, cache, x_gate, x_cand, u, r, c)


# ---------------------------------------------------------------------------
# full model


@dataclass(eq=False)
class Tape:
    params: ModelParameters
    graph: RoadGraph
    batched: bool
    pred_shape: tuple[int, ...]
    states: list = field(default_factory=list)
    gcn_cache: tuple | None = None


def _check_sequence(seq: np.ndarray, params: ModelParameters, graph: RoadGraph):
    if seq.ndim != 4 or seq.shape[2] != graph.n:
        raise ShapeMismatchError(f"sequence must be [B x] L x {graph.n} x F, got {seq.shape}")


def forward(sequence, params: ModelParameters, graph: RoadGraph):
    """Run the model; returns (predictions, tape).

    Predictions are in the same (normalised) units as the speed inputs,
    shape n x t_out, or B x n x t_out for batched input.
    """
    seq = np.asarray(sequence, dtype=np.float64)
    batched = seq.ndim == 4
    if not batched:
        seq = seq[None]
    _check_sequence(seq, params, graph)
    if params.dims.kind == "gcn":
        pred, tape = _forward_gcn(seq, params, graph)
    else:
        B, L, n, F = seq.shape
        if F != params.dims.n_features:
            raise ShapeMismatchError(f"sequence has {F} features, model expects {params.dims.n_features}")
        tape = Tape(params, graph, batched, ())
        h = np.zeros((B, n, params.dims.hidden))
        for t in range(L):
            st = cell_step(seq[:, t], h, params, graph)
            tape.states.append(st)
            h = st.h
        pred = h @ params["W_o"] + params["b_o"]
    tape.batched = batched
    tape.pred_shape = pred.shape
    return (pred if batched else pred[0]), tape


def backward(tape: Tape, d_predictions) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every parameter, given dLoss/dPredictions."""
    dY = np.asarray(d_predictions, dtype=np.float64)
    if not tape.batched:
        dY = dY[None]
    if dY.shape != tape.pred_shape:
        raise TapeMismatchError(f"upstream gradient shape {dY.shape} != predictions {tape.pred_shape}")
    params, graph = tape.params, tape.graph
    grads = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    if params.dims.kind == "gcn":
        _backward_gcn(tape, dY, grads)
        return grads

    g = params.dims.gc_units
    last = tape.states[-1]
    grads["W_o"] += _outer_sum(last.h, dY)
    grads["b_o"] += _flat(dY).sum(axis=0)
    dh = dY @ params["W_o"].T
    W_u, W_r, W_c = params["W_u"], params["W_r"], params["W_c"]
    for st in reversed(tape.states):
        u, r, c, hp = st.u, st.r, st.c, st.h_prev
        du = dh * (hp - c)
        dc = dh * (1.0 - u)
        dh_prev = dh * u

        dzc = dc * (1.0 - c * c)
        grads["W_c"] += _outer_sum(st.x_cand, dzc)
        grads["b_c"] += _flat(dzc).sum(axis=0)
        dx_cand = dzc @ W_c.T
        dG = dx_cand[..., :g]
        d_rh = dx_cand[..., g:]
        dr = d_rh * hp
        dh_prev += d_rh * r

        dzu = du * u * (1.0 - u)
        dzr = dr * r * (1.0 - r)
        grads["W_u"] += _outer_sum(st.x_gate, dzu)
        grads["b_u"] += _flat(dzu).sum(axis=0)
        grads["W_r"] += _outer_sum(st.x_gate, dzr)
        grads["b_r"] += _flat(dzr).sum(axis=0)
        dx_gate = dzu @ W_u.T + dzr @ W_r.T
        dG = dG + dx_gate[..., :g]
        dh_prev += dx_gate[..., g:]

        _gc_backward(st.gc_cache, dG, params, graph, grads)
        dh = dh_prev
    return grads


# ---------------------------------------------------------------------------
# GCN-only baseline


def flatten_window(seq: np.ndarray) -> np.ndarray:
    """B x L x n x F -> B x n x (L*F), step-major per node."""
    B, L, n, F = seq.shape
    return seq.transpose(0, 2, 1, 3).reshape(B, n, L * F)


def _forward_gcn(seq, params: ModelParameters, graph: RoadGraph):
    X = flatten_window(seq)
    if X.shape[-1] != params.dims.n_features:
        raise ShapeMismatchError(
            f"flattened window has {X.shape[-1]} features, model expects {params.dims.n_features}"
        )
    ax = np.matmul(graph.propagation, X)
    z1 = ax @ params["W_1"] + params["b_1"]
    a_h = np.matmul(graph.propagation, np.maximum(z1, 0.0))
    pred = a_h @ params["W_2"] + params["b_2"]
    tape = Tape(params, graph, True, pred.shape, gcn_cache=(ax, z1, a_h))
    return pred, tape


def _backward_gcn(tape: Tape, dY, grads):
    ax, z1, a_h = tape.gcn_cache
    p, prop = tape.params, tape.graph.propagation
    grads["W_2"] += _outer_sum(a_h, dY)
    grads["b_2"] += _flat(dY).sum(axis=0)
    dz1 = np.matmul(prop, dY @ p["W_2"].T) * (z1 > 0)
    grads["W_1"] += _outer_sum(ax, dz1)
    grads["b_1"] += _flat(dz1).sum(axis=0)
