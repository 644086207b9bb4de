"""Loading, splitting and windowing of speed series and road attributes.

File formats (all comma separated):

* speed CSV: rectangular numeric matrix, no header. Time-major by default
  (one row per time step); ``nodes_as_rows=True`` reads the node-major layout.
* static attribute CSV: header ``node_id,category``; node ids are 0..n-1.
* dynamic attribute CSV: header ``timestamp,category`` (one value per step,
  broadcast to every node) or ``timestamp,node_id,category`` (full grid).

Categories are either vocabulary tokens (case-insensitive) or integer indices
into the vocabulary. Ordinal encoding maps index k of K classes to k / (K - 1);
one-hot expands to K columns in vocabulary order.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateSplitError,
    EmptyFileError,
    LengthMismatchError,
    NodeCountMismatchError,
    NonNumericCellError,
    RaggedRowsError,
    UnknownCategoryError,
)
from .graph import RoadGraph, build_graph

POI_CLASSES = (
    "catering",
    "enterprise",
    "shopping",
    "transportation",
    "education",
    "living",
    "medical",
    "accommodation",
    "other",
)
# ordinal order doubles as a severity scale
WEATHER_CLASSES = ("sunny", "cloudy", "fog", "light rain", "heavy rain")

ENCODINGS = ("ordinal", "onehot")


# ---------------------------------------------------------------------------
# numeric CSV


def read_numeric_csv(path, header: bool = False) -> np.ndarray:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if header and rows:
        rows = rows[1:]
    if not rows:
        raise EmptyFileError(f"{path} contains no data")
    width = len(rows[0])
    out = np.empty((len(rows), width), dtype=np.float64)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise RaggedRowsError(i, width, len(row))
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise NonNumericCellError(i, j, cell) from None
    return out


def write_numeric_csv(path, matrix: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(matrix, dtype=np.float64):
            w.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# speeds


@dataclass(frozen=True, eq=False)
class SpeedSeries:
    """Speeds stored time-major (T_total x n) in raw units."""

    values: np.ndarray
    interval_minutes: int = 15
    max_speed: float | None = None

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def t_total(self) -> int:
        return self.values.shape[0]

    def with_max_speed(self, max_speed: float) -> "SpeedSeries":
        return replace(self, max_speed=float(max_speed))

    def normalized(self) -> np.ndarray:
        if self.max_speed is None:
            raise ValueError("max_speed unset; split the series first")
        return self.values / self.max_speed

    def denormalize(self, x):
        if self.max_speed is None:
            raise ValueError("max_speed unset; split the series first")
        return np.asarray(x) * self.max_speed


def load_speed_csv(path, interval_minutes: int = 15, nodes_as_rows: bool = False,
                   header: bool = False) -> SpeedSeries:
    values = read_numeric_csv(path, header=header)
    if nodes_as_rows:
        values = values.T
    values = np.ascontiguousarray(values)
    return SpeedSeries(values=values, interval_minutes=interval_minutes)


def write_speed_csv(path, series: SpeedSeries, nodes_as_rows: bool = False) -> None:
    write_numeric_csv(path, series.values.T if nodes_as_rows else series.values)


# ---------------------------------------------------------------------------
# split and windows


@dataclass(frozen=True)
class DataSplit:
    train: range
    test: range
    max_speed: float


def chronological_split(series: SpeedSeries, train_ratio: float, seq_len: int = 4,
                        t_out: int = 1) -> DataSplit:
    """First floor(T * ratio) steps train, the rest test. max_speed comes from train only."""
    if not 0 < train_ratio < 1:
        raise ValueError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    t = series.t_total
    cut = int(np.floor(t * train_ratio))
    train, test = range(0, cut), range(cut, t)
    need = seq_len + t_out
    for name, r in (("train", train), ("test", test)):
        if len(r) < need:
            raise DegenerateSplitError(
                f"{name} partition has {len(r)} steps, needs at least {need}"
            )
    max_speed = float(series.values[:cut].max())
    if max_speed <= 0:
        raise DegenerateSplitError("training partition has no positive speed")
    return DataSplit(train=train, test=test, max_speed=max_speed)


@dataclass(frozen=True)
class WindowedSample:
    start: int
    seq_len: int
    t_out: int

    @property
    def input_indices(self) -> range:
        return range(self.start, self.start + self.seq_len)

    @property
    def target_indices(self) -> range:
        s = self.start + self.seq_len
        return range(s, s + self.t_out)


def make_windows(time_range: range, seq_len: int, t_out: int) -> list[WindowedSample]:
    """All stride-1 windows lying fully inside ``time_range``."""
    count = len(time_range) - seq_len - t_out + 1
    if count < 1:
        raise DegenerateSplitError(
            f"range of {len(time_range)} steps too short for seq_len={seq_len}, t_out={t_out}"
        )
    return [WindowedSample(time_range.start + k, seq_len, t_out) for k in range(count)]


# ---------------------------------------------------------------------------
# attributes


@dataclass(frozen=True)
class ChannelEncoding:
    name: str
    kind: str  # "ordinal" or "onehot"
    vocabulary: tuple[str, ...]

    @property
    def width(self) -> int:
        return 1 if self.kind == "ordinal" else len(self.vocabulary)

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "vocabulary": list(self.vocabulary)}

    @classmethod
    def from_dict(cls, d) -> "ChannelEncoding":
        return cls(d["name"], d["kind"], tuple(d["vocabulary"]))


@dataclass(frozen=True, eq=False)
class AttributeBundle:
    """Static (n x p) and dynamic (T x n x w) attributes, encoded into [0, 1]."""

    static_attrs: np.ndarray
    dynamic_attrs: np.ndarray
    encodings: tuple[ChannelEncoding, ...] = field(default=())

    @property
    def p(self) -> int:
        return self.static_attrs.shape[1]

    @property
    def w(self) -> int:
        return self.dynamic_attrs.shape[2]

    def permuted(self, order) -> "AttributeBundle":
        order = np.asarray(order)
        return replace(self, static_attrs=self.static_attrs[order],
                       dynamic_attrs=self.dynamic_attrs[:, order])


def _normalize_token(token: str) -> str:
    return " ".join(token.strip().lower().replace("_", " ").split())


def category_index(token: str, vocabulary, row: int) -> int:
    vocab = [_normalize_token(v) for v in vocabulary]
    t = _normalize_token(token)
    if t in vocab:
        return vocab.index(t)
    if t.isdigit() and int(t) < len(vocab):
        return int(t)
    raise UnknownCategoryError(token, row)


def encode_indices(indices, n_classes: int, encoding: str) -> np.ndarray:
    """Encode an integer array to shape (..., 1) ordinal or (..., K) one-hot."""
    idx = np.asarray(indices)
    if encoding == "ordinal":
        denom = max(n_classes - 1, 1)
        return (idx / denom)[..., None].astype(np.float64)
    if encoding == "onehot":
        return np.eye(n_classes)[idx]
    raise ValueError(f"unknown encoding {encoding!r}; expected one of {ENCODINGS}")


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyFileError(f"{path} contains no data")
    return [h.strip().lower() for h in rows[0]], rows[1:]


def load_static_attrs(path, encoding: str = "ordinal", vocabulary=POI_CLASSES,
                      n: int | None = None) -> np.ndarray:
    header, rows = _read_rows(path)
    if header[:2] != ["node_id", "category"]:
        raise ValueError(f"{path}: expected header node_id,category, got {header}")
    if not rows:
        raise EmptyFileError(f"{path} has a header but no rows")
    count = len(rows) if n is None else n
    if len(rows) != count:
        raise NodeCountMismatchError(f"{path} has {len(rows)} rows, graph has {count} nodes")
    idx = np.full(count, -1)
    for i, row in enumerate(rows, start=1):
        node = int(row[0])
        if not 0 <= node < count or idx[node] >= 0:
            raise NodeCountMismatchError(f"{path}: bad or repeated node_id {node} at row {i}")
        idx[node] = category_index(row[1], vocabulary, i)
    return encode_indices(idx, len(vocabulary), encoding)


def load_dynamic_attrs(path, encoding: str = "ordinal", n: int = 1,
                       vocabulary=WEATHER_CLASSES, t_total: int | None = None) -> np.ndarray:
    """Return a T x n x w tensor. Per-step files are broadcast to every node."""
    header, rows = _read_rows(path)
    if header[:2] != ["timestamp", "category"] and header[:3] != ["timestamp", "node_id", "category"]:
        raise ValueError(f"{path}: unexpected header {header}")
    per_node = header[1] == "node_id"
    if per_node:
        stamps: dict[str, int] = {}
        cells = []
        for i, row in enumerate(rows, start=1):
            t = stamps.setdefault(row[0], len(stamps))
            node = int(row[1])
            if not 0 <= node < n:
                raise NodeCountMismatchError(f"{path}: node_id {node} at row {i} outside 0..{n - 1}")
            cells.append((t, node, category_index(row[2], vocabulary, i)))
        idx = np.full((len(stamps), n), -1)
        for t, node, k in cells:
            idx[t, node] = k
        if (idx < 0).any():
            t, node = np.argwhere(idx < 0)[0]
            raise NodeCountMismatchError(f"{path}: no value for node {node} at step {t}")
    else:
        col = np.array([category_index(row[1], vocabulary, i) for i, row in enumerate(rows, start=1)])
        idx = np.repeat(col[:, None], n, axis=1)
    if t_total is not None and idx.shape[0] != t_total:
        raise LengthMismatchError(
            f"{path} has {idx.shape[0]} time steps, speed series has {t_total}"
        )
    return encode_indices(idx, len(vocabulary), encoding)


def load_attributes(n: int, t_total: int, poi_path=None, weather_path=None,
                    static_encoding: str = "ordinal", dynamic_encoding: str = "ordinal",
                    poi_vocabulary=POI_CLASSES, weather_vocabulary=WEATHER_CLASSES) -> AttributeBundle:
    """Assemble a bundle; a missing file yields a zero-width block."""
    encodings = []
    if poi_path is not None:
        static = load_static_attrs(poi_path, static_encoding, poi_vocabulary, n=n)
        encodings.append(ChannelEncoding("poi", static_encoding, tuple(poi_vocabulary)))
    else:
        static = np.zeros((n, 0))
    if weather_path is not None:
        dynamic = load_dynamic_attrs(weather_path, dynamic_encoding, n, weather_vocabulary, t_total)
        encodings.append(ChannelEncoding("weather", dynamic_encoding, tuple(weather_vocabulary)))
    else:
        dynamic = np.zeros((t_total, n, 0))
    return AttributeBundle(static, dynamic, tuple(encodings))


def timestamps(t_total: int, interval_minutes: int = 15,
               start: datetime = datetime(2015, 1, 1)) -> list[str]:
    step = timedelta(minutes=interval_minutes)
    return [(start + k * step).strftime("%Y-%m-%d %H:%M") for k in range(t_total)]


def write_static_attrs(path, classes, vocabulary=POI_CLASSES) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "category"])
        for i, k in enumerate(classes):
            w.writerow([i, vocabulary[int(k)]])


def write_dynamic_attrs(path, classes, interval_minutes: int = 15,
                        vocabulary=WEATHER_CLASSES) -> None:
    """``classes`` is a length-T vector (broadcast format) or a T x n grid."""
    classes = np.asarray(classes)
    stamps = timestamps(classes.shape[0], interval_minutes)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if classes.ndim == 1:
            w.writerow(["timestamp", "category"])
            for s, k in zip(stamps, classes):
                w.writerow([s, vocabulary[int(k)]])
        else:
            w.writerow(["timestamp", "node_id", "category"])
            for s, row in zip(stamps, classes):
                for node, k in enumerate(row):
                    w.writerow([s, node, vocabulary[int(k)]])


# ---------------------------------------------------------------------------
# synthetic data with planted attribute effects

STEPS_PER_DAY_15MIN = 96
# speed loss per unit effect_size for each POI class during dining hours
POI_DINING_WEIGHT = np.array([1.0, 0.2, 0.8, 0.1, 0.3, 0.6, 0.2, 0.7, 0.0])
DINING_HOURS = ((11.0, 13.5), (17.0, 19.5))
WEATHER_MEMORY = 3  # steps of weather history that slow traffic
DINING_SCALE = 0.5


def weather_response(severity: np.ndarray, memory: int = WEATHER_MEMORY) -> np.ndarray:
    """Mean severity over the ``memory`` steps before each t (edge-padded).

    Speeds at t drop by ``effect_size * weather_response(sev)[t]``.
    """
    sev = np.asarray(severity, dtype=np.float64)
    padded = np.concatenate([np.repeat(sev[:1], memory, axis=0), sev], axis=0)
    out = np.zeros_like(sev)
    for k in range(1, memory + 1):
        out += padded[memory - k: memory - k + len(sev)]
    return out / memory


def dining_mask(t_total: int, interval_minutes: int = 15) -> np.ndarray:
    hours = (np.arange(t_total) * interval_minutes / 60.0) % 24.0
    mask = np.zeros(t_total, dtype=bool)
    for lo, hi in DINING_HOURS:
        mask |= (hours >= lo) & (hours < hi)
    return mask


def _weather_chain(rng: np.random.Generator, t_total: int, stay: float = 0.75) -> np.ndarray:
    k = len(WEATHER_CLASSES)
    states = np.empty(t_total, dtype=np.int64)
    states[0] = rng.integers(k)
    u = rng.random(t_total)
    jump = rng.integers(1, 3, size=t_total) * rng.choice([-1, 1], size=t_total)
    for t in range(1, t_total):
        s = states[t - 1]
        if u[t] > stay:
            s = s + jump[t]
            s = -s if s < 0 else (2 * (k - 1) - s if s > k - 1 else s)
        states[t] = s
    return states


def _synthetic_graph(n: int) -> np.ndarray:
    """Regular circulant road graph: links to the next two sections plus the
    antipodal one (n even, n >= 6). Uniform degree keeps every row of the
    propagation matrix summing to one."""
    a = np.zeros((n, n))
    offsets = [1, 2] + ([n // 2] if n % 2 == 0 and n >= 6 else [])
    for i in range(n):
        for d in offsets:
            j = (i + d) % n
            if j != i:
                a[i, j] = a[j, i] = 1.0
    return a


def _smooth_field(rng: np.random.Generator, graph: RoadGraph, hops: int = 8) -> np.ndarray:
    """Random node field diffused over the graph, rescaled to [-1, 1]."""
    z = rng.normal(size=graph.n)
    for _ in range(hops):
        z = graph.propagation @ z
    z = z - z.mean()
    return z / max(np.abs(z).max(), 1e-12)


@dataclass(frozen=True, eq=False)
class SyntheticData:
    series: SpeedSeries
    attrs: AttributeBundle
    graph: RoadGraph
    poi_classes: np.ndarray
    weather_classes: np.ndarray


def generate_synthetic_full(n: int = 20, t_total: int = 2000, seed: int = 0,
                            effect_size: float = 10.0, interval_minutes: int = 15,
                            noise_scale: float = 2.0) -> SyntheticData:
    """Like :func:`generate_synthetic` but also returns the raw class labels."""
    if n < 2 or t_total < 200:
        raise ValueError("generate_synthetic needs n >= 2 and t_total >= 200")
    rng = np.random.default_rng(seed)
    graph = build_graph(_synthetic_graph(n))
    # land use is clustered: consecutive road sections share a POI class
    block = max(2, n // 5)
    poi = np.repeat(rng.integers(len(POI_CLASSES), size=-(-n // block)), block)[:n]
    weather = _weather_chain(rng, t_total)

    steps_per_day = 24 * 60 / interval_minutes
    t = np.arange(t_total)[:, None]
    # neighbouring roads share similar levels and daily profiles
    base = 45.0 + 0.2 * _smooth_field(rng, graph)
    amp = 8.0 + 0.1 * _smooth_field(rng, graph)
    phase = 0.001 * _smooth_field(rng, graph)
    daily = base + amp * np.sin(2 * np.pi * (t / steps_per_day - 0.3 - phase))

    noise = np.zeros((t_total, n))
    shocks = rng.normal(0.0, noise_scale, size=(t_total, n))
    prev = np.zeros(n)
    for k in range(t_total):
        prev = 0.7 * prev + graph.propagation @ (graph.propagation @ shocks[k])
        noise[k] = prev

    severity = weather / (len(WEATHER_CLASSES) - 1)
    weather_drop = effect_size * weather_response(severity)[:, None]
    dining_drop = (effect_size * DINING_SCALE * dining_mask(t_total, interval_minutes)[:, None]
                   * POI_DINING_WEIGHT[poi][None, :])
    speeds = np.maximum(daily + noise - weather_drop - dining_drop, 0.0)

    attrs = AttributeBundle(
        static_attrs=encode_indices(poi, len(POI_CLASSES), "ordinal"),
        dynamic_attrs=encode_indices(np.repeat(weather[:, None], n, axis=1),
                                     len(WEATHER_CLASSES), "ordinal"),
        encodings=(ChannelEncoding("poi", "ordinal", POI_CLASSES),
                   ChannelEncoding("weather", "ordinal", WEATHER_CLASSES)),
    )
    series = SpeedSeries(values=speeds, interval_minutes=interval_minutes)
    return SyntheticData(series, attrs, graph, poi, weather)


def generate_synthetic(n: int = 20, t_total: int = 2000, seed: int = 0,
                       effect_size: float = 10.0, interval_minutes: int = 15
                       ) -> tuple[SpeedSeries, AttributeBundle, RoadGraph]:
    """Synthetic network whose speeds respond to weather and POI class.

    Speeds are a per-node daily sinusoid plus graph-smoothed AR(1) noise, minus
    ``effect_size`` times the trailing three-step mean weather severity, minus a
    POI-class-dependent offset during dining hours (also scaled by
    ``effect_size``). Weather follows a sticky Markov chain shared by all nodes.
    Fully determined by ``seed``.
    """
    d = generate_synthetic_full(n, t_total, seed, effect_size, interval_minutes)
    return d.series, d.attrs, d.graph


def write_synthetic(out_dir, data: SyntheticData) -> dict[str, Path]:
    from .graph import write_adjacency_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "adjacency": out / "adjacency.csv",
        "speeds": out / "speeds.csv",
        "poi": out / "poi.csv",
        "weather": out / "weather.csv",
    }
    write_adjacency_csv(paths["adjacency"], data.graph)
    write_speed_csv(paths["speeds"], data.series)
    write_static_attrs(paths["poi"], data.poi_classes)
    write_dynamic_attrs(paths["weather"], data.weather_classes, data.series.interval_minutes)
    return paths
