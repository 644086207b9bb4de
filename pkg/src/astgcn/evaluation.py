"""Forecast metrics, multi-horizon evaluation, ablation and noise robustness.

All metrics are computed on denormalised speeds over the flattened matrix:

    rmse     = sqrt(mean((y - yhat)^2))
    mae      = mean(|y - yhat|)
    accuracy = 1 - ||y - yhat||_F / ||y||_F
    r2       = 1 - sum((y - yhat)^2) / sum((y - mean(y))^2)
    var      = 1 - Var(y - yhat) / Var(y)
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np

from .augment import AugmentSpec
from .dataset import AttributeBundle, SpeedSeries
from .errors import ShapeMismatchError, ZeroVarianceError
from .graph import RoadGraph
from .train import Prepared, TrainConfig, TrainedModel, TrainResult, prepare, train

GAUSSIAN_SIGMAS = (0.2, 0.4, 0.6, 0.8, 1.0, 2.0)
POISSON_LAMBDAS = (1, 2, 4, 8, 16)

REPORT_FIELDS = ("setting", "horizon_min", "rmse", "mae", "accuracy", "r2", "var")


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    mae: float
    accuracy: float
    r2: float
    var: float
    horizon_minutes: int = 0
    setting_label: str = ""

    def row(self) -> dict:
        return {"setting": self.setting_label, "horizon_min": self.horizon_minutes,
                "rmse": self.rmse, "mae": self.mae, "accuracy": self.accuracy,
                "r2": self.r2, "var": self.var}


def compute_metrics(y_true, y_pred, horizon_minutes: int = 0, setting_label: str = "") -> MetricReport:
    y = np.asarray(y_true, dtype=np.float64)
    yhat = np.asarray(y_pred, dtype=np.float64)
    if y.shape != yhat.shape:
        raise ShapeMismatchError(f"y_true {y.shape} vs y_pred {yhat.shape}")
    if y.size < 2:
        raise ShapeMismatchError("metrics need at least two values")
    resid = (y - yhat).ravel()
    y = y.ravel()
    sq = float(np.sum(resid * resid))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    var_y = float(np.var(y))
    if ss_tot == 0.0 or var_y == 0.0:
        raise ZeroVarianceError("true values are constant; R2 and explained variance undefined")
    return MetricReport(
        rmse=float(np.sqrt(sq / y.size)),
        mae=float(np.mean(np.abs(resid))),
        accuracy=1.0 - float(np.sqrt(sq)) / float(np.linalg.norm(y)),
        r2=1.0 - sq / ss_tot,
        var=1.0 - float(np.var(resid)) / var_y,
        horizon_minutes=horizon_minutes,
        setting_label=setting_label,
    )


def setting_label(model: TrainedModel) -> str:
    if model.config.model != "astgcn":
        return model.config.model.upper()
    return model.spec.label


def evaluate_horizons(model: TrainedModel, series: SpeedSeries, graph: RoadGraph,
                      attrs: AttributeBundle | None, horizons=(1,),
                      prepared: Prepared | None = None, inputs=None) -> list[MetricReport]:
    """One report per horizon (in steps), scoring only that step's predictions.

    ``inputs`` replaces the clean test inputs (used for perturbed runs).
    """
    data = prepared or prepare(series, attrs, model.spec, model.config, model.max_speed)
    if max(horizons) > model.config.t_out or min(horizons) < 1:
        raise ValueError(f"horizons {list(horizons)} outside 1..{model.config.t_out}")
    pred = model.predict(data.test_x if inputs is None else inputs, graph)
    label = setting_label(model)
    out = []
    for h in horizons:
        out.append(compute_metrics(data.test_y[..., h - 1] * model.max_speed,
                                   pred[..., h - 1] * model.max_speed,
                                   horizon_minutes=h * series.interval_minutes,
                                   setting_label=label))
    return out


def prediction_rows(model: TrainedModel, series: SpeedSeries, graph: RoadGraph,
                    attrs: AttributeBundle | None, horizon: int = 1,
                    prepared: Prepared | None = None) -> list[tuple[int, int, float, float]]:
    """(time, node, true, pred) in raw units for every test target at ``horizon``."""
    data = prepared or prepare(series, attrs, model.spec, model.config, model.max_speed)
    pred = model.predict(data.test_x, graph)[..., horizon - 1] * model.max_speed
    true = data.test_y[..., horizon - 1] * model.max_speed
    times = data.test_starts + horizon - 1
    return [(int(t), node, float(true[i, node]), float(pred[i, node]))
            for i, t in enumerate(times) for node in range(true.shape[1])]


# ---------------------------------------------------------------------------
# ablation

ABLATION_SETTINGS = (
    AugmentSpec(False, False),
    AugmentSpec(True, False),
    AugmentSpec(False, True),
    AugmentSpec(True, True),
)


def ablation_models(config: TrainConfig, series: SpeedSeries, graph: RoadGraph,
                    attrs: AttributeBundle, window_m: int = 2) -> dict[str, TrainResult]:
    """Train none / static / dynamic / both from the same seed, keyed by label."""
    out = {}
    for spec in ABLATION_SETTINGS:
        spec = replace(spec, window_m=window_m)
        out[spec.label] = train(config, series, graph, attrs, spec)
    return out


def run_ablation(config: TrainConfig, series: SpeedSeries, graph: RoadGraph,
                 attrs: AttributeBundle, window_m: int = 2, horizon: int = 1) -> list[MetricReport]:
    reports = []
    for result in ablation_models(config, series, graph, attrs, window_m).values():
        reports.extend(evaluate_horizons(result.model, series, graph, attrs, (horizon,),
                                         prepared=result.prepared))
    return reports


# ---------------------------------------------------------------------------
# perturbation


def perturb_inputs(inputs, kind: str, param: float, seed: int, max_speed: float) -> np.ndarray:
    """Add noise to the speed channel (feature 0) of normalised model inputs.

    gaussian: N(0, param^2) in normalised units.
    poisson: (Poisson(param) - param) / max_speed, i.e. centred count noise in
    raw speed units.
    """
    x = np.array(inputs, dtype=np.float64, copy=True)
    grid = GAUSSIAN_SIGMAS if kind == "gaussian" else POISSON_LAMBDAS
    if kind not in ("gaussian", "poisson"):
        raise ValueError(f"unknown noise kind {kind!r}")
    if param < 0 or (kind == "poisson" and param == 0):
        raise ValueError(f"{kind} noise parameter must be positive, got {param}")
    if param not in grid:
        warnings.warn(f"{kind} parameter {param} is outside the standard grid {grid}", stacklevel=2)
    rng = np.random.default_rng(seed)
    shape = x[..., 0].shape
    if kind == "gaussian":
        noise = rng.normal(0.0, param, size=shape) if param > 0 else np.zeros(shape)
    else:
        noise = (rng.poisson(param, size=shape) - param) / max_speed
    x[..., 0] += noise
    return x


@dataclass(frozen=True)
class PerturbationRow:
    kind: str
    param: float
    report: MetricReport

    def row(self) -> dict:
        d = {"kind": self.kind, "param": self.param}
        d.update({k: v for k, v in asdict(self.report).items()
                  if k in ("rmse", "mae", "accuracy", "r2", "var")})
        return d


def perturbation_analysis(model: TrainedModel, series: SpeedSeries, graph: RoadGraph,
                          attrs: AttributeBundle | None, sigmas=GAUSSIAN_SIGMAS,
                          lambdas=POISSON_LAMBDAS, seed: int = 0, horizon: int = 1,
                          prepared: Prepared | None = None) -> list[PerturbationRow]:
    """Metrics on clean test inputs followed by every noise setting."""
    data = prepared or prepare(series, attrs, model.spec, model.config, model.max_speed)
    rows = [PerturbationRow("none", 0.0, evaluate_horizons(
        model, series, graph, attrs, (horizon,), prepared=data)[0])]
    for kind, grid in (("gaussian", sigmas), ("poisson", lambdas)):
        for p in grid:
            noisy = perturb_inputs(data.test_x, kind, p, seed, model.max_speed)
            rep = evaluate_horizons(model, series, graph, attrs, (horizon,), prepared=data,
                                    inputs=noisy)[0]
            rows.append(PerturbationRow(kind, float(p), rep))
    return rows


# ---------------------------------------------------------------------------
# CSV output


def write_report_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in reports:
            w.writerow(r.row())


def read_report_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_predictions_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "node", "true", "pred"])
        for t, node, true, pred in rows:
            w.writerow([t, node, repr(true), repr(pred)])


def read_predictions_csv(path) -> list[tuple[int, int, float, float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [(int(t), int(n), float(a), float(b)) for t, n, a, b in reader]


def write_perturbation_csv(path, rows: list[PerturbationRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=("kind", "param", "rmse", "mae", "accuracy", "r2", "var"),
                           lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r.row())
