"""Command line interface.

Subcommands map onto the experiments:

    synth    write a synthetic network (adjacency, speeds, POI, weather CSVs)
    train    fit a model, write checkpoint.json and loss_history.csv
    eval     per-horizon metric report, prediction dumps and SVG charts
    ablate   none / static / dynamic / both attribute settings
    perturb  Gaussian and Poisson input-noise robustness curves
    sweep    retrain over an epochs or hidden-units grid

Settings come from (lowest to highest precedence) built-in defaults, a flat
``key = value`` config file given with ``--config``, and command-line flags.
Config keys use the long flag names with dashes replaced by underscores,
e.g. ``hidden_units = 64`` or ``static = off``. ``#`` starts a comment.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import evaluation as ev
from .augment import AugmentSpec
from .dataset import (
    AttributeBundle,
    generate_synthetic_full,
    load_attributes,
    load_speed_csv,
    write_synthetic,
)
from .errors import AstgcnError, NodeCountMismatchError
from .graph import load_adjacency_csv
from .svg import line_chart
from .train import TrainConfig, load_checkpoint, train

log = logging.getLogger("astgcn")

EPOCH_GRID = (500, 1000, 1500, 2000, 3000, 3500)
UNIT_GRID = (8, 16, 32, 64, 100, 128)


class UsageError(Exception):
    pass


def read_config_file(path) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _on_off(value) -> bool | None:
    if value is None or isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("on", "true", "yes", "1"):
        return True
    if v in ("off", "false", "no", "0"):
        return False
    raise UsageError(f"expected on/off, got {value!r}")


def _int_list(text: str) -> list[int]:
    return [int(float(t)) for t in str(text).split(",") if t.strip()]


# ---------------------------------------------------------------------------
# argument parsing


def _add_data_args(p):
    p.add_argument("--adjacency", help="n x n adjacency CSV")
    p.add_argument("--speeds", help="speed matrix CSV")
    p.add_argument("--poi", help="static attribute CSV (node_id,category)")
    p.add_argument("--weather", help="dynamic attribute CSV (timestamp[,node_id],category)")
    p.add_argument("--nodes-as-rows", default=None, help="speed CSV is node-major (on/off)")
    p.add_argument("--interval-minutes", type=int, default=None)
    p.add_argument("--static-encoding", choices=("ordinal", "onehot"), default=None)
    p.add_argument("--dynamic-encoding", choices=("ordinal", "onehot"), default=None)


def _add_train_args(p):
    p.add_argument("--static", default=None, help="use static attributes (on/off)")
    p.add_argument("--dynamic", default=None, help="use dynamic attributes (on/off)")
    p.add_argument("--window-m", type=int, default=None, help="trailing dynamic steps")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--hidden-units", type=int, default=None)
    p.add_argument("--gc-units", type=int, default=None)
    p.add_argument("--gc-layers", type=int, choices=(1, 2), default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--lr-decay", type=float, default=None, help="per-epoch learning-rate factor")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lambda-reg", type=float, default=None)
    p.add_argument("--train-ratio", type=float, default=None)
    p.add_argument("--seq-len", type=int, default=None)
    p.add_argument("--t-out", type=int, default=None)
    p.add_argument("--model", choices=("astgcn", "gru", "gcn"), default=None)
    p.add_argument("--checkpoint-every", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="astgcn", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", default=None)

    p = sub.add_parser("synth", help="write synthetic data files")
    common(p)
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--effect-size", type=float, default=None)
    p.add_argument("--interval-minutes", type=int, default=None)

    p = sub.add_parser("train", help="train a model")
    common(p)
    _add_data_args(p)
    _add_train_args(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint per horizon")
    common(p)
    _add_data_args(p)
    p.add_argument("--checkpoint", required=False)
    p.add_argument("--horizons", default=None, help="comma-separated minutes, e.g. 15,30,45,60")
    p.add_argument("--node", type=int, default=None, help="node plotted in the SVG chart")
    p.add_argument("--start", type=int, default=None, help="first test target plotted")
    p.add_argument("--length", type=int, default=None, help="number of steps plotted")

    p = sub.add_parser("ablate", help="attribute ablation")
    common(p)
    _add_data_args(p)
    _add_train_args(p)

    p = sub.add_parser("perturb", help="input-noise robustness")
    common(p)
    _add_data_args(p)
    p.add_argument("--checkpoint", required=False)
    p.add_argument("--sigmas", default=None, help="comma-separated Gaussian sigmas")
    p.add_argument("--lambdas", default=None, help="comma-separated Poisson rates")

    p = sub.add_parser("sweep", help="retrain over an epochs or units grid")
    common(p)
    _add_data_args(p)
    _add_train_args(p)
    p.add_argument("--grid", choices=("epochs", "units"), default=None)
    p.add_argument("--values", default=None, help="comma-separated grid values")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge config-file values under explicit flags."""
    values = {k: v for k, v in vars(args).items() if v is not None}
    if args.config:
        if not Path(args.config).exists():
            raise FileNotFoundError(args.config)
        for k, v in read_config_file(args.config).items():
            values.setdefault(k, v)
    return values


def train_config(values: dict) -> TrainConfig:
    mapping = dict(values)
    if "units" in mapping and "hidden_units" not in mapping:
        mapping["hidden_units"] = mapping["units"]
    return TrainConfig.from_mapping(mapping)


# ---------------------------------------------------------------------------
# data loading


def _require(values: dict, key: str) -> Path:
    if key not in values:
        raise UsageError(f"--{key.replace('_', '-')} is required")
    path = Path(values[key])
    if not path.exists():
        raise FileNotFoundError(str(path))
    return path


def load_inputs(values: dict):
    adjacency = _require(values, "adjacency")
    speeds = _require(values, "speeds")
    poi = _require(values, "poi") if "poi" in values else None
    weather = _require(values, "weather") if "weather" in values else None
    graph = load_adjacency_csv(adjacency)
    series = load_speed_csv(speeds, int(values.get("interval_minutes", 15)),
                            bool(_on_off(values.get("nodes_as_rows", "off"))))
    if series.n != graph.n:
        raise NodeCountMismatchError(f"{speeds} has {series.n} nodes, {adjacency} has {graph.n}")
    attrs = load_attributes(graph.n, series.t_total, poi, weather,
                            values.get("static_encoding", "ordinal"),
                            values.get("dynamic_encoding", "ordinal"))
    return series, graph, attrs


def augment_spec(values: dict, attrs: AttributeBundle) -> AugmentSpec:
    use_static = _on_off(values.get("static"))
    use_dynamic = _on_off(values.get("dynamic"))
    if use_static is None:
        use_static = attrs.p > 0
    if use_dynamic is None:
        use_dynamic = attrs.w > 0
    if use_static and attrs.p == 0:
        raise UsageError("--static on needs --poi")
    if use_dynamic and attrs.w == 0:
        raise UsageError("--dynamic on needs --weather")
    return AugmentSpec(use_static, use_dynamic, int(values.get("window_m", 2)))


def out_dir(values: dict) -> Path:
    path = Path(values.get("out_dir", "."))
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_synth(values: dict) -> int:
    data = generate_synthetic_full(int(values.get("nodes", 20)), int(values.get("steps", 2000)),
                                   int(values.get("seed", 0)), float(values.get("effect_size", 10.0)),
                                   int(values.get("interval_minutes", 15)))
    paths = write_synthetic(out_dir(values), data)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def write_loss_history(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for epoch, value in enumerate(history, start=1):
            w.writerow([epoch, repr(value)])


def cmd_train(values: dict) -> int:
    series, graph, attrs = load_inputs(values)
    spec = augment_spec(values, attrs)
    config = train_config(values)
    out = out_dir(values)
    result = train(config, series, graph, attrs, spec, checkpoint_dir=out)
    write_loss_history(out / "loss_history.csv", result.loss_history)
    final = result.loss_history[-1] if result.loss_history else float("nan")
    print(f"setting={spec.label} epochs={config.epochs} final_loss={final:.6g}")
    print(f"checkpoint: {out / 'checkpoint.json'}")
    return 0


def _horizon_steps(values: dict, interval: int, t_out: int) -> list[int]:
    minutes = _int_list(values.get("horizons", ",".join(str(interval * k) for k in range(1, t_out + 1))))
    steps = []
    for m in minutes:
        if m % interval:
            raise UsageError(f"horizon {m} min is not a multiple of the {interval} min interval")
        steps.append(m // interval)
    return steps


def write_chart(path, dump_path, node: int, start: int, length: int, title: str) -> None:
    rows = [r for r in ev.read_predictions_csv(dump_path) if r[1] == node]
    rows = rows[start:start + length]
    if not rows:
        raise UsageError(f"no predictions for node {node} in the requested range")
    xs = [r[0] for r in rows]
    chart = line_chart({"true": (xs, [r[2] for r in rows]), "pred": (xs, [r[3] for r in rows])},
                       title=title, x_label="time step", y_label="speed")
    Path(path).write_text(chart)


def cmd_eval(values: dict) -> int:
    model = load_checkpoint(_require(values, "checkpoint"))
    series, graph, attrs = load_inputs(values)
    steps = _horizon_steps(values, series.interval_minutes, model.config.t_out)
    reports = ev.evaluate_horizons(model, series, graph, attrs, steps)
    out = out_dir(values)
    ev.write_report_csv(out / "report.csv", reports)
    node = int(values.get("node", 0))
    for h, rep in zip(steps, reports):
        m = rep.horizon_minutes
        dump = out / f"predictions_{m}min.csv"
        ev.write_predictions_csv(dump, ev.prediction_rows(model, series, graph, attrs, h))
        write_chart(out / f"chart_{m}min.svg", dump, node, int(values.get("start", 0)),
                    int(values.get("length", 96)), f"{rep.setting_label} node {node}, {m} min ahead")
        print(f"{m:>4} min  rmse={rep.rmse:.4f} mae={rep.mae:.4f} acc={rep.accuracy:.4f} "
              f"r2={rep.r2:.4f} var={rep.var:.4f}")
    print(f"report: {out / 'report.csv'}")
    return 0


def cmd_ablate(values: dict) -> int:
    series, graph, attrs = load_inputs(values)
    if attrs.p == 0 or attrs.w == 0:
        raise UsageError("ablation needs both --poi and --weather")
    config = train_config(values)
    reports = ev.run_ablation(config, series, graph, attrs, int(values.get("window_m", 2)))
    out = out_dir(values)
    ev.write_report_csv(out / "ablation.csv", reports)
    for r in reports:
        print(f"{r.setting_label:<12} rmse={r.rmse:.4f} mae={r.mae:.4f} acc={r.accuracy:.4f}")
    print(f"report: {out / 'ablation.csv'}")
    return 0


def cmd_perturb(values: dict) -> int:
    model = load_checkpoint(_require(values, "checkpoint"))
    series, graph, attrs = load_inputs(values)
    sigmas = [float(s) for s in values["sigmas"].split(",")] if "sigmas" in values else ev.GAUSSIAN_SIGMAS
    lambdas = [float(s) for s in values["lambdas"].split(",")] if "lambdas" in values else ev.POISSON_LAMBDAS
    rows = ev.perturbation_analysis(model, series, graph, attrs, sigmas, lambdas,
                                    seed=int(values.get("seed", model.config.seed)))
    out = out_dir(values)
    ev.write_perturbation_csv(out / "perturbation.csv", rows)
    for kind in ("gaussian", "poisson"):
        sel = [r for r in rows if r.kind == kind]
        if sel:
            chart = line_chart({m: ([r.param for r in sel], [getattr(r.report, m) for r in sel])
                                for m in ("accuracy", "r2", "var")},
                               title=f"{kind} perturbation", x_label="noise parameter")
            (out / f"perturbation_{kind}.svg").write_text(chart)
    for r in rows:
        print(f"{r.kind:<9} {r.param:>5g}  rmse={r.report.rmse:.4f} acc={r.report.accuracy:.4f}")
    print(f"report: {out / 'perturbation.csv'}")
    return 0


def cmd_sweep(values: dict) -> int:
    grid = values.get("grid", "epochs")
    default = EPOCH_GRID if grid == "epochs" else UNIT_GRID
    points = sorted(_int_list(values["values"])) if "values" in values else list(default)
    series, graph, attrs = load_inputs(values)
    spec = augment_spec(values, attrs)
    base = train_config(values)
    out = out_dir(values)
    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["grid", "value", "rmse", "mae", "accuracy", "r2", "var"])
        for v in points:
            config = replace(base, epochs=v) if grid == "epochs" else replace(base, hidden_units=v)
            result = train(config, series, graph, attrs, spec)
            rep = ev.evaluate_horizons(result.model, series, graph, attrs, (1,),
                                       prepared=result.prepared)[0]
            w.writerow([grid, v, repr(rep.rmse), repr(rep.mae), repr(rep.accuracy),
                        repr(rep.r2), repr(rep.var)])
            print(f"{grid}={v:<6} rmse={rep.rmse:.4f} acc={rep.accuracy:.4f}")
    print(f"report: {path}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "perturb": cmd_perturb,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        values = resolve(args)
        return COMMANDS[args.command](values)
    except FileNotFoundError as e:
        print(f"error: file not found: {e.filename or e.args[0]}", file=sys.stderr)
        return 2
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (AstgcnError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
