"""Attribute-augmented graph-convolutional GRU for traffic speed forecasting."""
from .augment import TGCN_SPEC, AugmentSpec, augment_sequence, augment_series, augment_step
from .dataset import (
    AttributeBundle,
    SpeedSeries,
    chronological_split,
    generate_synthetic,
    load_attributes,
    load_dynamic_attrs,
    load_speed_csv,
    load_static_attrs,
    make_windows,
)
from .evaluation import (
    MetricReport,
    compute_metrics,
    evaluate_horizons,
    perturb_inputs,
    perturbation_analysis,
    run_ablation,
)
from .graph import RoadGraph, build_graph, propagate
from .model import ModelDims, ModelParameters, backward, cell_step, forward, gc, init_params
from .train import TrainConfig, TrainedModel, adam_step, load_checkpoint, loss, save_checkpoint, train

__version__ = "0.1.0"
