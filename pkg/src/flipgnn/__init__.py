"""Flip augmentation for semi-supervised node classification on sparse
features: train in the original space and in a point-reflected space that
shares the same first hyperplane, so every feature dimension receives
gradient."""

from .analysis import AnalysisReport, analyze, homophily, partition_feature_types, z_value
from .data import (Dataset, FeatureMatrix, SynthSpec, benchmark_spec,
                   generate_synthetic, load_dataset, save_dataset)
from .errors import (DatasetFormatError, DivergenceError, FeatureRangeError,
                     FlipgnnError)
from .estimator import FlipNodeClassifier
from .flip import (FlipContext, FlippedPlaneView, assemble_flipped_grads,
                   first_layer_flipped, flip_hyperplane, make_flip_context)
from .graph import Graph, NodeSplit, NormalizedGraph, build_graph, khop_nodes, renormalize, spmm
from .models import ModelSpec
from .train import (TrainConfig, TrainState, grad_stats, grid_search,
                    label_budget_sweep, shift_study, train, train_flip,
                    train_plain, variance_report)

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport", "Dataset", "DatasetFormatError", "DivergenceError",
    "FeatureMatrix", "FeatureRangeError", "FlipContext", "FlipNodeClassifier",
    "FlipgnnError", "FlippedPlaneView", "Graph", "ModelSpec", "NodeSplit",
    "NormalizedGraph", "SynthSpec", "TrainConfig", "TrainState",
    "analyze", "assemble_flipped_grads", "benchmark_spec", "build_graph",
    "first_layer_flipped", "flip_hyperplane", "generate_synthetic",
    "grad_stats", "grid_search", "homophily", "khop_nodes",
    "label_budget_sweep", "load_dataset", "make_flip_context",
    "partition_feature_types", "renormalize", "save_dataset", "shift_study",
    "spmm", "train", "train_flip", "train_plain", "variance_report",
    "z_value",
]
