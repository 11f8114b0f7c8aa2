"""Discriminative mutually-correcting point processes for patient-flow prediction."""

from .baselines import MarkovBaseline, TransitionTable, mc_fit, mc_predict
from .core import (
    Catalog,
    Event,
    EventSequence,
    FeatureSpace,
    KernelConfig,
    SampleSet,
    build_feature,
    build_samples,
    kernel_weight,
    time_scale,
)
from .datagen import GeneratorConfig, generate
from .errors import SolverError, ValidationError
from .evaluate import (
    OccupancyMatrix,
    accuracy_report,
    predict_events,
    predict_next,
    relative_sim_error,
    simulate_cohort,
)
from .imbalance import class_counts, sample_weights, synthesize_balanced
from .io import load_model, read_dataset, save_model, write_dataset
from .kernels import BACKEND
from .learner import SolverConfig, admm_fit, gradient, group_lasso_prox, hierarchical_fit, loss
from .model import FlowModel, HierarchicalModel

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Catalog",
    "Event",
    "EventSequence",
    "FeatureSpace",
    "FlowModel",
    "GeneratorConfig",
    "HierarchicalModel",
    "KernelConfig",
    "MarkovBaseline",
    "OccupancyMatrix",
    "SampleSet",
    "SolverConfig",
    "SolverError",
    "TransitionTable",
    "ValidationError",
    "accuracy_report",
    "admm_fit",
    "build_feature",
    "build_samples",
    "class_counts",
    "generate",
    "gradient",
    "group_lasso_prox",
    "hierarchical_fit",
    "kernel_weight",
    "load_model",
    "loss",
    "mc_fit",
    "mc_predict",
    "predict_events",
    "predict_next",
    "read_dataset",
    "relative_sim_error",
    "sample_weights",
    "save_model",
    "simulate_cohort",
    "synthesize_balanced",
    "time_scale",
    "write_dataset",
]
