"""Bayes-mixture and two-part MDL sequence prediction over countable model classes."""

from .measures import (
    DeterministicModel,
    FactorizableModel,
    IidModel,
    Model,
    TabularModel,
    build_model,
    conditional,
    deficiency,
    is_uniformly_stochastic,
    kl_divergence,
    probability,
    uniform,
)
from .predictors import (
    Prediction,
    TieBreak,
    WeightedClass,
    codelength_weight,
    map_estimator,
    mixture,
    normalizer_trace,
    predict,
    two_part_value,
    weight_codelength,
)
from .evaluation import (
    ErrorSeries,
    StabilizationReport,
    bound_for,
    counts_expectation,
    error_series,
    exact_expectation,
    mc_expectation,
    normalizer_convergence,
    stabilization_report,
)
from .config import parse_class_config, render_class_config

__version__ = "0.1.0"
