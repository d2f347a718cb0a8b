"""Hybrid regression ensembles weighted by a negative-correlation-penalized objective."""

from .core import (
    ContractError,
    DecompositionReport,
    ErrorTriple,
    PredictionMatrix,
    ambiguity_decomposition,
    bvc_decomposition,
    check_simplex,
    combine,
    combined_error,
    diversity_score,
    error_triple,
    read_prediction_csv,
    write_prediction_csv,
)
from .ncl import NclConfig, NclFit, fit_weights, ncl_gradient, ncl_objective, predict, search_lambda
from .solver import NumericalFailure, SolverOptions, SolverProblem, SolverResult, check_gradient, solve

__version__ = "0.1.0"
