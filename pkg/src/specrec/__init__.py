"""Spectral graph filtering for one-bit interaction data.

The package turns an implicit-feedback log into an item graph, computes a
truncated spectral basis of its normalized Laplacian, and scores unseen
items for a user by low-pass filtering the user's observation vector.  New
feedback is folded in either by exact linear updates or by a diagonal
prediction-correction state estimator in the frequency domain.  Evaluation
utilities, analytic error bounds, and a command line front end round out
the toolkit.
"""

from .data import (
    Interaction,
    DatasetSplit,
    RatingMatrix,
    load_interactions,
    filter_activity,
    split_users,
    build_matrix,
    holdout_last,
    group_events,
    items_to_vector,
)
from .graphs import Laplacian, hypergraph_laplacian, covariance_laplacian
from .spectral import SpectralBasis, exact_eigs, nystrom_eigs, gft, igft, save_basis, load_basis
from .kernels import KernelSpec, r_value, h_value, h_diagonal
from .filters import FilterModel, Prediction, fit, reconstruct, incremental_update, recommend_topn
from .online import NoiseConfig, OpCounter, UserState, init_state, update, estimate_p0
from .evaluation import MetricsReport, hit_rate, ndcg, evaluate_filter, evaluate_online, spectrum_profile
from .synthetic import window_log

__version__ = "0.1.0"

__all__ = [
    "Interaction",
    "DatasetSplit",
    "RatingMatrix",
    "load_interactions",
    "filter_activity",
    "split_users",
    "build_matrix",
    "holdout_last",
    "group_events",
    "items_to_vector",
    "Laplacian",
    "hypergraph_laplacian",
    "covariance_laplacian",
    "SpectralBasis",
    "exact_eigs",
    "nystrom_eigs",
    "gft",
    "igft",
    "save_basis",
    "load_basis",
    "KernelSpec",
    "r_value",
    "h_value",
    "h_diagonal",
    "FilterModel",
    "Prediction",
    "fit",
    "reconstruct",
    "incremental_update",
    "recommend_topn",
    "NoiseConfig",
    "OpCounter",
    "UserState",
    "init_state",
    "update",
    "estimate_p0",
    "MetricsReport",
    "hit_rate",
    "ndcg",
    "evaluate_filter",
    "evaluate_online",
    "spectrum_profile",
    "window_log",
    "__version__",
]
