"""Markov stochastic block models: sampling, community recovery, estimation,
HMM-based reliable prediction, testing and model selection."""

from .errors import MsbmError
from .estimators import EstimatedParams, estimate, project_stochastic
from .hmm import FbTables, GapSpec, HmmState, baum_welch, chi, forward_backward, zeta
from .model import (
    Labeling,
    ModelParams,
    OrderedGraph,
    misclassification,
    sample_graph,
    snr,
    stationary_distribution,
    threshold_graph,
)
from .sdp import ClusterResult, RelaxedSolution, beta_hat, cluster, round_kmedoids, solve_relaxed_kmeans

__version__ = "0.1.0"

__all__ = [
    "ClusterResult",
    "EstimatedParams",
    "FbTables",
    "GapSpec",
    "HmmState",
    "Labeling",
    "ModelParams",
    "MsbmError",
    "OrderedGraph",
    "RelaxedSolution",
    "baum_welch",
    "beta_hat",
    "chi",
    "cluster",
    "estimate",
    "forward_backward",
    "misclassification",
    "project_stochastic",
    "round_kmedoids",
    "sample_graph",
    "snr",
    "solve_relaxed_kmeans",
    "stationary_distribution",
    "threshold_graph",
    "zeta",
]
