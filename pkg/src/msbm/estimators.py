"""Closed-form estimators of the connectivity matrix, the stationary law and
the transition matrix from a graph and a labeling.

Undefined entries (empty or singleton groups) are returned as ``NaN``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .model import Labeling, OrderedGraph, transition_counts


@dataclass
class EstimatedParams:
    Q_hat: np.ndarray
    pi_hat: np.ndarray
    P_hat: np.ndarray

    @property
    def K(self) -> int:
        return self.pi_hat.size


def estimate_Q(graph: OrderedGraph, labels: Labeling) -> np.ndarray:
    if graph.n != labels.n:
        raise InputError("graph and labeling sizes differ")
    K = labels.K
    onehot = np.zeros((labels.n, K))
    onehot[np.arange(labels.n), labels.labels] = 1.0
    X = graph.adjacency.astype(float)
    # edges[k, l] counts ordered pairs (i in k, j in l); the diagonal counts each edge twice
    edges = onehot.T @ X @ onehot
    sizes = labels.counts().astype(float)
    pairs = np.outer(sizes, sizes)
    np.fill_diagonal(pairs, sizes * (sizes - 1))
    with np.errstate(invalid="ignore", divide="ignore"):
        Q = np.where(pairs > 0, edges / np.where(pairs > 0, pairs, 1), np.nan)
    return Q


def estimate_pi(labels: Labeling) -> np.ndarray:
    if labels.n < 1:
        raise InputError("need at least one node")
    return labels.counts() / labels.n


def estimate_P(labels: Labeling) -> np.ndarray:
    """Raw transition estimate; rows may exceed mass one at finite ``n``."""
    n = labels.n
    if n < 2:
        raise InputError("need at least two nodes")
    visits = labels.counts().astype(float)
    trans = transition_counts(labels).astype(float)
    P = np.full((labels.K, labels.K), np.nan)
    seen = visits > 0
    P[seen] = (n / (n - 1)) * trans[seen] / visits[seen, None]
    return P


def project_stochastic(P_hat) -> np.ndarray:
    """Clamp to [0, 1] and renormalise rows; undefined or null rows become uniform."""
    P = np.array(P_hat, dtype=float)
    K = P.shape[0]
    out = np.full_like(P, 1.0 / K)
    for k in range(K):
        row = P[k]
        if np.any(np.isnan(row)):
            continue
        row = np.clip(row, 0.0, 1.0)
        s = row.sum()
        if s > 0:
            out[k] = row / s
    return out


def estimate(graph: OrderedGraph, labels: Labeling) -> EstimatedParams:
    return EstimatedParams(
        Q_hat=estimate_Q(graph, labels),
        pi_hat=estimate_pi(labels),
        P_hat=estimate_P(labels),
    )
