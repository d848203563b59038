"""Community inference for a late node from its edges to part of the past.

The graph is fully observed up to node ``m``; for a node ``n > m`` only the
edges ``X_{i,n}`` for ``i`` in ``E`` are seen.  Three MAP rules are offered:
the oracle one (true parameters and communities), the plug-in one
(estimates and clusterer labels) and the reliable one, which sums over the
hidden communities of the nodes in ``E`` with the HMM fitted on the labels.

Scores are unnormalised log posteriors; argmax ties go to the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateLikelihoodError, InputError, MissingParameterError
from .estimators import EstimatedParams, project_stochastic
from .hmm import HmmState, _forward_backward, _transfer, timeline
from .model import Labeling, ModelParams


@dataclass(frozen=True)
class FilterQuery:
    """``m`` nodes fully observed; node number ``n`` (1-based, ``n > m``) is queried.

    ``E`` holds 0-based node indices in ``[0, m)``; ``x_obs[s]`` is the edge
    indicator between node ``E[s]`` and the query node.
    """

    m: int
    n: int
    E: tuple
    x_obs: tuple

    def __post_init__(self):
        E = tuple(int(i) for i in self.E)
        x = tuple(int(v) for v in self.x_obs)
        if self.m < 1 or self.n <= self.m:
            raise InputError(f"need 1 <= m < n, got m={self.m}, n={self.n}")
        if not E:
            raise InputError("E must be non-empty")
        if list(E) != sorted(set(E)) or E[0] < 0 or E[-1] >= self.m:
            raise InputError("E must be sorted, distinct and inside [0, m)")
        if len(x) != len(E) or any(v not in (0, 1) for v in x):
            raise InputError("x_obs must be binary with one entry per element of E")
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "x_obs", x)

    @classmethod
    def last_nodes(cls, m: int, n: int, size: int, x_obs) -> "FilterQuery":
        """Observation set made of the ``size`` most recent prefix nodes."""
        return cls(m, n, tuple(range(m - size, m)), tuple(x_obs))


def _log_lik(Q: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``log l(c, k)`` per observation: shape ``(|E|, K, K)``."""
    x = np.asarray(x, dtype=bool)[:, None, None]
    # select rather than mix, so Q in {0, 1} never produces 0 * log(0)
    with np.errstate(divide="ignore"):
        return np.where(x, np.log(Q)[None], np.log1p(-Q)[None])


def _check_prefix(labels: Labeling, query: FilterQuery) -> None:
    if labels.n != query.m:
        raise InputError(f"labeling covers {labels.n} nodes, query expects m={query.m}")


def _argmax(scores: np.ndarray) -> int:
    return int(np.argmax(scores))


def normalize(log_scores: np.ndarray) -> np.ndarray:
    """Posterior from unnormalised log scores."""
    if not np.isfinite(log_scores).any():
        raise DegenerateLikelihoodError("every community has zero posterior weight")
    return np.exp(log_scores - logsumexp(log_scores))


def _log_power_row(P: np.ndarray, steps: int, row: int) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.linalg.matrix_power(P, steps)[row])


def optimal_scores(params: ModelParams, truth: Labeling, query: FilterQuery) -> np.ndarray:
    _check_prefix(truth, query)
    c = truth.labels
    L = _log_lik(params.Q, query.x_obs)
    idx = np.asarray(query.E)
    lik = L[np.arange(idx.size), c[idx]].sum(axis=0)
    return lik + _log_power_row(params.P, query.n - query.m, c[-1])


def plugin_scores(est: EstimatedParams, labels_hat: Labeling, query: FilterQuery) -> np.ndarray:
    _check_prefix(labels_hat, query)
    c = labels_hat.labels
    idx = np.asarray(query.E)
    rows = est.Q_hat[c[idx]]
    if np.isnan(rows).any():
        raise MissingParameterError("Q_hat rows of the observed nodes are undefined")
    L = _log_lik(est.Q_hat, query.x_obs)
    lik = L[np.arange(idx.size), c[idx]].sum(axis=0)
    return lik + _log_power_row(project_stochastic(est.P_hat), query.n - query.m, c[-1])


def reliable_scores(
    theta: HmmState,
    est: EstimatedParams,
    labels_hat: Labeling,
    query: FilterQuery,
    prior: str = "marginal",
) -> np.ndarray:
    """Log of ``P(x_E, c_hat | C_n = k) P(C_n = k)`` up to a constant.

    ``prior="marginal"``: the anchors' path weight ends with the backward
    vector at the last anchor and the query node gets the prior
    ``mu P^n``.  ``prior="chained"``: the path is carried to node ``m`` and
    the query node follows by ``P^(n-m)`` from the hidden community of ``m``.
    ``P`` is the projected transition estimate in both modes; the path
    between anchors uses the HMM kernel.
    """
    _check_prefix(labels_hat, query)
    if prior not in ("marginal", "chained"):
        raise InputError(f"unknown prior mode {prior!r}")
    if theta.K != est.K or labels_hat.K != est.K:
        raise InputError("theta, estimates and labeling disagree on K")
    if np.isnan(est.Q_hat).any():
        raise MissingParameterError("Q_hat has undefined entries")
    obs = timeline(labels_hat)
    fb = _forward_backward(theta, obs)
    M = _transfer(theta, obs)
    L = _log_lik(est.Q_hat, query.x_obs)
    E = query.E
    P = project_stochastic(est.P_hat)

    # V[c, k]: scaled weight of the hidden community c at the current anchor
    with np.errstate(divide="ignore"):
        logV = np.log(fb.alpha[E[0]])[:, None] + L[0]
    for s in range(1, len(E)):
        chi = np.eye(theta.K)
        for pos in range(E[s - 1] + 1, E[s] + 1):
            chi = chi @ M[pos]
            chi /= chi.max()
        logV = _log_matvec(chi.T, logV) + L[s]
    if prior == "marginal":
        with np.errstate(divide="ignore"):
            log_end = logsumexp(logV + np.log(fb.beta[E[-1]])[:, None], axis=0)
            log_prior = np.log(theta.mu @ np.linalg.matrix_power(P, query.n))
        return log_end + log_prior
    chi = np.eye(theta.K)
    for pos in range(E[-1] + 1, query.m):
        chi = chi @ M[pos]
        chi /= chi.max()
    logV = _log_matvec(chi.T, logV)
    with np.errstate(divide="ignore"):
        logT = np.log(np.linalg.matrix_power(P, query.n - query.m))
    return logsumexp(logV + logT, axis=0)


def _log_matvec(A: np.ndarray, logV: np.ndarray) -> np.ndarray:
    """``log(A @ exp(logV))`` column by column without underflow."""
    with np.errstate(divide="ignore"):
        return logsumexp(np.log(A)[:, :, None] + logV[None, :, :], axis=1)


def map_optimal(params: ModelParams, truth: Labeling, query: FilterQuery) -> int:
    return _argmax(optimal_scores(params, truth, query))


def map_plugin(est: EstimatedParams, labels_hat: Labeling, query: FilterQuery) -> int:
    return _argmax(plugin_scores(est, labels_hat, query))


def map_reliable(
    theta: HmmState,
    est: EstimatedParams,
    labels_hat: Labeling,
    query: FilterQuery,
    prior: str = "marginal",
) -> int:
    return _argmax(reliable_scores(theta, est, labels_hat, query, prior))
