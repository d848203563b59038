"""Link prediction for the next arriving node.

Scores are posterior edge probabilities between each existing node ``i`` and
node ``n+1``; the classifier predicts an edge when the score is at least 1/2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InputError, MissingParameterError
from .estimators import EstimatedParams
from .hmm import HmmState, forward_backward, timeline, zeta_to_end
from .model import Labeling, ModelParams

log = logging.getLogger(__name__)


@dataclass
class LinkScores:
    eta: np.ndarray
    decisions: np.ndarray

    @classmethod
    def from_scores(cls, eta) -> "LinkScores":
        eta = np.asarray(eta, dtype=float)
        return cls(eta, (eta >= 0.5).astype(np.int8))


def eta_true(params: ModelParams, labels: Labeling) -> np.ndarray:
    """``eta_i = sum_k Q[c_i, k] P[c_n, k]``."""
    if labels.K != params.K:
        raise InputError("labeling and parameters disagree on K")
    c = labels.labels
    return params.Q[c] @ params.P[c[-1]]


def _score_matrix(est: EstimatedParams) -> np.ndarray:
    """``H[a, b] = sum_k Q_hat[a, k] P_hat[b, k]``: score of a node in ``a`` when the last node is in ``b``."""
    return est.Q_hat @ est.P_hat.T


def _clamped(eta: np.ndarray, what: str) -> np.ndarray:
    if np.any((eta < 0) | (eta > 1)):
        log.warning("%s scores outside [0, 1] (range %.4f..%.4f); clamping", what, eta.min(), eta.max())
    return np.clip(eta, 0.0, 1.0)


def msbm_classify(est: EstimatedParams, labels_hat: Labeling) -> LinkScores:
    """Plug-in classifier built from raw estimates and the clusterer's labels."""
    if labels_hat.K != est.K:
        raise InputError("labeling and estimates disagree on K")
    c = labels_hat.labels
    Q_rows = est.Q_hat[c]
    P_row = est.P_hat[c[-1]]
    if np.isnan(P_row).any() or np.isnan(Q_rows).any():
        raise MissingParameterError("estimator entries needed for the plug-in scores are undefined")
    return LinkScores.from_scores(_clamped(Q_rows @ P_row, "plug-in"))


def reliable_scores(theta: HmmState, est: EstimatedParams, labels_hat: Labeling, gap=None) -> np.ndarray:
    """Unclamped reliable scores ``sum_ab zeta^{(i,n)}_ab H_ab``."""
    if labels_hat.K != est.K or theta.K != est.K:
        raise InputError("theta, estimates and labeling disagree on K")
    fb = forward_backward(theta, labels_hat, gap)
    obs = timeline(labels_hat, gap)
    Z = zeta_to_end(theta, obs, fb)
    H = _score_matrix(est)
    weight = Z.sum(axis=0) > 0
    if np.isnan(H[weight]).any():
        raise MissingParameterError("estimator entries with posterior mass are undefined")
    H = np.where(np.isnan(H), 0.0, H)
    return np.einsum("iab,ab->i", Z, H)


def reliable_classify(theta: HmmState, est: EstimatedParams, labels_hat: Labeling, gap=None) -> LinkScores:
    """Classifier that averages the plug-in score over the HMM joint posterior of ``(C_i, C_n)``."""
    return LinkScores.from_scores(_clamped(reliable_scores(theta, est, labels_hat, gap), "reliable"))


def risk(decisions, eta) -> float:
    """``(1/n) sum (1 - eta_i) 1{g_i = 1} + eta_i 1{g_i = 0}``."""
    g = np.asarray(decisions)
    eta = np.asarray(eta, dtype=float)
    if g.shape != eta.shape:
        raise InputError("decisions and eta must have equal length")
    if g.size == 0:
        raise InputError("empty decision vector")
    return float(np.mean(np.where(g == 1, 1 - eta, eta)))


def group_average(scores, labels: Labeling) -> np.ndarray:
    """Mean score per community (``NaN`` for empty communities)."""
    s = np.asarray(scores, dtype=float)
    counts = labels.counts()
    sums = np.bincount(labels.labels, weights=s, minlength=labels.K)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
