"""Testing for Markov dynamics and choosing the number of communities.

``markov_test`` compares the estimated transition matrix with the
memoryless alternative ``P0 = 1 pi0^T`` through a chi-square type statistic
whose rejection threshold is calibrated by simulating the whole pipeline
(sample, cluster, estimate) under the null.  ``select_k`` picks the number
of communities from the jump in the largest off-diagonal emission mass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import chi2

from . import sdp
from .errors import ConvergenceError, InputError, MsbmError
from .estimators import estimate_P, estimate_Q
from .hmm import baum_welch
from .model import Labeling, ModelParams, OrderedGraph, sample_graph, seed_sequence

log = logging.getLogger(__name__)

DEFAULT_LEVEL = 0.05
DEFAULT_MC = 500
MIN_MC = 100
SUCCESS_QUOTA = 0.8


@dataclass
class TestReport:
    statistic: float
    threshold: float
    mc_replicates: int
    reject: bool
    level: float
    asymptotic_threshold: float = float("nan")
    null_statistics: np.ndarray = field(default=None, repr=False)
    failures: int = 0

    @property
    def decision(self) -> str:
        return "reject" if self.reject else "accept"

    @property
    def p_value(self) -> float:
        """Monte Carlo p-value ``(1 + #{null >= S}) / (1 + mc)``."""
        null = self.null_statistics
        return float((1 + np.sum(null >= self.statistic)) / (1 + null.size))


@dataclass
class SelectionTrace:
    K_values: np.ndarray
    M: np.ndarray
    K_hat: int
    emissions: dict = field(default_factory=dict, repr=False)

    @property
    def jumps(self) -> np.ndarray:
        return np.diff(self.M)


def chi2_statistic(P_hat, counts, pi0) -> float:
    """``S = sum_k G_k sum_l (P_hat[k, l] - pi0[l])^2 / pi0[l]``.

    Rows of unvisited communities (``G_k = 0``) contribute nothing even when
    ``P_hat`` is undefined there.
    """
    P_hat = np.asarray(P_hat, dtype=float)
    counts = np.asarray(counts, dtype=float)
    pi0 = np.asarray(pi0, dtype=float)
    K = pi0.size
    if P_hat.shape != (K, K) or counts.shape != (K,):
        raise InputError("shape mismatch between P_hat, counts and pi0")
    if np.any(pi0 <= 0):
        raise InputError("pi0 must be strictly positive")
    if np.any(counts < 0):
        raise InputError("counts must be non-negative")
    visited = counts > 0
    if np.isnan(P_hat[visited]).any():
        raise InputError("P_hat undefined on a visited community")
    terms = (P_hat[visited] - pi0) ** 2 / pi0
    return float(counts[visited] @ terms.sum(axis=1))


def align_to_distribution(labels: Labeling, pi0) -> Labeling:
    """Relabel clusters so that their frequencies best match ``pi0`` (L1 cost)."""
    freq = labels.counts() / labels.n
    cost = np.abs(freq[:, None] - np.asarray(pi0)[None, :])
    rows, cols = linear_sum_assignment(cost)
    sigma = np.empty(labels.K, dtype=np.int64)
    sigma[rows] = cols
    return Labeling(sigma[labels.labels], labels.K)


def _statistic(graph: OrderedGraph, K: int, pi0: np.ndarray, seed) -> tuple[float, Labeling]:
    labels = align_to_distribution(sdp.cluster(graph, K, seed=seed).labels, pi0)
    return chi2_statistic(estimate_P(labels), labels.counts(), pi0), labels


def null_params(graph: OrderedGraph, labels: Labeling, pi0) -> ModelParams:
    """Memoryless model with the fitted connectivity; undefined entries take the graph density."""
    Q = estimate_Q(graph, labels)
    Q = np.where(np.isnan(Q), graph.density(), Q)
    K = labels.K
    pi0 = np.asarray(pi0, dtype=float)
    return ModelParams(K, np.tile(pi0, (K, 1)), pi0, 1.0, Q)


def markov_test(
    graph: OrderedGraph,
    K: int,
    pi0,
    level: float = DEFAULT_LEVEL,
    mc: int = DEFAULT_MC,
    seed=None,
) -> TestReport:
    """Reject memoryless community arrivals when ``S`` exceeds the simulated ``1 - level`` quantile."""
    pi0 = np.asarray(pi0, dtype=float)
    if pi0.size != K or abs(pi0.sum() - 1) > 1e-9:
        raise InputError("pi0 must be a length-K probability vector")
    if np.any(pi0 <= 0):
        raise InputError("pi0 must be strictly positive")
    if not 0 < level < 1:
        raise InputError("level must lie in (0, 1)")
    if mc < MIN_MC:
        raise InputError(f"need at least {MIN_MC} Monte Carlo replicates, got {mc}")
    root = seed_sequence(seed)
    own, *subs = root.spawn(mc + 1)
    S, labels = _statistic(graph, K, pi0, own)
    null = null_params(graph, labels, pi0)
    stats = []
    failures = 0
    for ss in subs:
        draw, clus = ss.spawn(2)
        try:
            g, _ = sample_graph(null, graph.n, draw)
            stats.append(_statistic(g, K, pi0, clus)[0])
        except MsbmError as exc:
            failures += 1
            log.warning("null replicate failed: %s", exc)
    if len(stats) < SUCCESS_QUOTA * mc:
        raise ConvergenceError(f"only {len(stats)} of {mc} null replicates succeeded")
    stats = np.asarray(stats)
    threshold = float(np.quantile(stats, 1 - level, method="higher"))
    return TestReport(
        statistic=S,
        threshold=threshold,
        mc_replicates=mc,
        reject=bool(S > threshold),
        level=level,
        asymptotic_threshold=float(chi2.ppf(1 - level, K * (K - 1))),
        null_statistics=stats,
        failures=failures,
    )


def off_diagonal_mass(O) -> float:
    """``max_{k != l} O[l, k] + O[k, l]``."""
    O = np.asarray(O, dtype=float)
    if O.shape[0] < 2:
        return 0.0
    S = O + O.T
    np.fill_diagonal(S, -np.inf)
    return float(S.max())


def select_from_M(K_values, M) -> int:
    """``K`` with the largest forward jump ``M[K+1] - M[K]``; ties go to the smallest ``K``."""
    K_values = np.asarray(K_values)
    jumps = np.diff(np.asarray(M, dtype=float))
    return int(K_values[int(np.argmax(jumps))])


def select_k(graph: OrderedGraph, K_min: int, K_max: int, seed=None) -> SelectionTrace:
    """Cluster and fit the HMM for each candidate ``K``, then pick the largest jump."""
    if not 2 <= K_min < K_max <= graph.n:
        raise InputError(f"need 2 <= K_min < K_max <= n, got {K_min}, {K_max}, n={graph.n}")
    Ks = np.arange(K_min, K_max + 1)
    seeds = seed_sequence(seed).spawn(Ks.size)
    M = np.empty(Ks.size)
    emissions = {}
    for idx, (K, ss) in enumerate(zip(Ks, seeds)):
        labels = sdp.cluster(graph, int(K), seed=ss).labels
        theta = baum_welch(labels)
        emissions[int(K)] = theta.O
        M[idx] = off_diagonal_mass(theta.O)
    return SelectionTrace(Ks, M, select_from_M(Ks, M), emissions)
