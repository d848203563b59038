"""Core domain types and the Markov stochastic block model sampler.

Communities are stored 0-based internally (``0..K-1``); the file formats and
the CLI use 1-based labels and node ids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse.csgraph import connected_components

from .errors import (
    AssumptionError,
    ConfigError,
    InputError,
    IrreducibilityError,
    OrderingError,
    ParameterError,
)

STOCHASTIC_ATOL = 1e-12
EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class ModelParams:
    """Hidden-chain and connectivity parameters.

    ``Q0[a, b]`` is the connection probability (before scaling by ``alpha``)
    between a node of community ``a`` and a node of community ``b``.  When
    ``ordered`` is true, ``Q0`` may be asymmetric and ``a`` is always the
    community of the *earlier* node in arrival order.
    """

    K: int
    P: np.ndarray
    pi: np.ndarray
    alpha: float
    Q0: np.ndarray
    ordered: bool = False

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        pi = np.asarray(self.pi, dtype=float)
        Q0 = np.asarray(self.Q0, dtype=float)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "Q0", Q0)
        K = self.K
        if K < 1:
            raise ParameterError(f"K must be >= 1, got {K}")
        if P.shape != (K, K) or Q0.shape != (K, K) or pi.shape != (K,):
            raise ParameterError("P and Q0 must be KxK and pi of length K")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > STOCHASTIC_ATOL):
            raise ParameterError("P must be row-stochastic")
        if np.any(pi < 0) or abs(pi.sum() - 1) > STOCHASTIC_ATOL:
            raise ParameterError("pi must be a probability vector")
        if not 0 < self.alpha <= 1:
            raise ParameterError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.ordered and not np.allclose(Q0, Q0.T, atol=0):
            raise ParameterError("Q0 must be symmetric (pass ordered=True for an arrival-ordered Q0)")
        Q = self.alpha * Q0
        if np.any(Q < 0) or np.any(Q > 1):
            raise ParameterError("entries of alpha*Q0 must lie in [0, 1]")

    @property
    def Q(self) -> np.ndarray:
        return self.alpha * self.Q0

    def with_alpha(self, alpha: float) -> "ModelParams":
        return ModelParams(self.K, self.P, self.pi, alpha, self.Q0, self.ordered)

    @classmethod
    def from_chain(cls, P, Q0, alpha: float = 1.0, ordered: bool = False) -> "ModelParams":
        """Build parameters whose initial law is the stationary law of ``P``."""
        P = np.asarray(P, dtype=float)
        return cls(len(P), P, stationary_distribution(P), alpha, Q0, ordered)


@dataclass
class OrderedGraph:
    """Undirected simple graph whose node order is the arrival order."""

    adjacency: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.adjacency)
        if X.ndim != 2 or X.shape[0] != X.shape[1]:
            raise InputError("adjacency must be a square matrix")
        X = (X != 0).astype(np.uint8)
        if not np.array_equal(X, X.T):
            raise InputError("adjacency must be symmetric")
        if np.any(np.diag(X)):
            raise InputError("self-loops are not allowed")
        self.adjacency = X

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    def density(self) -> float:
        n = self.n
        return 2.0 * self.n_edges / (n * (n - 1)) if n > 1 else 0.0

    def edges(self) -> list[tuple[int, int]]:
        """Edges as 0-based pairs ``(i, j)`` with ``i < j`` in row-major order."""
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(i.tolist(), j.tolist()))

    def subgraph(self, nodes: Sequence[int]) -> "OrderedGraph":
        idx = np.asarray(nodes, dtype=int)
        return OrderedGraph(self.adjacency[np.ix_(idx, idx)])

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "OrderedGraph":
        X = np.zeros((n, n), dtype=np.uint8)
        for i, j in edges:
            if i == j:
                raise InputError(f"self-loop on node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise InputError(f"edge ({i}, {j}) out of range for n={n}")
            X[i, j] = X[j, i] = 1
        return cls(X)


@dataclass
class Labeling:
    """A community assignment; ``labels[i]`` lies in ``0..K-1``."""

    labels: np.ndarray
    K: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.K < 1:
            raise InputError("K must be >= 1")
        if labels.size and (labels.min() < 0 or labels.max() >= self.K):
            raise InputError(f"labels must lie in 0..{self.K - 1}")
        self.labels = labels

    def __len__(self) -> int:
        return self.labels.size

    @property
    def n(self) -> int:
        return self.labels.size

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K)

    def permuted(self, sigma: Sequence[int]) -> "Labeling":
        """Relabel community ``k`` as ``sigma[k]``."""
        return Labeling(np.asarray(sigma)[self.labels], self.K)


@dataclass(frozen=True)
class SnrSummary:
    L: float
    pi_m: float
    D2: float
    S2: float


def stationary_distribution(P) -> np.ndarray:
    """Stationary law of an irreducible row-stochastic matrix."""
    P = np.asarray(P, dtype=float)
    K = P.shape[0]
    if P.shape != (K, K) or np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > 1e-9):
        raise ParameterError("P must be a square row-stochastic matrix")
    n_comp, _ = connected_components(P > 0, directed=True, connection="strong")
    if n_comp != 1:
        raise IrreducibilityError(f"transition matrix is reducible ({n_comp} classes)")
    A = np.vstack([P.T - np.eye(K), np.ones((1, K))])
    b = np.zeros(K + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    # one power step removes the residual least-squares error
    pi = np.clip(pi @ P, 0, None)
    return pi / pi.sum()


def seed_sequence(seed) -> np.random.SeedSequence:
    """Coerce ``None``, an int or a ``SeedSequence`` into a fresh ``SeedSequence``.

    A given sequence is copied, so spawning from the result never changes
    what the caller's object would spawn.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key, pool_size=seed.pool_size)
    return np.random.SeedSequence(seed)


def sample_chain(P, pi, n: int, rng: np.random.Generator) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    cum0 = np.cumsum(pi)
    cum0[-1] = 1.0
    u = rng.random(n)
    c = np.empty(n, dtype=np.int64)
    c[0] = np.searchsorted(cum0, u[0], side="right")
    for i in range(1, n):
        c[i] = np.searchsorted(cum[c[i - 1]], u[i], side="right")
    return c


def sample_graph(params: ModelParams, n: int, seed=None) -> tuple[OrderedGraph, Labeling]:
    """Draw ``(graph, labels)`` from the Markov SBM.

    One generator is seeded per call. The chain is drawn first (``n``
    uniforms), then one uniform per unordered pair ``i < j`` in row-major
    order.
    """
    if n < 1:
        raise InputError("n must be >= 1")
    rng = np.random.default_rng(seed)
    c = sample_chain(params.P, params.pi, n, rng)
    iu, ju = np.triu_indices(n, 1)
    probs = params.Q[c[iu], c[ju]]
    draws = rng.random(iu.size) < probs
    X = np.zeros((n, n), dtype=np.uint8)
    X[iu[draws], ju[draws]] = 1
    X = X | X.T
    return OrderedGraph(X), Labeling(c, params.K)


def misclassification(est: Labeling, truth: Labeling) -> float:
    """Permutation-minimised proportion of non-matching nodes.

    Solved as an assignment problem on the confusion matrix, which is
    equivalent to minimising the symmetric-difference objective.
    """
    if est.n != truth.n:
        raise InputError(f"length mismatch: {est.n} vs {truth.n}")
    if est.K != truth.K:
        raise InputError(f"K mismatch: {est.K} vs {truth.K}")
    if np.any(truth.counts() == 0):
        raise InputError("ground-truth labeling has an empty community")
    confusion = np.zeros((est.K, est.K), dtype=np.int64)
    np.add.at(confusion, (est.labels, truth.labels), 1)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    return 1.0 - confusion[rows, cols].sum() / est.n


def best_permutation(est: Labeling, truth: Labeling) -> np.ndarray:
    """``sigma`` such that ``sigma[est_label]`` best matches the truth."""
    confusion = np.zeros((est.K, est.K), dtype=np.int64)
    np.add.at(confusion, (est.labels, truth.labels), 1)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    sigma = np.empty(est.K, dtype=np.int64)
    sigma[rows] = cols
    return sigma


def snr(params: ModelParams, n: int) -> SnrSummary:
    Q0 = params.Q0
    K = params.K
    if K < 2:
        raise AssumptionError("the column-separation D^2 needs at least two communities")
    diffs = Q0[:, :, None] - Q0[:, None, :]
    dist2 = (diffs**2).sum(axis=0)
    D2 = float(dist2[~np.eye(K, dtype=bool)].min())
    if D2 <= 0:
        raise AssumptionError("two columns of Q0 coincide (D^2 = 0)")
    pi_m = float(params.pi.min())
    if pi_m <= 0:
        raise AssumptionError("stationary law has a zero entry")
    L = float(Q0.max())
    return SnrSummary(L=L, pi_m=pi_m, D2=D2, S2=n * params.alpha * pi_m * D2 / L)


@dataclass(frozen=True)
class Point:
    timestamp: float
    coords: tuple[float, ...]
    label: object = None


def _haversine_km(coords: np.ndarray) -> np.ndarray:
    lat = np.radians(coords[:, 0])
    lon = np.radians(coords[:, 1])
    dlat = lat[:, None] - lat[None, :]
    dlon = lon[:, None] - lon[None, :]
    h = np.sin(dlat / 2) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0, 1)))


def threshold_graph(points: Sequence, tau: float, mode: str = "planar") -> tuple[OrderedGraph, Labeling]:
    """Connect two points whose distance is strictly below ``tau``.

    ``mode="planar"`` uses Euclidean distance on the coordinates;
    ``mode="geodesic"`` treats them as (lat, lon) degrees and uses the
    great-circle distance in kilometres. Class labels are mapped to
    ``0..K-1`` in sorted order.
    """
    if mode not in ("planar", "geodesic"):
        raise ConfigError(f"unknown distance mode {mode!r}")
    pts = [p if isinstance(p, Point) else Point(p[0], tuple(p[1]), p[2]) for p in points]
    if not pts:
        raise InputError("need at least one point")
    times = np.array([p.timestamp for p in pts], dtype=float)
    if np.any(np.diff(times) < 0):
        raise OrderingError("timestamps must be non-decreasing")
    coords = np.array([p.coords for p in pts], dtype=float)
    if not np.all(np.isfinite(coords)):
        raise InputError("coordinates must be finite")
    if mode == "planar":
        dist = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=-1))
    else:
        dist = _haversine_km(coords)
    X = (dist < tau).astype(np.uint8)
    np.fill_diagonal(X, 0)
    classes = sorted({p.label for p in pts}, key=lambda v: (str(type(v)), v))
    index = {c: k for k, c in enumerate(classes)}
    labels = Labeling([index[p.label] for p in pts], max(len(classes), 1))
    return OrderedGraph(X), labels


def great_circle_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in km between two (lat, lon) points in degrees."""
    return float(_haversine_km(np.array([a, b], dtype=float))[0, 1])


def transition_counts(labels: Labeling) -> np.ndarray:
    counts = np.zeros((labels.K, labels.K), dtype=np.int64)
    np.add.at(counts, (labels.labels[:-1], labels.labels[1:]), 1)
    return counts


__all__ = [
    "ModelParams",
    "OrderedGraph",
    "Labeling",
    "SnrSummary",
    "Point",
    "stationary_distribution",
    "sample_chain",
    "sample_graph",
    "misclassification",
    "best_permutation",
    "snr",
    "threshold_graph",
    "great_circle_km",
    "transition_counts",
]
