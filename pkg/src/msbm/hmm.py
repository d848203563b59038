"""Gap-aware Baum-Welch for the clusterer-as-noisy-channel hidden Markov model.

The hidden chain is the true community sequence with transition matrix
``P_tilde`` and initial law ``mu``; the clusterer output at node ``i`` is an
emission drawn from row ``C_i`` of ``O``.  Nodes inside an unreliable gap carry
no observation, so the recursions cross the gap with transition steps only
(one ``P_tilde`` power over the whole gap, no emission factor).

Positions passed to :func:`chi` and :func:`zeta` are 0-based indices on the
full timeline, gap included.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DegenerateLikelihoodError, InputError
from .model import Labeling

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-2
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 200


@dataclass(frozen=True)
class HmmState:
    P_tilde: np.ndarray
    O: np.ndarray
    mu: np.ndarray
    log_likelihood: tuple = ()

    def __post_init__(self):
        P = np.asarray(self.P_tilde, dtype=float)
        O = np.asarray(self.O, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        K = mu.size
        if K < 1 or P.shape != (K, K) or O.shape != (K, K):
            raise InputError("P_tilde, O and mu must be KxK, KxK and length K")
        for name, M in (("P_tilde", P), ("O", O)):
            if np.any(M < 0) or not np.allclose(M.sum(axis=1), 1.0, atol=1e-10):
                raise InputError(f"{name} must be row-stochastic")
        if np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-10:
            raise InputError("mu must be a probability vector")
        object.__setattr__(self, "P_tilde", P)
        object.__setattr__(self, "O", O)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "log_likelihood", tuple(float(v) for v in self.log_likelihood))

    @property
    def K(self) -> int:
        return self.mu.size

    def permuted(self, sigma) -> "HmmState":
        """Relabel hidden states: new state ``k`` is old state ``sigma[k]``."""
        s = np.asarray(sigma)
        return HmmState(self.P_tilde[np.ix_(s, s)], self.O[s], self.mu[s], self.log_likelihood)


@dataclass(frozen=True)
class GapSpec:
    """Observed nodes are ``1..T`` and ``n_start..n_start+delta`` (1-based)."""

    T: int
    n_start: int
    delta: int

    def __post_init__(self):
        if not 1 <= self.T < self.n_start or self.delta < 0:
            raise InputError(f"invalid gap T={self.T}, n_start={self.n_start}, delta={self.delta}")

    @property
    def length(self) -> int:
        return self.n_start + self.delta

    @property
    def n_observed(self) -> int:
        return self.T + self.delta + 1

    def observed_positions(self) -> np.ndarray:
        return np.r_[np.arange(self.T), np.arange(self.n_start - 1, self.length)]


@dataclass
class FbTables:
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    xi: np.ndarray
    scaling: np.ndarray
    log_likelihood: float


def timeline(observed: Labeling, gap: GapSpec | None = None) -> np.ndarray:
    """Observation per timeline position, ``-1`` where the node is unobserved."""
    obs = np.asarray(observed.labels)
    if gap is None:
        return obs.copy()
    if observed.n != gap.n_observed:
        raise InputError(f"gap expects {gap.n_observed} observations, got {observed.n}")
    out = np.full(gap.length, -1, dtype=np.int64)
    out[gap.observed_positions()] = obs
    return out


def _emissions(O: np.ndarray, obs: np.ndarray) -> np.ndarray:
    E = np.ones((obs.size, O.shape[0]))
    seen = obs >= 0
    E[seen] = O[:, obs[seen]].T
    return E


def _forward_backward(theta: HmmState, obs: np.ndarray) -> FbTables:
    n = obs.size
    K = theta.K
    if n == 0:
        raise InputError("empty observation sequence")
    P = theta.P_tilde
    E = _emissions(theta.O, obs)
    alpha = np.empty((n, K))
    c = np.empty(n)
    a = theta.mu * E[0]
    for i in range(n):
        if i > 0:
            a = (alpha[i - 1] @ P) * E[i]
        c[i] = a.sum()
        if not c[i] > 0:
            raise DegenerateLikelihoodError(f"observations have zero probability at position {i}")
        alpha[i] = a / c[i]
    beta = np.empty((n, K))
    beta[-1] = 1.0
    for i in range(n - 2, -1, -1):
        beta[i] = P @ (E[i + 1] * beta[i + 1]) / c[i + 1]
    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    if n > 1:
        xi = alpha[:-1, :, None] * P[None] * (E[1:] * beta[1:])[:, None, :] / c[1:, None, None]
        xi /= xi.sum(axis=(1, 2), keepdims=True)
    else:
        xi = np.zeros((0, K, K))
    return FbTables(alpha, beta, gamma, xi, c, float(np.log(c).sum()))


def forward_backward(theta: HmmState, observed: Labeling, gap: GapSpec | None = None) -> FbTables:
    """Scaled forward/backward tables on the full timeline.

    ``alpha[i]`` is the forward vector normalised to sum 1 and ``scaling[i]``
    its normaliser, so the unscaled forward value at ``i`` is
    ``alpha[i] * prod(scaling[:i+1])``; ``beta`` is scaled by the matching
    suffix products.
    """
    _check_observed(theta, observed)
    return _forward_backward(theta, timeline(observed, gap))


def _check_observed(theta: HmmState, observed: Labeling) -> None:
    if observed.K != theta.K:
        raise InputError(f"labeling has K={observed.K}, theta has K={theta.K}")


def initial_state(K: int, epsilon: float = DEFAULT_EPSILON) -> HmmState:
    """Uniform ``P_tilde`` and ``mu``; ``O`` puts ``1 - epsilon`` on the diagonal."""
    if K < 1:
        raise InputError("K must be positive")
    if not 0 < epsilon < 1:
        raise InputError("epsilon must lie in (0, 1)")
    if K == 1:
        O = np.ones((1, 1))
    else:
        O = (1 - epsilon) * np.eye(K) + epsilon / (K - 1) * (np.ones((K, K)) - np.eye(K))
    return HmmState(np.full((K, K), 1.0 / K), O, np.full(K, 1.0 / K))


def _m_step(theta: HmmState, obs: np.ndarray, fb: FbTables) -> HmmState:
    K = theta.K
    mu = fb.gamma[0].copy()
    P = theta.P_tilde.copy()
    if fb.xi.shape[0]:
        num = fb.xi.sum(axis=0)
        den = num.sum(axis=1)
        ok = den > 0
        P[ok] = num[ok] / den[ok, None]
    O = theta.O.copy()
    seen = obs >= 0
    num = np.zeros((K, K))
    np.add.at(num.T, obs[seen], fb.gamma[seen])
    den = num.sum(axis=1)
    ok = den > 0
    O[ok] = num[ok] / den[ok, None]
    # renormalise away floating drift so the state invariants hold to 1e-10
    P /= P.sum(axis=1, keepdims=True)
    O /= O.sum(axis=1, keepdims=True)
    mu /= mu.sum()
    return HmmState(P, O, mu)


def align_states(theta: HmmState) -> HmmState:
    """Permute hidden states so that ``trace(O)`` is maximal."""
    rows, cols = linear_sum_assignment(-theta.O)
    sigma = np.empty(theta.K, dtype=int)
    sigma[cols] = rows
    return theta.permuted(sigma)


def baum_welch(
    observed: Labeling,
    gap: GapSpec | None = None,
    epsilon: float = DEFAULT_EPSILON,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    init: HmmState | None = None,
) -> HmmState:
    """Fit ``(P_tilde, O, mu)`` by EM on the clusterer labels.

    The returned state records the log-likelihood before each M-step plus the
    final one, and its states are aligned so that ``O`` is diagonally heavy.
    """
    if observed.n == 0:
        raise InputError("empty observations")
    if max_iter < 1:
        raise InputError("max_iter must be positive")
    obs = timeline(observed, gap)
    theta = init if init is not None else initial_state(observed.K, epsilon)
    _check_observed(theta, observed)
    history = []
    fb = _forward_backward(theta, obs)
    history.append(fb.log_likelihood)
    for _ in range(max_iter):
        theta = _m_step(theta, obs, fb)
        fb = _forward_backward(theta, obs)
        history.append(fb.log_likelihood)
        if history[-1] - history[-2] < tol:
            break
    else:
        log.info("Baum-Welch stopped at max_iter=%d", max_iter)
    theta = HmmState(theta.P_tilde, theta.O, theta.mu, tuple(history))
    return align_states(theta)


def _transfer(theta: HmmState, obs: np.ndarray) -> np.ndarray:
    """Per-position step matrices ``P_tilde @ diag(e_m)`` (``e_m = 1`` when unobserved)."""
    E = _emissions(theta.O, obs)
    return theta.P_tilde[None, :, :] * E[:, None, :]


def _check_pair(n: int, i: int, j: int, strict: bool = True) -> None:
    if not (0 <= i < n and 0 <= j < n):
        raise InputError(f"positions ({i}, {j}) outside timeline of length {n}")
    if i > j or (strict and i == j):
        raise InputError(f"need i < j, got ({i}, {j})")


def chi(theta: HmmState, observed: Labeling, i: int, j: int, gap: GapSpec | None = None) -> np.ndarray:
    """``chi[k, l] = P(C_j = l, observations i+1..j | C_i = k)`` as a product of step matrices."""
    _check_observed(theta, observed)
    obs = timeline(observed, gap)
    _check_pair(obs.size, i, j)
    M = _transfer(theta, obs)
    out = M[i + 1].copy()
    for m in range(i + 2, j + 1):
        out = out @ M[m]
    return out


def zeta(
    theta: HmmState,
    observed: Labeling,
    i: int,
    j: int,
    gap: GapSpec | None = None,
    tables: FbTables | None = None,
) -> np.ndarray:
    """Joint posterior ``P(C_i = k, C_j = l | all observations)``; ``i == j`` gives ``diag(gamma_i)``."""
    _check_observed(theta, observed)
    obs = timeline(observed, gap)
    _check_pair(obs.size, i, j, strict=False)
    fb = tables if tables is not None else _forward_backward(theta, obs)
    if i == j:
        return np.diag(fb.gamma[i])
    M = _transfer(theta, obs)
    S = np.eye(theta.K)
    for m in range(i + 1, j + 1):
        S = S @ M[m]
        S /= S.max()
    Z = fb.alpha[i][:, None] * S * fb.beta[j][None, :]
    return Z / Z.sum()


def zeta_to_end(theta: HmmState, obs: np.ndarray, fb: FbTables) -> np.ndarray:
    """All ``zeta^{(i, n-1)}`` at once via suffix products; shape ``(n, K, K)``."""
    n = obs.size
    K = theta.K
    M = _transfer(theta, obs)
    out = np.empty((n, K, K))
    S = np.eye(K)
    for i in range(n - 1, -1, -1):
        Z = fb.alpha[i][:, None] * S * fb.beta[n - 1][None, :]
        out[i] = Z / Z.sum()
        if i > 0:
            S = M[i] @ S
            S /= S.max()
    return out
