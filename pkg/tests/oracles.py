"""Brute-force reference implementations used by the test-suite.

Everything here enumerates hidden paths or permutations explicitly, so it is
only usable for tiny K and n.
"""

import itertools

import numpy as np


def random_stochastic(rng, K, floor=0.05):
    M = rng.random((K, K)) + floor
    return M / M.sum(axis=1, keepdims=True)


def random_theta(rng, K):
    from msbm.hmm import HmmState

    mu = rng.random(K) + 0.05
    return HmmState(random_stochastic(rng, K), random_stochastic(rng, K), mu / mu.sum())


def path_weights(theta, obs):
    """All K^n hidden paths with their joint probability with ``obs`` (``-1`` = unobserved)."""
    K = theta.K
    n = len(obs)
    paths = np.array(list(itertools.product(range(K), repeat=n)), dtype=int)
    w = theta.mu[paths[:, 0]].copy()
    for t in range(n):
        if t > 0:
            w *= theta.P_tilde[paths[:, t - 1], paths[:, t]]
        if obs[t] >= 0:
            w *= theta.O[paths[:, t], obs[t]]
    return paths, w


def posterior_pair(theta, obs, i, j):
    K = theta.K
    paths, w = path_weights(theta, obs)
    Z = np.zeros((K, K))
    np.add.at(Z, (paths[:, i], paths[:, j]), w)
    return Z / w.sum()


def gamma(theta, obs):
    paths, w = path_weights(theta, obs)
    n = len(obs)
    G = np.zeros((n, theta.K))
    for t in range(n):
        np.add.at(G[t], paths[:, t], w)
    return G / w.sum()


def chi(theta, obs, i, j):
    """Sum over intermediate communities of the transition and emission factors from ``i+1`` to ``j``."""
    K = theta.K
    out = np.zeros((K, K))
    for k in range(K):
        for mid in itertools.product(range(K), repeat=j - i):
            path = (k,) + mid
            v = 1.0
            for step in range(1, len(path)):
                v *= theta.P_tilde[path[step - 1], path[step]]
                o = obs[i + step]
                if o >= 0:
                    v *= theta.O[path[step], o]
            out[k, path[-1]] += v
    return out


def misclassification(est, truth, K):
    est = np.asarray(est)
    truth = np.asarray(truth)
    best = 1.0
    for sigma in itertools.permutations(range(K)):
        best = min(best, float(np.mean(np.asarray(sigma)[est] != truth)))
    return best


def kmedoids_optimum(D, K):
    n = D.shape[0]
    return min(D[:, list(c)].min(axis=1).sum() for c in itertools.combinations(range(n), K))
