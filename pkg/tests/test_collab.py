import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msbm.collab import (
    FilterQuery,
    map_optimal,
    map_plugin,
    map_reliable,
    normalize,
    optimal_scores,
    plugin_scores,
    reliable_scores,
)
from msbm.errors import DegenerateLikelihoodError, InputError, MissingParameterError
from msbm.estimators import EstimatedParams, project_stochastic
from msbm.hmm import HmmState
from msbm.model import Labeling, ModelParams, sample_graph
from msbm.presets import four_community

from . import oracles


def bernoulli(Q, x):
    return Q if x else 1 - Q


def enumerated_posterior(theta, est, obs, query, prior):
    K = theta.K
    P = project_stochastic(est.P_hat)
    paths, w = oracles.path_weights(theta, obs)
    post = np.zeros(K)
    for k in range(K):
        lik = np.ones(len(w))
        for i, x in zip(query.E, query.x_obs):
            lik *= bernoulli(est.Q_hat[paths[:, i], k], x)
        if prior == "marginal":
            post[k] = np.sum(w * lik) * (theta.mu @ np.linalg.matrix_power(P, query.n))[k]
        else:
            step = np.linalg.matrix_power(P, query.n - query.m)[:, k]
            post[k] = np.sum(w * lik * step[paths[:, -1]])
    return post / post.sum()


def random_instance(rng, K, m):
    theta = oracles.random_theta(rng, K)
    Q = rng.uniform(0.05, 0.95, (K, K))
    est = EstimatedParams((Q + Q.T) / 2, np.full(K, 1 / K), rng.random((K, K)) * 1.3)
    obs = rng.integers(0, K, m)
    size = int(rng.integers(1, m + 1))
    E = tuple(sorted(rng.choice(m, size, replace=False).tolist()))
    query = FilterQuery(m, m + int(rng.integers(1, 30)), E, tuple(rng.integers(0, 2, size).tolist()))
    return theta, est, obs, query


@pytest.mark.parametrize("prior", ["marginal", "chained"])
@pytest.mark.parametrize("K,m", list(itertools.product([2, 3], [4, 5])))
def test_reliable_posterior_matches_enumeration(K, m, prior):
    rng = np.random.default_rng(7 * K + m)
    worst = 0.0
    for _ in range(50):
        theta, est, obs, query = random_instance(rng, K, m)
        got = normalize(reliable_scores(theta, est, Labeling(obs, K), query, prior))
        worst = max(worst, np.abs(got - enumerated_posterior(theta, est, obs, query, prior)).max())
    assert worst < 1e-10


def test_optimal_matches_direct_evaluation():
    params = four_community()
    _, truth = sample_graph(params, 10, 0)
    query = FilterQuery(10, 15, (9,), (1,))
    c = truth.labels
    direct = [params.Q[c[9], k] * np.linalg.matrix_power(params.P, 5)[c[9], k] for k in range(4)]
    assert map_optimal(params, truth, query) == int(np.argmax(direct))
    assert np.allclose(normalize(optimal_scores(params, truth, query)), np.array(direct) / np.sum(direct))


def test_single_community():
    params = ModelParams(1, [[1.0]], [1.0], 0.5, [[1.0]])
    truth = Labeling([0, 0, 0], 1)
    q = FilterQuery(3, 5, (0, 2), (1, 0))
    assert map_optimal(params, truth, q) == 0
    est = EstimatedParams(np.array([[0.5]]), np.array([1.0]), np.array([[1.0]]))
    theta = HmmState([[1.0]], [[1.0]], [1.0])
    assert map_plugin(est, truth, q) == 0
    assert map_reliable(theta, est, truth, q) == 0


@given(st.integers(0, 2**32 - 1), st.floats(-50, 50))
def test_argmax_invariant_to_scale(seed, shift):
    rng = np.random.default_rng(seed)
    theta, est, obs, query = random_instance(rng, 3, 5)
    scores = reliable_scores(theta, est, Labeling(obs, 3), query)
    assert int(np.argmax(scores + shift)) == int(np.argmax(scores))
    assert np.allclose(normalize(scores + shift), normalize(scores))


def test_truth_identity_channel_makes_rules_agree():
    params = four_community()
    theta = HmmState(params.P, np.eye(4), params.pi)
    est = EstimatedParams(params.Q, params.pi, params.P)
    rng = np.random.default_rng(3)
    for seed in range(10):
        _, truth = sample_graph(params, 40, seed)
        for size in (1, 2, 5, 10, 26):
            q = FilterQuery.last_nodes(40, 50, size, rng.integers(0, 2, size))
            opt = optimal_scores(params, truth, q)
            assert np.allclose(plugin_scores(est, truth, q), opt, atol=1e-12)
            rel = reliable_scores(theta, est, truth, q, "chained")
            assert np.allclose(normalize(rel), normalize(opt), atol=1e-12)
            assert map_optimal(params, truth, q) == map_plugin(est, truth, q)
            assert map_optimal(params, truth, q) == map_reliable(theta, est, truth, q, "chained")


def test_query_validation():
    with pytest.raises(InputError):
        FilterQuery(5, 5, (0,), (1,))
    with pytest.raises(InputError):
        FilterQuery(5, 9, (), ())
    with pytest.raises(InputError):
        FilterQuery(5, 9, (3, 1), (1, 0))
    with pytest.raises(InputError):
        FilterQuery(5, 9, (5,), (1,))
    with pytest.raises(InputError):
        FilterQuery(5, 9, (1,), (2,))


def test_missing_estimates_and_degenerate_scores():
    est = EstimatedParams(np.array([[np.nan, 0.5], [0.5, 0.5]]), np.array([0.5, 0.5]), np.eye(2))
    with pytest.raises(MissingParameterError):
        plugin_scores(est, Labeling([0, 1, 0], 2), FilterQuery(3, 4, (0,), (1,)))
    with pytest.raises(DegenerateLikelihoodError):
        normalize(np.array([-np.inf, -np.inf]))


def test_extreme_connectivity_stays_finite():
    est = EstimatedParams(np.array([[0.0, 1.0], [1.0, 0.5]]), np.array([0.5, 0.5]), np.array([[0.5, 0.5], [0.5, 0.5]]))
    labels = Labeling([0, 1, 0, 1], 2)
    scores = plugin_scores(est, labels, FilterQuery(4, 6, (0, 1), (0, 1)))
    assert not np.isnan(scores).any()
    assert map_plugin(est, labels, FilterQuery(4, 6, (0, 1), (0, 1))) == 0
