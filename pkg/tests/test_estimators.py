import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msbm.errors import InputError
from msbm.estimators import estimate, estimate_P, estimate_pi, estimate_Q, project_stochastic
from msbm.model import Labeling, OrderedGraph, sample_graph
from msbm.presets import four_community


def test_q_on_empty_and_complete_graphs():
    labels = Labeling([0, 1, 0, 1, 1], 2)
    empty = OrderedGraph(np.zeros((5, 5)))
    full = OrderedGraph(np.ones((5, 5)) - np.eye(5))
    assert np.all(estimate_Q(empty, labels) == 0)
    assert np.all(estimate_Q(full, labels) == 1)


def test_q_hand_count():
    g = OrderedGraph.from_edges(3, [(0, 1), (0, 2)])
    Q = estimate_Q(g, Labeling([0, 0, 1], 2))
    assert Q[0, 0] == pytest.approx(1.0)
    assert Q[0, 1] == pytest.approx(0.5)
    assert np.isnan(Q[1, 1])


def test_pi_examples():
    assert np.allclose(estimate_pi(Labeling([0, 0, 1, 1], 2)), [0.5, 0.5])
    assert np.allclose(estimate_pi(Labeling([0, 0, 0, 0], 3)), [1, 0, 0])
    assert np.allclose(estimate_pi(Labeling([0, 1, 1, 2, 2, 2], 3)), [1 / 6, 2 / 6, 3 / 6])


def test_p_examples():
    assert estimate_P(Labeling([0, 0, 0, 0], 2))[0, 0] == pytest.approx(1.0)
    assert estimate_P(Labeling([0, 1, 0, 1], 2))[0, 1] == pytest.approx(4 / 3)
    P = estimate_P(Labeling([0, 0, 1, 0], 2))
    assert P[0, 0] == pytest.approx(4 / 9)
    assert P[0, 1] == pytest.approx(4 / 9)
    assert P[1, 0] == pytest.approx(4 / 3)


def test_p_undefined_for_unvisited_row():
    P = estimate_P(Labeling([0, 0, 0], 2))
    assert np.isnan(P[1]).all()
    with pytest.raises(InputError):
        estimate_P(Labeling([0], 2))


def test_projection_examples():
    S = np.array([[0.3, 0.7], [1.0, 0.0]])
    assert np.array_equal(project_stochastic(S), S)
    assert np.allclose(project_stochastic([[4 / 3, 0.0], [0.5, 0.5]])[0], [1, 0])
    assert np.allclose(project_stochastic([[np.nan, np.nan], [0.5, 0.5]])[0], [0.5, 0.5])


@given(st.integers(0, 2**32 - 1), st.integers(2, 60))
def test_estimator_invariants(seed, n):
    g, labels = sample_graph(four_community(), n, seed)
    est = estimate(g, labels)
    assert abs(est.pi_hat.sum() - 1) < 1e-15
    Q = est.Q_hat
    assert np.array_equal(np.isnan(Q), np.isnan(Q.T))
    assert np.allclose(np.nan_to_num(Q), np.nan_to_num(Q.T))
    visited = labels.counts() > 0
    assert np.all(np.isfinite(est.P_hat[visited]))
    assert np.all(est.P_hat[visited] >= 0)
    proj = project_stochastic(est.P_hat)
    assert np.allclose(proj.sum(axis=1), 1)


@given(st.integers(0, 2**32 - 1), st.permutations(range(4)))
def test_label_permutation_equivariance(seed, sigma):
    sigma = np.asarray(sigma)
    g, labels = sample_graph(four_community(), 40, seed)
    a = estimate(g, labels)
    b = estimate(g, labels.permuted(sigma))
    inv = np.argsort(sigma)
    # new community sigma[k] is old k, so reading row sigma[k] of b recovers row k of a
    np.testing.assert_allclose(b.pi_hat[sigma], a.pi_hat)
    np.testing.assert_allclose(b.Q_hat[np.ix_(sigma, sigma)], a.Q_hat)
    np.testing.assert_allclose(b.P_hat[np.ix_(sigma, sigma)], a.P_hat)
    np.testing.assert_allclose(b.P_hat, a.P_hat[np.ix_(inv, inv)])


def test_q_unbiased_on_true_labels():
    params = four_community()
    Qs = [estimate_Q(*sample_graph(params, 200, s)) for s in range(1000)]
    assert np.abs(np.nanmean(Qs, axis=0) - params.Q).max() < 0.01
