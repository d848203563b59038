import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msbm.errors import DegenerateLikelihoodError, InputError
from msbm.hmm import (
    GapSpec,
    HmmState,
    baum_welch,
    chi,
    forward_backward,
    initial_state,
    timeline,
    zeta,
    zeta_to_end,
)
from msbm.model import Labeling, sample_chain

from . import oracles

TWO_P = np.array([[0.2, 0.8], [0.6, 0.4]])


def unscaled_forward_backward(theta, obs):
    """Textbook recursions in extended precision, no normalisation."""
    P = theta.P_tilde.astype(np.longdouble)
    O = theta.O.astype(np.longdouble)
    n, K = len(obs), theta.K
    e = np.array([O[:, o] if o >= 0 else np.ones(K, dtype=np.longdouble) for o in obs])
    a = np.empty((n, K), dtype=np.longdouble)
    b = np.empty((n, K), dtype=np.longdouble)
    a[0] = theta.mu.astype(np.longdouble) * e[0]
    for t in range(1, n):
        a[t] = (a[t - 1] @ P) * e[t]
    b[-1] = 1
    for t in range(n - 2, -1, -1):
        b[t] = P @ (e[t + 1] * b[t + 1])
    return a, b


@pytest.mark.parametrize("K,n", list(itertools.product([2, 3], [3, 4, 5])))
def test_tables_match_path_enumeration(K, n):
    rng = np.random.default_rng(100 * K + n)
    worst = 0.0
    for _ in range(50):
        theta = oracles.random_theta(rng, K)
        obs = rng.integers(0, K, n)
        labels = Labeling(obs, K)
        fb = forward_backward(theta, labels)
        _, w = oracles.path_weights(theta, obs)
        worst = max(worst, abs(fb.log_likelihood - np.log(w.sum())))
        worst = max(worst, np.abs(fb.gamma - oracles.gamma(theta, obs)).max())
        for i in range(n - 1):
            worst = max(worst, np.abs(fb.xi[i] - oracles.posterior_pair(theta, obs, i, i + 1)).max())
        for i, j in itertools.combinations(range(n), 2):
            worst = max(worst, np.abs(chi(theta, labels, i, j) - oracles.chi(theta, obs, i, j)).max())
            Z = zeta(theta, labels, i, j, tables=fb)
            worst = max(worst, np.abs(Z - oracles.posterior_pair(theta, obs, i, j)).max())
    assert worst < 1e-10


@pytest.mark.parametrize("K", [2, 3])
def test_gap_tables_match_path_enumeration(K):
    rng = np.random.default_rng(K)
    gap = GapSpec(2, 5, 1)  # nodes 1, 2, 5, 6 observed; 3 and 4 hidden
    for _ in range(50):
        theta = oracles.random_theta(rng, K)
        labels = Labeling(rng.integers(0, K, gap.n_observed), K)
        obs = timeline(labels, gap)
        assert list(obs[2:4]) == [-1, -1]
        fb = forward_backward(theta, labels, gap)
        assert np.abs(fb.gamma - oracles.gamma(theta, obs)).max() < 1e-10
        for i, j in itertools.combinations(range(gap.length), 2):
            assert np.abs(chi(theta, labels, i, j, gap) - oracles.chi(theta, obs, i, j)).max() < 1e-10
            Z = zeta(theta, labels, i, j, gap, fb)
            assert np.abs(Z - oracles.posterior_pair(theta, obs, i, j)).max() < 1e-10


def test_empty_gap_equals_plain_recursions():
    rng = np.random.default_rng(5)
    theta = oracles.random_theta(rng, 3)
    labels = Labeling(rng.integers(0, 3, 30), 3)
    plain = forward_backward(theta, labels)
    gapped = forward_backward(theta, labels, GapSpec(10, 11, 19))
    for name in ("alpha", "beta", "gamma", "xi", "scaling"):
        assert np.array_equal(getattr(plain, name), getattr(gapped, name))


def test_gap_validation():
    with pytest.raises(InputError):
        GapSpec(5, 5, 1)
    with pytest.raises(InputError):
        timeline(Labeling([0, 1, 0], 2), GapSpec(2, 5, 1))


@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(1, 50))
def test_scaled_matches_unscaled(seed, K, n):
    rng = np.random.default_rng(seed)
    theta = oracles.random_theta(rng, K)
    obs = rng.integers(0, K, n)
    fb = forward_backward(theta, Labeling(obs, K))
    a, b = unscaled_forward_backward(theta, obs)
    lik = a[-1].sum()
    assert abs(fb.log_likelihood - float(np.log(lik))) < 1e-10
    g = a * b / lik
    assert np.abs(fb.gamma - g.astype(float)).max() < 1e-10
    prefix = np.cumprod(fb.scaling.astype(np.longdouble))
    assert np.abs((fb.alpha * prefix[:, None] - a) / a.sum(axis=1, keepdims=True)).max() < 1e-10


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 40))
def test_posteriors_are_normalised(seed, K, n):
    rng = np.random.default_rng(seed)
    theta = oracles.random_theta(rng, K)
    labels = Labeling(rng.integers(0, K, n), K)
    fb = forward_backward(theta, labels)
    assert np.allclose(fb.gamma.sum(axis=1), 1, atol=1e-10)
    assert np.allclose(fb.xi.sum(axis=(1, 2)), 1, atol=1e-10)
    i, j = sorted(rng.integers(0, n, 2))
    Z = zeta(theta, labels, i, j, tables=fb)
    assert abs(Z.sum() - 1) < 1e-10
    assert np.allclose(Z.sum(axis=1), fb.gamma[i], atol=1e-12)


def test_single_observation_posterior():
    theta = HmmState(TWO_P, [[0.9, 0.1], [0.3, 0.7]], [0.4, 0.6])
    fb = forward_backward(theta, Labeling([1], 2))
    expected = np.array([0.4 * 0.1, 0.6 * 0.7])
    assert np.allclose(fb.gamma[0], expected / expected.sum(), atol=1e-15)


def test_uniform_theta_gives_uniform_posterior():
    theta = HmmState(np.full((3, 3), 1 / 3), np.full((3, 3), 1 / 3), np.full(3, 1 / 3))
    fb = forward_backward(theta, Labeling([0, 2, 1, 1, 0], 3))
    assert np.allclose(fb.gamma, 1 / 3, atol=1e-15)


def test_chi_single_step_and_identity_emissions():
    rng = np.random.default_rng(0)
    theta = oracles.random_theta(rng, 3)
    labels = Labeling([0, 2, 1, 1, 0], 3)
    assert np.allclose(chi(theta, labels, 1, 2), theta.P_tilde @ np.diag(theta.O[:, 1]), atol=1e-15)
    exact = HmmState(theta.P_tilde, np.eye(3), theta.mu)
    got = chi(exact, labels, 0, 3)
    # the identity channel pins every intermediate community to its observation
    path = labels.labels
    value = np.prod([theta.P_tilde[path[m - 1], path[m]] for m in (2, 3)])
    expected = np.zeros((3, 3))
    expected[:, path[3]] = theta.P_tilde[:, path[1]] * value
    assert np.allclose(got, expected, atol=1e-15)


def test_chi_under_identity_and_matching_path_reduces_to_powers():
    P = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    theta = HmmState(P, np.eye(3), np.full(3, 1 / 3))
    labels = Labeling([0, 1, 2, 0], 3)
    got = chi(theta, labels, 0, 1)
    assert got[0, 1] == pytest.approx(P[0, 1])
    assert np.all(np.delete(got, 1, axis=1) == 0)


def test_zeta_adjacent_equals_xi():
    rng = np.random.default_rng(9)
    theta = oracles.random_theta(rng, 3)
    labels = Labeling(rng.integers(0, 3, 12), 3)
    fb = forward_backward(theta, labels)
    for i in range(11):
        assert np.abs(zeta(theta, labels, i, i + 1) - fb.xi[i]).max() < 1e-12


def test_zeta_to_end_matches_pairwise():
    rng = np.random.default_rng(4)
    theta = oracles.random_theta(rng, 3)
    labels = Labeling(rng.integers(0, 3, 25), 3)
    fb = forward_backward(theta, labels)
    Z = zeta_to_end(theta, labels.labels, fb)
    for i in range(25):
        assert np.abs(Z[i] - zeta(theta, labels, i, 24, tables=fb)).max() < 1e-12


def test_impossible_observation_raises():
    theta = HmmState([[0.0, 1.0], [1.0, 0.0]], np.eye(2), [1.0, 0.0])
    with pytest.raises(DegenerateLikelihoodError):
        forward_backward(theta, Labeling([0, 0], 2))


def test_single_state_model():
    theta = baum_welch(Labeling([0, 0, 0], 1), max_iter=1)
    assert theta.O.tolist() == [[1.0]]
    assert theta.P_tilde.tolist() == [[1.0]]
    assert theta.mu.tolist() == [1.0]


def test_learns_chain_from_perfect_observations():
    c = sample_chain(TWO_P, [3 / 7, 4 / 7], 2000, np.random.default_rng(0))
    theta = baum_welch(Labeling(c, 2))
    assert np.abs(theta.P_tilde - TWO_P).max() < 0.05
    assert np.abs(theta.O - np.eye(2)).max() < 0.05


@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(2, 80))
def test_em_log_likelihood_is_monotone(seed, K, n):
    rng = np.random.default_rng(seed)
    labels = Labeling(rng.integers(0, K, n), K)
    ll = np.array(baum_welch(labels, max_iter=30).log_likelihood)
    assert np.all(np.diff(ll) >= -1e-9)


def test_em_states_aligned_and_valid():
    rng = np.random.default_rng(1)
    labels = Labeling(rng.integers(0, 3, 60), 3)
    theta = baum_welch(labels, gap=None)
    assert np.allclose(theta.O.sum(axis=1), 1, atol=1e-10)
    sums = [np.trace(theta.permuted(p).O) for p in itertools.permutations(range(3))]
    assert np.trace(theta.O) == pytest.approx(max(sums))


def test_em_with_gap_runs():
    rng = np.random.default_rng(2)
    gap = GapSpec(30, 41, 19)
    theta = baum_welch(Labeling(rng.integers(0, 2, gap.n_observed), 2), gap=gap)
    ll = np.array(theta.log_likelihood)
    assert np.all(np.diff(ll) >= -1e-9)


def test_initial_state_and_input_errors():
    th = initial_state(3, 0.1)
    assert np.allclose(np.diag(th.O), 0.9)
    with pytest.raises(InputError):
        initial_state(0)
    with pytest.raises(InputError):
        baum_welch(Labeling([], 2))
    with pytest.raises(InputError):
        chi(th, Labeling([0, 1, 2], 3), 2, 1)
