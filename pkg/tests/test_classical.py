import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ionrps.classical import (EmptyTail, NotConverged, NotErgodic, StepLimitExceeded,
                              absorption_probabilities, classical_rps_deliberate, is_rank_one,
                              mixed_rps_deliberate, spectral_gap, standard_ps_deliberate,
                              stationary_distribution, tailed_distribution)
from ionrps.ecm import Clip, ClipKind, rank_one_matrix, validate_network

A, PC, IN = ClipKind.ACTION, ClipKind.PERCEPT, ClipKind.INTERNAL
P2 = np.array([[0.9, 0.3], [0.1, 0.7]])


def net(P, kinds):
    return validate_network(P, [Clip(i + 1, k) for i, k in enumerate(kinds)])


def test_stationary_rank_one():
    assert np.allclose(stationary_distribution(rank_one_matrix([0.6, 0.3, 0.1])), [0.6, 0.3, 0.1])


def test_stationary_two_state():
    # oracle: solve (P - 1) pi = 0 with sum(pi) = 1
    A_ = np.vstack([P2 - np.eye(2), np.ones(2)])
    oracle = np.linalg.lstsq(A_, [0, 0, 1], rcond=None)[0]
    pi = stationary_distribution(P2)
    assert np.allclose(pi, oracle) and np.allclose(pi, [0.75, 0.25])
    assert np.abs(P2 @ pi - pi).sum() <= 1e-12


def test_stationary_doubly_stochastic():
    P = np.array([[0.2, 0.5, 0.3], [0.5, 0.1, 0.4], [0.3, 0.4, 0.3]])
    assert np.allclose(stationary_distribution(P), np.full(3, 1 / 3))


def test_stationary_reports_tie():
    with pytest.raises(NotConverged, match="tie"):
        stationary_distribution(_periodic_biased(), max_iters=50)


def _periodic_biased():
    # period 2 with classes {1} and {2, 3}: the uniform start puts 1/3 vs 2/3 on them and oscillates
    return np.array([[0.0, 1.0, 1.0],
                     [0.4, 0.0, 0.0],
                     [0.6, 0.0, 0.0]])


def test_spectral_gap_examples():
    assert spectral_gap(rank_one_matrix([0.6, 0.3, 0.1])) == 1.0
    assert spectral_gap(P2) == pytest.approx(0.4)
    with pytest.raises(NotErgodic):
        spectral_gap(np.eye(3))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_gap_one_iff_rank_one(n, seed):
    rng = np.random.default_rng(seed)
    pi = rng.dirichlet(np.ones(n))
    assert spectral_gap(rank_one_matrix(pi)) == 1.0
    P = rng.random((n, n)) + 0.05
    P /= P.sum(axis=0)
    assert not is_rank_one(P)
    assert spectral_gap(P) < 1.0 - 1e-9


def test_tailed_distribution_examples():
    pi = np.array([0.6, 0.3, 0.1])
    assert np.allclose(tailed_distribution(pi, {2, 3}), [0, 0.75, 0.25])
    assert np.allclose(tailed_distribution(pi, {1, 2, 3}), pi)
    assert np.allclose(tailed_distribution([0.045, 0.005, 0.95], {1, 2}), [0.9, 0.1, 0])
    with pytest.raises(EmptyTail):
        tailed_distribution([1.0, 0.0], {2})


def test_standard_ps_single_step():
    n = net(np.array([[0.0, 0.0], [1.0, 1.0]]), [PC, A])
    out = standard_ps_deliberate(n, 1, np.random.default_rng(0))
    assert (out.action, out.steps) == (2, 1)


def test_standard_ps_two_actions_frequencies():
    P = np.array([[0, 0, 0], [0.5, 1, 0], [0.5, 0, 1]])
    n = net(P, [PC, A, A])
    rng = np.random.default_rng(1)
    hits = np.array([standard_ps_deliberate(n, 1, rng).action for _ in range(10_000)])
    f = np.mean(hits == 2)
    assert abs(f - 0.5) <= 3 * np.sqrt(0.25 / 10_000)


def test_standard_ps_matches_absorption_oracle():
    # percept -> internal -> actions, with the internal clip partly looping back
    P = np.array([[0.0, 0.2, 0, 0],
                  [1.0, 0.3, 0, 0],
                  [0.0, 0.35, 1, 0],
                  [0.0, 0.15, 0, 1]])
    n = net(P, [PC, IN, A, A])
    oracle = absorption_probabilities(n, 1)
    assert oracle[3] + oracle[4] == pytest.approx(1.0)
    rng = np.random.default_rng(2)
    hits = np.array([standard_ps_deliberate(n, 1, rng).action for _ in range(10_000)])
    f3 = np.mean(hits == 3)
    assert abs(f3 - oracle[3]) <= 3 * np.sqrt(oracle[3] * (1 - oracle[3]) / 10_000)
    assert oracle[3] == pytest.approx(0.7)


def test_standard_ps_step_limit():
    P = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    n = net(P, [PC, IN, A])
    with pytest.raises(StepLimitExceeded):
        standard_ps_deliberate(n, 1, np.random.default_rng(0), step_limit=100)


def test_classical_rps_eps_one_is_one_sample():
    rng = np.random.default_rng(3)
    assert all(classical_rps_deliberate([0.5, 0.5], {1, 2}, rng).steps == 1 for _ in range(100))


def test_classical_rps_geometric_mean():
    rng = np.random.default_rng(4)
    pi = np.array([0.03, 0.02, 0.95])
    steps = np.array([classical_rps_deliberate(pi, {1, 2}, rng).steps for _ in range(10_000)])
    # geometric with p = 0.05: mean 20, variance (1 - p) / p^2
    sd = np.sqrt(0.95 / 0.05**2 / 10_000)
    assert abs(steps.mean() - 20) <= 3 * sd
    assert abs(steps.mean() - 20) / 20 <= 0.1


def test_classical_rps_ratio_nine():
    rng = np.random.default_rng(5)
    acts = np.array([classical_rps_deliberate([0.045, 0.005, 0.95], {1, 2}, rng).action
                     for _ in range(10_000)])
    n1, n2 = np.sum(acts == 1), np.sum(acts == 2)
    assert n1 + n2 == 10_000
    p = 0.9
    assert abs(n1 / 10_000 - p) <= 3 * np.sqrt(p * (1 - p) / 10_000)


def test_classical_rps_empty_tail():
    with pytest.raises(EmptyTail):
        classical_rps_deliberate([1.0, 0.0, 0.0], {2, 3}, np.random.default_rng(0))


def test_classical_rps_first_result_ignores_chunk_size():
    pi = np.array([0.1, 0.1, 0.8])
    outs = {classical_rps_deliberate(pi, {1}, np.random.default_rng(9), chunk=c) for c in (1, 7, 64)}
    assert len(outs) == 1


def test_mixed_rps_on_rank_one_chain():
    pi = np.array([0.3, 0.2, 0.5])
    n = net(rank_one_matrix(pi), [PC, A, A])
    rng = np.random.default_rng(6)
    acts = np.array([mixed_rps_deliberate(n, 1, {2, 3}, 1, rng).action for _ in range(5000)])
    f2 = np.mean(acts == 2)
    assert abs(f2 - 2 / 7) <= 3 * np.sqrt((2 / 7) * (5 / 7) / 5000)
