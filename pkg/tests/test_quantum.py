import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ionrps.classical import EmptyTail, classical_rps_deliberate
from ionrps.ecm import rank_one_matrix, time_reversed
from ionrps.quantum import (AngleTree, ClipEncoding, DimensionMismatch, EmptyTargets,
                            LengthNotPowerOfTwo, NotReversible, aro, aro_zero_block,
                            build_walk_operator, coherent_ctrl, controlization_angles,
                            default_ancillas, grover_deliberation, ideal_reflection, is_unitary,
                            m_eps_for, probability_unitary, rank_one_deliberate,
                            rank_one_deliberation, ref_actions, reflection_zero,
                            stationary_state, tree_distribution, uy, walk_parts)

X = np.array([[0, 1], [1, 0]], dtype=complex)


def reversible_chain(n, rng):
    w = rng.random((n, n)) + 0.05
    w = w + w.T
    return w / w.sum(axis=0, keepdims=True)


def sub_ab(parts, D):
    """Orthonormal basis of A + B."""
    z = np.zeros((D, 1))
    z[0] = 1
    span = np.hstack([parts.U_P @ np.kron(np.eye(D), z), parts.V_P @ np.kron(z, np.eye(D))])
    q, s, _ = np.linalg.svd(span)
    return q[:, : int((s > 1e-10).sum())]


# -- angle trees ----------------------------------------------------------------

def test_angles_four_leaf_example():
    tree = controlization_angles([0.4, 0.1, 0.3, 0.2])
    assert tree.angle(1) == pytest.approx(math.pi / 2)
    assert tree.angle(2) == pytest.approx(0.927295218, abs=1e-8)
    assert tree.angle(3) == pytest.approx(1.369438406, abs=1e-8)


def test_angles_two_leaf_and_degenerate():
    assert controlization_angles([1.0, 0.0]).angles == (0.0,)
    assert controlization_angles([0.0, 1.0]).angles == pytest.approx((math.pi,))
    # zero-mass subtree gets angle 0
    assert controlization_angles([0.5, 0.5, 0.0, 0.0]).angle(3) == 0.0


def test_angles_reject_non_power_of_two():
    with pytest.raises(LengthNotPowerOfTwo):
        controlization_angles([0.2, 0.3, 0.5])


def test_angle_tree_round_trip():
    tree = controlization_angles([0.1, 0.2, 0.3, 0.1, 0.05, 0.05, 0.1, 0.1])
    assert AngleTree.from_angles(tree.angles) == tree
    assert tree.depth == 3


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_probability_unitary_first_column(k, seed):
    p = np.random.default_rng(seed).dirichlet(np.ones(1 << k) * 0.5)
    tree = controlization_angles(p)
    assert all(0 <= a <= math.pi + 1e-12 for a in tree.angles)
    assert np.allclose(tree_distribution(tree), p, atol=1e-12)
    U = probability_unitary(tree)
    assert is_unitary(U)
    assert np.max(np.abs(U[:, 0] - np.sqrt(p))) <= 1e-12


def test_uy_convention():
    # Y(theta)|0> = cos|0> + sin|1>
    assert np.allclose(uy(math.pi / 3) @ [1, 0], [math.cos(math.pi / 6), math.sin(math.pi / 6)])


# -- coherent controlization ------------------------------------------------------

def test_ctrl_identity_and_cnot():
    assert np.allclose(coherent_ctrl([np.eye(2), np.eye(2)]), np.eye(4))
    cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    assert np.allclose(coherent_ctrl([np.eye(2), X]), cnot)


def test_ctrl_acts_branchwise():
    rng = np.random.default_rng(11)
    U2, U3 = uy(0.7), uy(2.1)
    C = coherent_ctrl([U2, U3])
    for _ in range(100):
        psi = rng.normal(size=2) + 1j * rng.normal(size=2)
        psi /= np.linalg.norm(psi)
        assert np.allclose(C @ np.kron([1, 0], psi), np.kron([1, 0], U2 @ psi))
        assert np.allclose(C @ np.kron([0, 1], psi), np.kron([0, 1], U3 @ psi))


def test_ctrl_shape_errors():
    with pytest.raises(DimensionMismatch):
        coherent_ctrl([np.eye(2), np.eye(4)])
    with pytest.raises(DimensionMismatch):
        coherent_ctrl([np.eye(2)] * 3)


# -- padding --------------------------------------------------------------------

def test_clip_encoding_three_clips():
    enc = ClipEncoding.for_clips(3)
    assert enc.dim == 4 and enc.duplicates == 2
    assert enc.basis_of(3) == [2, 3]
    assert np.allclose(enc.pad_distribution([0.5, 0.3, 0.2]), [0.5, 0.3, 0.1, 0.1])
    assert np.allclose(enc.fold([0.5, 0.3, 0.1, 0.1]), [0.5, 0.3, 0.2])


def test_pad_chain_preserves_stationary_mass():
    rng = np.random.default_rng(3)
    P = reversible_chain(3, rng)
    enc = ClipEncoding.for_clips(3)
    Pp = enc.pad_chain(P)
    assert np.allclose(Pp.sum(axis=0), 1)
    w, v = np.linalg.eig(P)
    pi = np.real(v[:, np.argmin(np.abs(w - 1))])
    pi /= pi.sum()
    assert np.allclose(Pp @ enc.pad_distribution(pi), enc.pad_distribution(pi))


# -- walk operator --------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 4, 8])
def test_walk_fixes_stationary_state(n):
    P = reversible_chain(n, np.random.default_rng(n))
    W = build_walk_operator(P)
    psi = stationary_state(P)
    assert is_unitary(W)
    assert np.max(np.abs(W @ psi - psi)) <= 1e-10
    assert abs(np.vdot(psi, W @ psi) - 1) <= 1e-10


def test_reflections_square_to_identity():
    parts = walk_parts(reversible_chain(4, np.random.default_rng(1)))
    for R in (parts.ref_A, parts.ref_B):
        assert np.allclose(R @ R, np.eye(16), atol=1e-12)


def test_rank_one_walk_is_product_of_reflections():
    pi = np.array([0.4, 0.1, 0.3, 0.2])
    parts = walk_parts(rank_one_matrix(pi))
    U = probability_unitary(controlization_angles(pi))
    R = U @ reflection_zero(4) @ U.conj().T
    assert np.allclose(parts.W, np.kron(R, R), atol=1e-12)
    assert np.allclose(stationary_state(rank_one_matrix(pi)), np.kron(np.sqrt(pi), np.sqrt(pi)))


def test_point_mass_stationary_state():
    psi = stationary_state(rank_one_matrix([1.0, 0.0]))
    assert np.allclose(psi, [1, 0, 0, 0])


def test_non_reversible_chain_needs_reversal():
    P = np.array([[0.1, 0.6, 0.3, 0.2],
                  [0.5, 0.1, 0.2, 0.3],
                  [0.2, 0.2, 0.1, 0.4],
                  [0.2, 0.1, 0.4, 0.1]])
    with pytest.raises(NotReversible):
        build_walk_operator(P)
    w, v = np.linalg.eig(P)
    pi = np.real(v[:, np.argmin(np.abs(w - 1))])
    pi /= pi.sum()
    P_star = time_reversed(P, pi)
    assert np.allclose(P_star.sum(axis=0), 1)
    W = build_walk_operator(P, P_star)
    psi = stationary_state(P)
    assert np.max(np.abs(W @ psi - psi)) <= 1e-10


# -- approximate reflection --------------------------------------------------------

def test_default_ancillas():
    assert default_ancillas(1.0) == 1
    assert default_ancillas(0.25) == 1
    assert default_ancillas(0.01) == 4


def test_aro_without_extra_ancillas_equals_rank_one_walk():
    P = rank_one_matrix([0.4, 0.1, 0.3, 0.2])
    W = build_walk_operator(P)
    assert np.allclose(aro_zero_block(W, 0), W, atol=1e-12)
    A = aro(W, 0)
    assert is_unitary(A)
    assert np.allclose(A[:16, :16], W, atol=1e-12)


def test_aro_fixes_stationary_state():
    P = reversible_chain(4, np.random.default_rng(5))
    W = build_walk_operator(P)
    psi = np.zeros(4 * 16, dtype=complex)
    psi[:16] = stationary_state(P)
    A = aro(W, 1)
    assert is_unitary(A)
    assert np.allclose(A @ psi, psi, atol=1e-10)


def test_aro_error_shrinks_with_ancillas():
    # on (A + B)^perp the walk acts as +1, so the comparison is restricted to A + B
    P = reversible_chain(4, np.random.default_rng(7))
    parts = walk_parts(P)
    Q = sub_ab(parts, 4)
    ideal = ideal_reflection(stationary_state(P))
    errs = [np.linalg.norm((aro_zero_block(parts.W, n) - ideal) @ Q, 2) for n in (2, 4, 6)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


# -- reflections over actions ------------------------------------------------------

def test_ref_actions_examples():
    assert np.allclose(ref_actions(4, [1, 2]), np.diag([1, 1, -1, -1]))
    assert np.allclose(ref_actions(4, [1, 2, 3, 4]), np.eye(4))
    enc = ClipEncoding.for_clips(3)
    assert np.allclose(ref_actions(4, [3], enc), np.diag([-1, -1, 1, 1]))
    with pytest.raises(EmptyTargets):
        ref_actions(4, [])


# -- deliberation -------------------------------------------------------------------

def test_m_eps_examples():
    assert [m_eps_for(e) for e in (1.0, 0.25, 0.05, 0.01, 0.002)] == [1, 2, 5, 10, 23]


def test_rank_one_single_step_hits_flags_exactly():
    # eps = 1/4: one Grover step rotates U|0> onto the flagged subspace
    rng = np.random.default_rng(0)
    outs = [rank_one_deliberate([0.125, 0.125, 0.75], {1, 2}, 2, rng, m_forced=1) for _ in range(200)]
    assert all(o.attempts == 1 and o.steps == 3 and o.action in (1, 2) for o in outs)
    d = rank_one_deliberation([0.125, 0.125, 0.75], {1, 2}, 2)
    assert d.success_probabilities()[1] == pytest.approx(1.0, abs=1e-12)


def test_rank_one_success_matches_grover_formula():
    eps = 0.05
    d = rank_one_deliberation([eps * 0.9, eps * 0.1, 1 - eps], {1, 2}, 6)
    theta = math.asin(math.sqrt(eps))
    oracle = [math.sin((2 * m + 1) * theta) ** 2 for m in range(7)]
    assert np.allclose(d.success_probabilities(), oracle, atol=1e-12)


def test_rank_one_preserves_tail_ratio():
    d = rank_one_deliberation([0.045, 0.005, 0.95], {1, 2}, 5)
    rng = np.random.default_rng(8)
    acts = np.array([d.sample(rng).action for _ in range(10_000)])
    n1, n2 = np.sum(acts == 1), np.sum(acts == 2)
    assert n1 + n2 == 10_000
    assert abs(n1 / 10_000 - 0.9) <= 3 * math.sqrt(0.09 / 10_000)


def test_rank_one_m_zero_is_classical():
    pi = [0.03, 0.02, 0.95]
    rng = np.random.default_rng(9)
    q = np.array([rank_one_deliberate(pi, {1, 2}, 0, rng).attempts for _ in range(4000)])
    c = np.array([classical_rps_deliberate(pi, {1, 2}, rng).steps for _ in range(4000)])
    sd = math.sqrt(2 * 0.95 / 0.05**2 / 4000)
    assert abs(q.mean() - c.mean()) <= 3 * sd


def test_rank_one_empty_tail():
    with pytest.raises(EmptyTail):
        rank_one_deliberate([1.0, 0.0, 0.0], {2}, 3, np.random.default_rng(0))


def test_grover_agrees_with_rank_one_on_rank_one_chain():
    pi = np.array([0.045, 0.005, 0.95])
    g = grover_deliberation(rank_one_matrix(pi), {1, 2}, n=1)
    r = rank_one_deliberation(pi, {1, 2}, g.m_eps)
    assert np.allclose(g.clip_distributions(), r.clip_distributions(), atol=1e-10)
    rng = np.random.default_rng(10)
    acts = np.array([g.sample(rng).action for _ in range(10_000)])
    assert abs(np.mean(acts == 1) - 0.9) <= 3 * math.sqrt(0.09 / 10_000)


def test_grover_cost_counts_operator_calls():
    g = grover_deliberation(rank_one_matrix([0.25, 0.25, 0.5]), {1}, n=1)
    assert g.cost_of(0) == 1 and g.cost_of(2) == 1 + 2 * 8 * 3


def test_grover_reversible_chain_boosts_flagged_mass():
    P = reversible_chain(4, np.random.default_rng(12))
    g = grover_deliberation(P, {1}, n=4)
    succ = g.success_probabilities()
    assert succ[1] > succ[0]
    rng = np.random.default_rng(13)
    assert all(g.sample(rng).action == 1 for _ in range(50))
