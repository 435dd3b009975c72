"""Noise-free matrix-level quantum layer.

Probability unitaries come from nested coherent control of Y rotations.
On top sit the Szegedy walk over two clip registers with its approximate
reflection operator (ARO), plus the Grover-like deliberation loop that has
a rank-one fast path.

Register layout: the first register is the most significant factor of every
Kronecker product (``|a>_Aux |i>_I |j>_II`` has index ``(a*D + i)*D + j``).
Qubit 1 is the most significant bit of a register index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .classical import EmptyTail, WalkOutcome, spectral_gap, stationary_distribution
from .ecm import is_reversible

UNITARY_TOL = 1e-10


class LengthNotPowerOfTwo(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class NotReversible(ValueError):
    pass


class EmptyTargets(ValueError):
    pass


# -- small helpers --------------------------------------------------------------

def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def n_qubits(dim: int) -> int:
    if not is_power_of_two(dim):
        raise LengthNotPowerOfTwo(dim)
    return dim.bit_length() - 1


def is_unitary(U: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    U = np.asarray(U)
    return bool(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) <= tol)


def phase_aligned(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Return ``A`` multiplied by the global phase that best matches ``B``.

    The phase maximizes ``|tr(A^dag B)|``.
    """
    overlap = np.vdot(A, B)
    if abs(overlap) == 0:
        return A
    return A * (overlap / abs(overlap))


def equal_up_to_phase(A, B, tol: float = 1e-10) -> bool:
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape != B.shape:
        return False
    return bool(np.max(np.abs(phase_aligned(A, B) - B)) <= tol)


def uy(theta: float) -> np.ndarray:
    """Single-qubit ``exp(-i theta Y / 2)``."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def reflection_zero(dim: int) -> np.ndarray:
    """``D0 = 2|0><0| - 1``."""
    d = -np.eye(dim, dtype=complex)
    d[0, 0] = 1.0
    return d


def swap_registers(dim: int) -> np.ndarray:
    """Permutation ``|i>|j> -> |j>|i>`` on two registers of size ``dim``."""
    S = np.zeros((dim * dim, dim * dim), dtype=complex)
    i, j = np.divmod(np.arange(dim * dim), dim)
    S[j * dim + i, i * dim + j] = 1.0
    return S


# -- angle trees ------------------------------------------------------------------

@dataclass(frozen=True)
class AngleTree:
    """Controlization angles stored level by level.

    ``levels[l]`` holds the ``2**l`` angles acting on qubit ``l + 1``; in heap
    numbering node ``j`` (1-based) has children ``2j`` and ``2j + 1``.
    """

    levels: tuple[tuple[float, ...], ...]

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def angles(self) -> tuple[float, ...]:
        return tuple(a for level in self.levels for a in level)

    def angle(self, node: int) -> float:
        level = node.bit_length() - 1
        return self.levels[level][node - (1 << level)]

    @classmethod
    def from_angles(cls, angles: Sequence[float]) -> "AngleTree":
        n = len(angles) + 1
        k = n_qubits(n)
        return cls(tuple(tuple(angles[(1 << l) - 1:(1 << (l + 1)) - 1]) for l in range(k)))


def controlization_angles(p) -> AngleTree:
    p = np.asarray(p, dtype=float)
    k = n_qubits(p.size)
    levels = []
    masses = p
    # build bottom-up: masses at level l are sums over 2**(k-l) leaves
    sums = [p]
    for _ in range(k):
        masses = masses.reshape(-1, 2).sum(axis=1)
        sums.append(masses)
    sums.reverse()  # sums[l] has 2**l entries
    for l in range(k):
        parent = sums[l]
        left = sums[l + 1][0::2]
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(parent > 0, left / np.where(parent > 0, parent, 1.0), 1.0)
        theta = 2.0 * np.arccos(np.sqrt(np.clip(ratio, 0.0, 1.0)))
        levels.append(tuple(float(t) for t in theta))
    return AngleTree(tuple(levels))


def tree_distribution(tree: AngleTree) -> np.ndarray:
    """Leaf probabilities encoded by ``tree`` (products of cos^2/sin^2)."""
    probs = np.ones(1)
    for level in tree.levels:
        th = np.asarray(level)
        c2, s2 = np.cos(th / 2) ** 2, np.sin(th / 2) ** 2
        probs = np.stack([probs * c2, probs * s2], axis=1).ravel()
    return probs


def coherent_ctrl(branches: Sequence[np.ndarray]) -> np.ndarray:
    """Block-diagonal ``sum_j |j><j| (x) U_j``."""
    if not branches:
        raise DimensionMismatch("no branches")
    dims = {np.shape(b) for b in branches}
    if len(dims) != 1:
        raise DimensionMismatch(f"branch shapes differ: {sorted(dims)}")
    if not is_power_of_two(len(branches)):
        raise DimensionMismatch(f"{len(branches)} branches is not a power of two")
    d = branches[0].shape[0]
    out = np.zeros((d * len(branches),) * 2, dtype=complex)
    for j, b in enumerate(branches):
        out[j * d:(j + 1) * d, j * d:(j + 1) * d] = b
    return out


def probability_unitary(tree: AngleTree) -> np.ndarray:
    """Nested controlization: ``ctrl(U_left, U_right) (U(theta_root) (x) 1)``."""

    def build(node: int, qubits: int) -> np.ndarray:
        rot = uy(tree.angle(node))
        if qubits == 1:
            return rot
        rest = 1 << (qubits - 1)
        ctrl = coherent_ctrl([build(2 * node, qubits - 1), build(2 * node + 1, qubits - 1)])
        return ctrl @ np.kron(rot, np.eye(rest))

    return build(1, tree.depth)


# -- clip padding ---------------------------------------------------------------

@dataclass(frozen=True)
class ClipEncoding:
    """Map between clip ids (1-based) and basis indices of a padded register."""

    n_clips: int
    dim: int

    @classmethod
    def for_clips(cls, n_clips: int) -> "ClipEncoding":
        dim = 1 << max(1, math.ceil(math.log2(n_clips))) if n_clips > 1 else 2
        return cls(n_clips, dim)

    @property
    def duplicates(self) -> int:
        return self.dim - self.n_clips + 1

    def basis_of(self, clip: int) -> list[int]:
        if clip < self.n_clips:
            return [clip - 1]
        return list(range(self.n_clips - 1, self.dim))

    def clip_of(self, index: int) -> int:
        return min(index, self.n_clips - 1) + 1

    def basis_mask(self, clips: Iterable[int]) -> np.ndarray:
        mask = np.zeros(self.dim, dtype=bool)
        for c in clips:
            mask[self.basis_of(c)] = True
        return mask

    def pad_distribution(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        out = np.empty(self.dim)
        out[: self.n_clips - 1] = p[:-1]
        out[self.n_clips - 1:] = p[-1] / self.duplicates
        return out

    def pad_chain(self, P) -> np.ndarray:
        """Duplicate the last clip; inflow to it is split evenly."""
        P = np.asarray(P, dtype=float)
        E = np.zeros((self.dim, self.n_clips))
        for c in range(1, self.n_clips + 1):
            E[self.basis_of(c), c - 1] = 1.0 / len(self.basis_of(c))
        src = [self.clip_of(i) - 1 for i in range(self.dim)]
        return (E @ P)[:, src]

    def fold(self, probs) -> np.ndarray:
        """Sum basis probabilities back onto clips."""
        probs = np.asarray(probs)
        out = np.zeros(self.n_clips)
        np.add.at(out, [self.clip_of(i) - 1 for i in range(self.dim)], probs)
        return out


# -- Szegedy walk ---------------------------------------------------------------

def column_unitaries(P) -> list[np.ndarray]:
    P = np.asarray(P, dtype=float)
    return [probability_unitary(controlization_angles(P[:, i])) for i in range(P.shape[1])]


def diffusion_unitary(P) -> np.ndarray:
    """``U_P |i>|0> = |i> U_i |0>``: register I controls the column unitaries."""
    return coherent_ctrl(column_unitaries(P))


@dataclass(frozen=True)
class WalkParts:
    U_P: np.ndarray
    V_P: np.ndarray
    ref_A: np.ndarray
    ref_B: np.ndarray

    @property
    def W(self) -> np.ndarray:
        return self.ref_B @ self.ref_A


def walk_parts(P, P_star=None, tol: float = 1e-10) -> WalkParts:
    """Diffusion unitaries and reflections for a chain on ``2**k`` clips.

    ``V_P`` is the register swap of ``U_P`` for reversible chains, or built
    from the explicitly supplied time-reversed chain ``P_star`` otherwise.
    """
    P = np.asarray(P, dtype=float)
    dim = P.shape[0]
    n_qubits(dim)
    S = swap_registers(dim)
    U_P = diffusion_unitary(P)
    if P_star is None:
        if not is_reversible(P, stationary_distribution(P), tol):
            raise NotReversible("chain violates detailed balance; supply the time-reversed chain")
        V_P = S @ U_P @ S
    else:
        V_P = S @ diffusion_unitary(P_star) @ S
    eye = np.eye(dim)
    ref_A = U_P @ np.kron(eye, reflection_zero(dim)) @ U_P.conj().T
    ref_B = V_P @ np.kron(reflection_zero(dim), eye) @ V_P.conj().T
    return WalkParts(U_P, V_P, ref_A, ref_B)


def build_walk_operator(P, P_star=None) -> np.ndarray:
    """``W(P) = ref(B) ref(A)`` on registers I (x) II."""
    return walk_parts(P, P_star).W


def stationary_state(P) -> np.ndarray:
    """``sum_i sqrt(pi_i) |c_i> U_i|0>``, the +1 eigenvector of ``W(P)``."""
    P = np.asarray(P, dtype=float)
    pi = stationary_distribution(P)
    dim = P.shape[0]
    zero = np.zeros(dim)
    zero[0] = 1.0
    return diffusion_unitary(P) @ np.kron(np.sqrt(pi), zero).astype(complex)


def default_ancillas(delta: float) -> int:
    return max(1, math.ceil(math.log2(1.0 / math.sqrt(delta)))) if delta < 1 else 1


def _phase_detection_rows(W: np.ndarray, n: int) -> list[np.ndarray]:
    """``K_b = (<0|_Aux (x) 1) PD(W) (|b>_Aux (x) 1)`` for every ancilla word ``b``.

    With ``PD = (H (x) 1) (sum_a |a><a| (x) W^a) (H (x) 1)`` the blocks are
    ``2^-(n+1) sum_a (-1)^{a.b} W^a``.
    """
    M = 1 << (n + 1)
    D = W.shape[0]
    powers = np.empty((M, D, D), dtype=complex)
    powers[0] = np.eye(D)
    for a in range(1, M):
        powers[a] = powers[a - 1] @ W
    signs = np.array([[(-1) ** bin(a & b).count("1") for a in range(M)] for b in range(M)], dtype=float)
    rows = np.einsum("ba,aij->bij", signs, powers) / M
    return list(rows)


def aro(W: np.ndarray, n: int) -> np.ndarray:
    """Approximate reflection ``PD(W)^dag (D0_Aux (x) 1) PD(W)`` with ``n + 1`` ancillas.

    Ancilla ``m`` controls ``W^(2^m)``.  Returned on ``Aux (x) system`` with
    the ancilla word as the most significant index.
    """
    if n < 0:
        raise ValueError("ancilla count must be non-negative")
    W = np.asarray(W, dtype=complex)
    K = np.hstack(_phase_detection_rows(W, n))
    return 2.0 * K.conj().T @ K - np.eye(K.shape[1])


def aro_zero_block(W: np.ndarray, n: int) -> np.ndarray:
    """Ancilla-zero block of :func:`aro`, without building the full operator."""
    K0 = _phase_detection_rows(np.asarray(W, dtype=complex), n)[0]
    return 2.0 * K0.conj().T @ K0 - np.eye(W.shape[0])


def ideal_reflection(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    return 2.0 * np.outer(state, state.conj()) - np.eye(state.size)


def ref_actions(dim: int, targets: Iterable[int], encoding: ClipEncoding | None = None) -> np.ndarray:
    """Diagonal reflection: +1 on target clips (all their encodings), -1 elsewhere."""
    targets = list(targets)
    if not targets:
        raise EmptyTargets("no target clips")
    enc = encoding or ClipEncoding(dim, dim)
    return np.diag(np.where(enc.basis_mask(targets), 1.0, -1.0)).astype(complex)


def m_eps_for(eps: float) -> int:
    """Maximal Grover iteration count ``ceil(1/sqrt(eps))``."""
    return math.ceil(1.0 / math.sqrt(eps) - 1e-12)


def _sample_until_flagged(dists: np.ndarray, flagged: np.ndarray, cost_per_m, rng,
                          encoding: ClipEncoding, m_forced: int | None, attempt_limit: int):
    m_eps = dists.shape[0] - 1
    cost = 0
    for attempt in range(1, attempt_limit + 1):
        m = m_forced if m_forced is not None else int(rng.integers(0, m_eps + 1))
        cost += cost_per_m(m)
        p = dists[m]
        cdf = np.cumsum(p)
        idx = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), p.size - 1)
        if flagged[idx]:
            return WalkOutcome(encoding.clip_of(idx), cost, attempt)
    raise RuntimeError(f"no flagged action after {attempt_limit} attempts")


def rank_one_distributions(U: np.ndarray, flagged: np.ndarray, m_max: int) -> np.ndarray:
    """Basis distributions of ``[U D0 U^dag ref(A)]^m U|0>`` for ``m = 0..m_max``."""
    dim = U.shape[0]
    R = U @ reflection_zero(dim) @ U.conj().T
    G = R @ np.diag(np.where(flagged, 1.0, -1.0))
    psi = U[:, 0].astype(complex)
    out = np.empty((m_max + 1, dim))
    for m in range(m_max + 1):
        out[m] = np.abs(psi) ** 2
        psi = G @ psi
    return out


class Deliberation:
    """Precomputed measurement distributions for ``m = 0..m_max`` Grover steps.

    ``dists[m]`` is the basis distribution on register I after ``m`` steps;
    ``cost_of(m)`` is the operator-call cost of one attempt with ``m`` steps.
    """

    def __init__(self, dists: np.ndarray, mask: np.ndarray, encoding: ClipEncoding, per_step: int,
                 base: int = 1):
        self.dists = dists
        self.mask = mask
        self.encoding = encoding
        self.per_step = per_step
        self.base = base

    @property
    def m_eps(self) -> int:
        return self.dists.shape[0] - 1

    def cost_of(self, m: int) -> int:
        return self.base + self.per_step * m

    def clip_distributions(self) -> np.ndarray:
        return np.array([self.encoding.fold(d) for d in self.dists])

    def success_probabilities(self) -> np.ndarray:
        return self.dists[:, self.mask].sum(axis=1)

    def sample(self, rng: np.random.Generator, m_forced: int | None = None,
               attempt_limit: int = 10**6) -> WalkOutcome:
        dists = self.dists
        if m_forced is not None and m_forced > self.m_eps:
            raise ValueError(f"m_forced={m_forced} beyond precomputed m_max={self.m_eps}")
        return _sample_until_flagged(dists, self.mask, self.cost_of, rng, self.encoding,
                                     m_forced, attempt_limit)


def rank_one_deliberation(pi, flags: Iterable[int], m_max: int) -> Deliberation:
    pi = np.asarray(pi, dtype=float)
    flags = list(flags)
    if sum(pi[f - 1] for f in flags) <= 0:
        raise EmptyTail("flagged actions carry no stationary mass")
    enc = ClipEncoding.for_clips(pi.size)
    U = probability_unitary(controlization_angles(enc.pad_distribution(pi)))
    mask = enc.basis_mask(flags)
    return Deliberation(rank_one_distributions(U, mask, m_max), mask, enc, per_step=2)


def rank_one_deliberate(pi, flags: Iterable[int], m_eps: int, rng: np.random.Generator,
                        m_forced: int | None = None, attempt_limit: int = 10**6) -> WalkOutcome:
    """Rank-one quantum RPS deliberation on a single register.

    Each attempt draws ``m`` uniformly from ``0..m_eps``, applies ``m``
    Grover-like steps to ``U|0>`` and measures; the returned ``steps`` is
    ``N_U``, counting ``2m + 1`` calls of ``U`` or ``U^dag`` per attempt.
    """
    top = m_eps if m_forced is None else max(m_eps, m_forced)
    d = rank_one_deliberation(pi, flags, top)
    if m_forced is None and top != m_eps:
        d.dists = d.dists[: m_eps + 1]
    return d.sample(rng, m_forced, attempt_limit)


def grover_deliberation(P, flags: Iterable[int], n: int | None = None, P_star=None) -> Deliberation:
    """Precompute the general-chain deliberation (see ``grover_deliberate``)."""
    P = np.asarray(P, dtype=float)
    flags = list(flags)
    enc = ClipEncoding.for_clips(P.shape[0]) if not is_power_of_two(P.shape[0]) \
        else ClipEncoding(P.shape[0], P.shape[0])
    pi = stationary_distribution(P)
    eps = float(sum(pi[f - 1] for f in flags))
    if eps <= 0:
        raise EmptyTail("flagged actions carry no stationary mass")
    Pp = enc.pad_chain(P) if enc.dim != P.shape[0] else P
    Ps = None
    if P_star is not None:
        Ps = enc.pad_chain(P_star) if enc.dim != P.shape[0] else np.asarray(P_star, dtype=float)
    if n is None:
        n = default_ancillas(spectral_gap(Pp))
    D = enc.dim
    W = build_walk_operator(Pp, Ps)
    A = aro(W, n)
    aux = 1 << (n + 1)
    start = np.zeros(aux * D * D, dtype=complex)
    start[: D * D] = stationary_state(Pp)
    mask = enc.basis_mask(flags)
    ref = np.kron(np.eye(aux), np.kron(np.diag(np.where(mask, 1.0, -1.0)), np.eye(D)))
    G = A @ ref
    m_eps = m_eps_for(eps)
    dists = np.empty((m_eps + 1, D))
    psi = start
    for m in range(m_eps + 1):
        probs = (np.abs(psi.reshape(aux, D, D)) ** 2).sum(axis=(0, 2))
        dists[m] = probs / probs.sum()
        psi = G @ psi
    return Deliberation(dists, mask, enc, per_step=8 * ((1 << (n + 1)) - 1))


def grover_deliberate(P, flags: Iterable[int], n: int | None, rng: np.random.Generator,
                      P_star=None, attempt_limit: int = 10**6) -> WalkOutcome:
    """Quantum RPS deliberation on a general reversible chain.

    Starting from ``|pi'>`` with all ancillas in ``|0>``, the action
    reflection on register I alternates with the ARO ``m`` times (``m``
    uniform on ``0..ceil(1/sqrt(eps))``) before register I is measured.  The returned count is
    the number of ``U_P``/``V_P`` calls (or inverses): one for preparation and
    ``8 (2^(n+1) - 1)`` per Grover step (two phase detections, each calling
    ``W`` ``2^(n+1) - 1`` times at four diffusion calls per ``W``).
    For repeated sampling build the ``grover_deliberation`` once instead.
    """
    return grover_deliberation(P, flags, n, P_star).sample(rng, None, attempt_limit)
