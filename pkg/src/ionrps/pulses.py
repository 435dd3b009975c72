"""Trapped-ion pulse schedules and their unitary semantics.

Pulses are stored in time order: the first pulse of a sequence acts first,
so the composed unitary is ``U_L ... U_2 U_1``.

Two state spaces are supported:

* computational: ``k`` qubits (``2**k`` amplitudes), optionally with one
  extra "hidden" level adjoined at index ``2**k`` that stands for
  ``|g'g'>`` of two ions and is only addressed by the Moelmer-Soerensen
  pulse used inside ``D0``;
* multilevel (two ions): levels ``g, e, g', e'`` per ion tensored with a
  two-level vibrational mode, index ``(l_I * 4 + l_II) * 2 + v``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .quantum import (AngleTree, coherent_ctrl, controlization_angles, probability_unitary,
                      reflection_zero, uy)


class UnsupportedKindForDimension(ValueError):
    pass


class UnsupportedFlagSet(ValueError):
    pass


class KTooSmall(ValueError):
    pass


class VibrationalModeNotGround(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class PulseParseError(ValueError):
    pass


class PulseKind(str, Enum):
    COLLECTIVE_X = "collectiveX"
    SINGLE_Z = "singleZ"
    MS = "moelmerSoerensen"
    DETUNED_CZ = "detunedCZ"
    DETUNED_HIDE = "detunedHide"
    DETUNED_SWITCH = "detunedSwitch"


DETUNED = frozenset({PulseKind.DETUNED_CZ, PulseKind.DETUNED_HIDE, PulseKind.DETUNED_SWITCH})
ALL_KINDS = frozenset(PulseKind)

# elementary pulses per detuned Y-type rotation (X, Z, X in the detuned frame)
DETUNED_COST = 3


@dataclass(frozen=True)
class Pulse:
    """One laser pulse.

    ``target`` is ``"all"`` for collective pulses and an ion number such as
    ``"2"`` for single-ion Z and CZ pulses.  Hide/switch pulses use
    ``"<ion>:<g|e>"`` to pick the ground or excited branch of an ion.
    """

    kind: PulseKind
    target: str
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "kind", PulseKind(self.kind))
        if not math.isfinite(self.angle):
            raise ValueError(f"non-finite pulse angle {self.angle}")
        if self.kind in (PulseKind.COLLECTIVE_X, PulseKind.MS):
            if self.target != "all":
                raise ValueError(f"{self.kind.value} must target 'all'")
        elif self.kind in (PulseKind.DETUNED_HIDE, PulseKind.DETUNED_SWITCH):
            ion, _, branch = self.target.partition(":")
            if not ion.isdigit() or int(ion) < 1 or branch not in ("g", "e"):
                raise ValueError(f"bad detuned target {self.target!r}")
        elif not self.target.isdigit() or int(self.target) < 1:
            raise ValueError(f"bad ion index {self.target!r}")

    @property
    def ion(self) -> int:
        return int(self.target.partition(":")[0])

    @property
    def cost(self) -> int:
        return DETUNED_COST if self.kind in DETUNED else 1

    def with_angle(self, angle: float) -> "Pulse":
        return Pulse(self.kind, self.target, angle)


@dataclass(frozen=True)
class PulseSequence:
    pulses: tuple[Pulse, ...]
    k: int = 2

    def __len__(self) -> int:
        return len(self.pulses)

    def __iter__(self):
        return iter(self.pulses)

    def __add__(self, other: "PulseSequence") -> "PulseSequence":
        if other.k != self.k:
            raise DimensionMismatch(f"qubit counts differ: {self.k} vs {other.k}")
        return PulseSequence(self.pulses + other.pulses, self.k)

    @property
    def cost(self) -> int:
        """Elementary laser pulses, with detuned Y-type rotations counted as 3."""
        return sum(p.cost for p in self.pulses)

    @property
    def angles(self) -> np.ndarray:
        return np.array([p.angle for p in self.pulses])


def X(theta: float) -> Pulse:
    return Pulse(PulseKind.COLLECTIVE_X, "all", theta)


def Z(ion: int, theta: float) -> Pulse:
    return Pulse(PulseKind.SINGLE_Z, str(ion), theta)


def MS(theta: float) -> Pulse:
    return Pulse(PulseKind.MS, "all", theta)


# -- computational-space semantics ------------------------------------------------

def _rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def _on_qubit(op: np.ndarray, j: int, k: int) -> np.ndarray:
    out = np.eye(1)
    for q in range(1, k + 1):
        out = np.kron(out, op if q == j else np.eye(2))
    return out


def pulse_unitary(p: Pulse, k: int, hidden: bool = False) -> np.ndarray:
    """Unitary of one pulse on ``k`` qubits (plus the hidden level if asked)."""
    dim = 1 << k
    if p.kind is PulseKind.COLLECTIVE_X:
        r = _rx(p.angle)
        U = np.eye(1)
        for _ in range(k):
            U = np.kron(U, r)
    elif p.kind is PulseKind.SINGLE_Z:
        if p.ion > k:
            raise UnsupportedKindForDimension(f"ion {p.ion} on {k} qubits")
        U = _on_qubit(_rz(p.angle), p.ion, k)
    elif p.kind is PulseKind.MS:
        if not hidden or k != 2:
            raise UnsupportedKindForDimension("MS pulse needs the two-ion space with hidden level")
        out = np.eye(dim + 1, dtype=complex)
        r = uy(p.angle)
        idx = [0, dim]
        out[np.ix_(idx, idx)] = r
        return out
    else:
        raise UnsupportedKindForDimension(f"{p.kind.value} acts on the multilevel space only")
    if hidden:
        out = np.eye(dim + 1, dtype=complex)
        out[:dim, :dim] = U
        return out
    return U.astype(complex)


def sequence_unitary(seq: PulseSequence, hidden: bool = False) -> np.ndarray:
    dim = (1 << seq.k) + (1 if hidden else 0)
    U = np.eye(dim, dtype=complex)
    for p in seq:
        U = pulse_unitary(p, seq.k, hidden) @ U
    return U


def apply_sequence(state, seq: PulseSequence, hidden: bool | None = None):
    """Left-multiply pulse unitaries onto ``state`` in time order.

    The space is inferred from the state length: ``2**k`` (computational),
    ``2**k + 1`` (with hidden level) or 32 (two-ion multilevel).
    """
    state = np.asarray(state, dtype=complex)
    dim = 1 << seq.k
    if state.size == MULTILEVEL_DIM and seq.k == 2 and hidden is None:
        return multilevel_sequence_unitary(seq) @ state
    if hidden is None:
        hidden = state.size == dim + 1
    if state.size != dim + (1 if hidden else 0):
        raise DimensionMismatch(f"state of length {state.size} for a {seq.k}-qubit sequence")
    for p in seq:
        state = pulse_unitary(p, seq.k, hidden) @ state
    return state


# -- compilers --------------------------------------------------------------------

def compile_Y(theta: float, ion: int = 1, k: int = 1) -> PulseSequence:
    """``U_Y(theta)`` on one ion from collective X and a single-ion Z pulse."""
    return PulseSequence((X(math.pi / 2), Z(ion, theta), X(-math.pi / 2)), k)


def compile_hadamard(ion: int = 1, k: int = 1) -> PulseSequence:
    """``-i H`` exactly: ``U_Y(pi/2) U_Z(pi)`` with ``U_Z(pi) = -i Z``."""
    return PulseSequence((Z(ion, math.pi),) + compile_Y(math.pi / 2, ion, k).pulses, k)


def angles_from_pi(pi) -> tuple[float, float]:
    """Half-angles ``(theta1, theta2)`` of the three-clip probability unitary."""
    p1, p2 = float(pi[0]), float(pi[1])
    theta1 = math.acos(math.sqrt(min(1.0, max(0.0, p1 + p2))))
    theta2 = math.acos(math.sqrt(min(1.0, p1 / (p1 + p2)))) if p1 + p2 > 0 else 0.0
    return theta1, theta2


def compile_U(theta1: float, theta2: float, inverse: bool = False) -> PulseSequence:
    """Two-qubit ``U(theta1, theta2) = U_Y1(2 theta1) (x) U_Y2(2 theta2)`` in 4 pulses."""
    s = -1.0 if inverse else 1.0
    return PulseSequence((X(math.pi / 2), Z(1, s * 2 * theta1), Z(2, s * 2 * theta2),
                          X(-math.pi / 2)), 2)


def compile_reflect_zero() -> PulseSequence:
    """``D0``: hide ``|00>`` with MS, flip the rest with ``Z1(2 pi)``, restore."""
    return PulseSequence((MS(math.pi), Z(1, 2 * math.pi), MS(-math.pi)), 2)


def compile_reflect_flags(flags: Iterable[int]) -> PulseSequence:
    flags = frozenset(flags)
    if flags == {1, 2}:
        # +1 on |0x>, i.e. on clips c1, c2
        return PulseSequence((Z(1, math.pi),), 2)
    if flags == {3}:
        # same pulse; the reflection is fixed only up to sign
        return PulseSequence((Z(1, math.pi),), 2)
    raise UnsupportedFlagSet(f"flag set {sorted(flags)} has no single-pulse reflection")


def grover_block(theta1: float, theta2: float, flags: Iterable[int]) -> PulseSequence:
    """One ``U D0 U^dag ref(A)`` iteration: 1 + 4 + 3 + 4 = 12 pulses."""
    return (compile_reflect_flags(flags) + compile_U(theta1, theta2, inverse=True)
            + compile_reflect_zero() + compile_U(theta1, theta2))


def compile_rank_one_deliberation(theta1: float, theta2: float, flags: Iterable[int],
                                  m: int) -> PulseSequence:
    flags = frozenset(flags)
    seq = compile_U(theta1, theta2)
    if m > 0:
        block = grover_block(theta1, theta2, flags)
        seq = PulseSequence(seq.pulses + block.pulses * m, 2)
    else:
        compile_reflect_flags(flags)
    return seq


# two-qubit clip encoding: c1 = |00>, c2 = |01>, c3 = |10>, |11>
CLIP_OF_BASIS = np.array([0, 1, 2, 2])


def decode_clips(probs) -> np.ndarray:
    """Fold the four (or five, with hidden) basis probabilities onto clips.

    Population left on the hidden level is returned as a fourth entry.
    """
    probs = np.asarray(probs, dtype=float)
    out = np.zeros(4 if probs.size == 5 else 3)
    np.add.at(out, CLIP_OF_BASIS, probs[:4])
    if probs.size == 5:
        out[3] = probs[4]
    return out


def measurement_distribution(theta1: float, theta2: float) -> np.ndarray:
    """Clip probabilities of ``U(theta1, theta2)|00>`` via the pulse sequence."""
    psi = np.zeros(4, dtype=complex)
    psi[0] = 1.0
    psi = apply_sequence(psi, compile_U(theta1, theta2))
    return decode_clips(np.abs(psi) ** 2)


def ideal_rank_one_unitary(theta1: float, theta2: float) -> np.ndarray:
    return np.kron(uy(2 * theta1), uy(2 * theta2))


def ideal_rank_one_state(theta1: float, theta2: float, flags: Iterable[int], m: int) -> np.ndarray:
    """Matrix-level ``[U D0 U^dag ref(A)]^m U|00>`` for the three-clip encoding."""
    U = ideal_rank_one_unitary(theta1, theta2)
    flags = frozenset(flags)
    mask = np.isin(CLIP_OF_BASIS + 1, list(flags))
    ref = np.diag(np.where(mask, 1.0, -1.0))
    G = U @ reflection_zero(4) @ U.conj().T @ ref
    psi = U[:, 0].astype(complex)
    for _ in range(m):
        psi = G @ psi
    return psi


def pulse_count_formula(k: int) -> int:
    """Pulses for a ``k``-qubit probability unitary with shared collective X."""
    if k < 2:
        raise KTooSmall(k)
    return 7 * 2 ** (k + 2) - 24 * k - 29


# -- multilevel two-ion simulator -------------------------------------------------

LEVELS = {"g": 0, "e": 1, "g'": 2, "e'": 3}
MULTILEVEL_DIM = 4 * 4 * 2


def ml_index(level_I: str, level_II: str, vib: int) -> int:
    return (LEVELS[level_I] * 4 + LEVELS[level_II]) * 2 + vib


COMPUTATIONAL = np.array([ml_index(a, b, 0) for a in "ge" for b in "ge"])


def _subspace_y(pairs: Sequence[tuple[int, int]], theta: float) -> np.ndarray:
    """``U_Y(theta)`` acting on each (a, b) pair, identity elsewhere."""
    U = np.eye(MULTILEVEL_DIM, dtype=complex)
    r = uy(theta)
    for a, b in pairs:
        U[np.ix_([a, b], [a, b])] = r
    return U


def _per_ion_op(op: np.ndarray, ion: int) -> np.ndarray:
    """Embed a 2x2 op on ``{g, e}`` of one ion (identity on primed levels and vib)."""
    local = np.eye(4, dtype=complex)
    local[:2, :2] = op
    ops = [np.eye(4), np.eye(4)]
    ops[ion - 1] = local
    return np.kron(np.kron(ops[0], ops[1]), np.eye(2))


def _detuned_pairs(p: Pulse) -> list[tuple[int, int]]:
    if p.kind is PulseKind.DETUNED_CZ:
        if p.ion != 1:
            raise UnsupportedKindForDimension("CZ transfer is defined on the control ion")
        # |g>_I |0>_v <-> |e>_I |1>_v
        return [(ml_index("g", b, 0), ml_index("e", b, 1)) for b in LEVELS]
    ion, _, branch = p.target.partition(":")
    if ion != "2":
        raise UnsupportedKindForDimension("hide/switch pulses act on the target ion")
    primed = branch + "'"
    if p.kind is PulseKind.DETUNED_HIDE:
        # |x>_II |1>_v <-> |x'>_II |0>_v
        return [(ml_index(a, branch, 1), ml_index(a, primed, 0)) for a in LEVELS]
    # switch: |x>_II <-> |x'>_II, vibration untouched
    return [(ml_index(a, branch, v), ml_index(a, primed, v)) for a in LEVELS for v in (0, 1)]


def multilevel_pulse_unitary(p: Pulse) -> np.ndarray:
    if p.kind is PulseKind.COLLECTIVE_X:
        r = _rx(p.angle)
        return _per_ion_op(r, 1) @ _per_ion_op(r, 2)
    if p.kind is PulseKind.SINGLE_Z:
        return _per_ion_op(_rz(p.angle), p.ion)
    if p.kind in DETUNED:
        return _subspace_y(_detuned_pairs(p), p.angle)
    raise UnsupportedKindForDimension(f"{p.kind.value} on the multilevel space")


def multilevel_sequence_unitary(seq: PulseSequence) -> np.ndarray:
    """Compose a two-ion sequence on the multilevel space.

    Detuned pulses are specified in the frame of the collective X pulses
    applied so far: with ``F`` the accumulated collective rotation, a
    detuned rotation ``G`` acts as ``F G F^dag``.  This is what lets two
    shared X pulses bracket the whole controlization schedule.
    """
    if seq.k != 2:
        raise DimensionMismatch("multilevel simulation covers two ions only")
    U = np.eye(MULTILEVEL_DIM, dtype=complex)
    F = np.eye(MULTILEVEL_DIM, dtype=complex)
    for p in seq:
        G = multilevel_pulse_unitary(p)
        if p.kind is PulseKind.COLLECTIVE_X:
            F = G @ F
        elif p.kind in DETUNED:
            G = F @ G @ F.conj().T
        U = G @ U
    return U


def computational_block(U: np.ndarray) -> np.ndarray:
    return U[np.ix_(COMPUTATIONAL, COMPUTATIONAL)]


def _detuned(kind: PulseKind, target: str, angle: float) -> Pulse:
    return Pulse(kind, target, angle)


def _control_pulses(inner_g: Sequence[Pulse], inner_e: Sequence[Pulse]) -> list[Pulse]:
    """Control sandwich around the two inner sequences.

    Order: CZ, hide, ``inner_e``, switch, ``inner_g``, switch back, unhide,
    CZ back.  ``inner_e`` runs while the ``e`` branch is exposed.
    """
    pi = math.pi
    cz = lambda s: _detuned(PulseKind.DETUNED_CZ, "1", s * pi)
    hide = lambda b, s: _detuned(PulseKind.DETUNED_HIDE, f"2:{b}", s * pi)
    switch = lambda b, s: _detuned(PulseKind.DETUNED_SWITCH, f"2:{b}", s * pi)
    return ([cz(1), hide("g", 1), hide("e", 1)] + list(inner_e)
            + [switch("g", 1), switch("e", 1)] + list(inner_g)
            # a reversed second switch avoids an overall -1 on the block
            + [switch("g", -1), switch("e", -1)]
            + [hide("g", -1), hide("e", -1), cz(-1)])


@dataclass(frozen=True)
class ControlizationResult:
    unitary: np.ndarray  # on the full multilevel space
    sequence: PulseSequence
    state: np.ndarray | None = None

    @property
    def block(self) -> np.ndarray:
        return computational_block(self.unitary)


def controlization_protocol_2ion(theta2: float, theta3: float, state=None) -> ControlizationResult:
    """Coherently controlled ``U(theta2) (+) U(theta3)`` on two ions.

    Ion I controls, ion II is the target; ``U(theta2)`` acts when ion I is in
    ``|g>``.  If ``state`` (32 amplitudes) is given it must have the
    vibrational mode in its ground state and is propagated.
    """
    seq = PulseSequence(tuple(_control_pulses(compile_Y(theta2, 2, 2).pulses,
                                              compile_Y(theta3, 2, 2).pulses)), 2)
    U = multilevel_sequence_unitary(seq)
    out = None
    if state is not None:
        state = np.asarray(state, dtype=complex)
        if state.size != MULTILEVEL_DIM:
            raise DimensionMismatch(f"multilevel state needs {MULTILEVEL_DIM} amplitudes")
        if np.max(np.abs(state[1::2])) > 1e-12:
            raise VibrationalModeNotGround("vibrational mode must start in |0>_v")
        out = U @ state
    return ControlizationResult(U, seq, out)


def compile_probability_unitary_2ion(tree: AngleTree) -> PulseSequence:
    """Two-qubit probability unitary with the collective X pulses shared.

    ``X(pi/2) Z_I(t1) [control: Z_II(t3) | Z_II(t2)] X(-pi/2)``: 2 X pulses,
    3 Z pulses and 10 detuned rotations at 3 pulses each, 35 in total.
    """
    if tree.depth != 2:
        raise DimensionMismatch("two-ion compiler expects a depth-2 angle tree")
    t1, (t2, t3) = tree.levels[0][0], tree.levels[1]
    body = _control_pulses([Z(2, t2)], [Z(2, t3)])
    return PulseSequence(tuple([X(math.pi / 2), Z(1, t1)] + body + [X(-math.pi / 2)]), 2)


def probability_unitary_2ion(p) -> tuple[PulseSequence, np.ndarray]:
    """Compile ``p`` (length 4) and return the sequence with its computational block."""
    tree = controlization_angles(p)
    seq = compile_probability_unitary_2ion(tree)
    return seq, computational_block(multilevel_sequence_unitary(seq))


def ideal_ctrl(theta2: float, theta3: float) -> np.ndarray:
    return coherent_ctrl([uy(theta2), uy(theta3)])


def ideal_probability_unitary(tree: AngleTree) -> np.ndarray:
    return probability_unitary(tree)


# -- pulse file format --------------------------------------------------------------

def format_pulses(seq: PulseSequence) -> str:
    return "".join(f"{p.kind.value} {p.target} {p.angle:.17g}\n" for p in seq)


def parse_pulses(text: str, k: int = 2) -> PulseSequence:
    pulses = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise PulseParseError(f"line {n}: expected '<kind> <target> <angle>'")
        kind, target, angle = parts
        try:
            pulses.append(Pulse(PulseKind(kind), target, float(angle)))
        except ValueError as exc:
            raise PulseParseError(f"line {n}: {exc}") from None
    return PulseSequence(tuple(pulses), k)


def write_pulses(path: str | Path, seq: PulseSequence) -> None:
    Path(path).write_text(format_pulses(seq))


def read_pulses(path: str | Path, k: int = 2) -> PulseSequence:
    return parse_pulses(Path(path).read_text(), k)
