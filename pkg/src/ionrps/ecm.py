"""Episodic-compositional memory: clips, stochastic matrices, flags, h-values.

Convention used throughout the package: a transition matrix ``P`` is
column-stochastic, ``P[i, j]`` is the probability of hopping from clip ``j``
(source, column) to clip ``i`` (destination, row).  Clip ids are 1-based.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

STOCHASTIC_TOL = 1e-12


class NetworkError(ValueError):
    """Raised by :func:`validate_network`; ``errors`` lists every problem found."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ZeroStationaryEntry(ValueError):
    def __init__(self, i: int):
        self.index = i
        super().__init__(f"stationary distribution vanishes at clip {i}")


class NotAnAction(ValueError):
    pass


class UnknownPerceptOrAction(KeyError):
    pass


class NetworkParseError(ValueError):
    pass


class ClipKind(str, Enum):
    PERCEPT = "percept"
    ACTION = "action"
    INTERNAL = "internal"


@dataclass(frozen=True)
class Clip:
    id: int
    kind: ClipKind
    label: str = ""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ClipNetwork:
    """A validated clip network; build it through :func:`validate_network`."""

    P: np.ndarray
    clips: tuple[Clip, ...]

    @property
    def size(self) -> int:
        return len(self.clips)

    @property
    def action_ids(self) -> frozenset[int]:
        return frozenset(c.id for c in self.clips if c.kind is ClipKind.ACTION)

    def is_action(self, clip_id: int) -> bool:
        return self.clips[clip_id - 1].kind is ClipKind.ACTION


def column_sum_errors(P: np.ndarray, tol: float = STOCHASTIC_TOL) -> list[str]:
    errors = []
    if np.any(P < 0) or np.any(P > 1):
        bad = np.argwhere((P < 0) | (P > 1))[0]
        errors.append(f"EntryOutOfRange({bad[0] + 1}, {bad[1] + 1})")
    sums = P.sum(axis=0)
    for j, s in enumerate(sums):
        if abs(s - 1.0) > tol:
            errors.append(f"NonStochasticColumn({j + 1}, {s:.12g})")
    return errors


def validate_network(P, clips: Sequence[Clip]) -> ClipNetwork:
    """Check ``P`` against the clip list and return an immutable network.

    All problems are collected before raising, so a single
    :class:`NetworkError` reports every failed check.
    """
    P = np.asarray(P, dtype=float)
    errors: list[str] = []
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        errors.append(f"DimensionMismatch(matrix shape {P.shape} is not square)")
    elif P.shape[0] != len(clips):
        errors.append(f"DimensionMismatch({P.shape[0]} rows, {len(clips)} clips)")
    else:
        errors.extend(column_sum_errors(P))
    ids = [c.id for c in clips]
    if ids != list(range(1, len(clips) + 1)):
        errors.append("ClipIdsNotContiguous")
    if not any(c.kind is ClipKind.ACTION for c in clips):
        errors.append("NoActionClips")
    if errors:
        raise NetworkError(errors)
    return ClipNetwork(_frozen(P), tuple(clips))


def renormalize_columns(P) -> np.ndarray:
    """Explicit repair helper; never applied implicitly by validation."""
    P = np.clip(np.asarray(P, dtype=float), 0.0, None)
    return P / P.sum(axis=0, keepdims=True)


def time_reversed(P, pi) -> np.ndarray:
    """Time-reversed chain ``P*[i, j] = P[j, i] * pi[i] / pi[j]``."""
    P = np.asarray(P, dtype=float)
    pi = np.asarray(pi, dtype=float)
    zero = np.flatnonzero(pi <= 0)
    if zero.size:
        raise ZeroStationaryEntry(int(zero[0]) + 1)
    return P.T * pi[:, None] / pi[None, :]


def is_reversible(P, pi, tol: float = 1e-10) -> bool:
    flux = np.asarray(P) * np.asarray(pi)[None, :]
    return bool(np.max(np.abs(flux - flux.T)) <= tol)


# -- flags ------------------------------------------------------------------

@dataclass(frozen=True)
class FlagSet:
    flagged: frozenset[int]
    actions: frozenset[int]

    def __post_init__(self):
        if not self.flagged <= self.actions:
            raise NotAnAction(f"flags {sorted(self.flagged - self.actions)} are not actions")
        if not self.flagged:
            raise ValueError("flag set may not be empty")

    @classmethod
    def all_flagged(cls, actions: Iterable[int]) -> "FlagSet":
        acts = frozenset(actions)
        return cls(acts, acts)

    def __contains__(self, clip_id: int) -> bool:
        return clip_id in self.flagged

    def __iter__(self):
        return iter(sorted(self.flagged))

    def __len__(self) -> int:
        return len(self.flagged)

    def bitmask(self) -> int:
        return sum(1 << (a - 1) for a in self.flagged)


def flag_update(flags: FlagSet, chosen: int, rewarded: bool) -> FlagSet:
    """Drop the flag of an unrewarded action; re-flag everything if none remain."""
    if chosen not in flags.actions:
        raise NotAnAction(chosen)
    if rewarded:
        return flags
    remaining = flags.flagged - {chosen}
    if not remaining:
        return FlagSet.all_flagged(flags.actions)
    return FlagSet(remaining, flags.actions)


# -- h-values -----------------------------------------------------------------

@dataclass(frozen=True)
class LearningParams:
    learning_rate: float = 1.0  # lambda
    forgetting: float = 0.0  # gamma; kept as a hook, default off


@dataclass(frozen=True)
class HValues:
    """Per-(percept, action) weights of a two-layered network.

    Rows are percepts, columns actions, both 1-based in the public API.
    """

    h: np.ndarray
    floor: float = 1.0

    def __post_init__(self):
        h = _frozen(self.h)
        if h.ndim != 2:
            raise ValueError("h must be a (percepts x actions) array")
        if np.any(h < self.floor):
            raise ValueError("h-values below floor")
        object.__setattr__(self, "h", h)

    @classmethod
    def uniform(cls, n_percepts: int, n_actions: int, floor: float = 1.0) -> "HValues":
        return cls(np.full((n_percepts, n_actions), floor), floor)

    def probabilities(self, percept: int) -> np.ndarray:
        row = self.h[percept - 1]
        return row / row.sum()


def learn_update(h: HValues, percept: int, action: int, reward: float,
                 params: LearningParams = LearningParams()) -> HValues:
    if reward < 0:
        raise ValueError("reward must be non-negative")
    n_p, n_a = h.h.shape
    if not (1 <= percept <= n_p and 1 <= action <= n_a):
        raise UnknownPerceptOrAction((percept, action))
    new = np.array(h.h)
    cur = new[percept - 1, action - 1]
    cur = cur + params.learning_rate * reward - params.forgetting * (cur - h.floor)
    new[percept - 1, action - 1] = max(h.floor, cur)
    return HValues(new, h.floor)


def rank_one_matrix(pi) -> np.ndarray:
    """Two-layered (rank-one) chain: every column equals ``pi``."""
    pi = np.asarray(pi, dtype=float)
    return np.tile(pi[:, None], (1, pi.size))


# -- file format --------------------------------------------------------------

def parse_network(text: str) -> ClipNetwork:
    """Parse the plain-text network format.

    Line 1 holds ``N``, the next ``N`` lines hold the matrix rows, the final
    line lists action-clip ids.  Non-action clips are read as percepts.
    """
    lines = [ln.strip() for ln in text.strip().splitlines()]
    if not lines:
        raise NetworkParseError("empty network file")
    try:
        n = int(lines[0])
    except ValueError:
        raise NetworkParseError(f"line 1: expected clip count, got {lines[0]!r}") from None
    if n < 1:
        raise NetworkParseError("line 1: clip count must be positive")
    if len(lines) != n + 2:
        raise NetworkParseError(f"expected {n + 2} lines, found {len(lines)}")
    rows = []
    for k in range(n):
        parts = lines[1 + k].split()
        if len(parts) != n:
            raise NetworkParseError(f"line {k + 2}: expected {n} entries, found {len(parts)}")
        try:
            rows.append([float(x) for x in parts])
        except ValueError:
            raise NetworkParseError(f"line {k + 2}: non-numeric entry") from None
    try:
        actions = {int(x) for x in lines[n + 1].split()}
    except ValueError:
        raise NetworkParseError(f"line {n + 2}: action ids must be integers") from None
    if not actions or not actions <= set(range(1, n + 1)):
        raise NetworkParseError(f"line {n + 2}: action ids out of range")
    clips = [Clip(i, ClipKind.ACTION if i in actions else ClipKind.PERCEPT, f"c{i}")
             for i in range(1, n + 1)]
    return validate_network(np.array(rows), clips)


def load_network(path: str | Path) -> ClipNetwork:
    return parse_network(Path(path).read_text())


def format_network(net: ClipNetwork) -> str:
    out = [str(net.size)]
    out += [" ".join(f"{x:.17g}" for x in row) for row in net.P]
    out.append(" ".join(str(a) for a in sorted(net.action_ids)))
    return "\n".join(out) + "\n"
