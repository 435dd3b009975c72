"""Invasion game: block an attacker whose signals announce its next move.

Percepts and actions are numbered 1..3 for (down, left, right).  The
attacker's permutation maps a signal to the move it will actually make;
the agent is rewarded when its action equals that move.  Each percept has
its own rank-one three-clip network (all clips are actions) whose
stationary distribution comes from the h-values of that percept.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .classical import classical_rps_deliberate
from .ecm import FlagSet, HValues, LearningParams, flag_update, learn_update
from .quantum import m_eps_for, rank_one_deliberate

MOVES = ("down", "left", "right")
ACTIONS = frozenset({1, 2, 3})
IDENTITY = (1, 2, 3)
CYCLE = (2, 3, 1)

Agent = Literal["classical-rps", "quantum-rps"]


@dataclass(frozen=True)
class GameState:
    """``permutation[s - 1]`` is the move announced by signal ``s``."""

    permutation: tuple[int, int, int] = IDENTITY
    signal_probs: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self):
        if sorted(self.permutation) != [1, 2, 3]:
            raise ValueError(f"{self.permutation} is not a permutation of the three moves")
        if abs(sum(self.signal_probs) - 1.0) > 1e-12 or min(self.signal_probs) < 0:
            raise ValueError("signal_probs must be a distribution")

    def signal(self, rng: np.random.Generator) -> int:
        return int(rng.choice(3, p=self.signal_probs)) + 1


def env_round(state: GameState, action: int, signaled: int) -> int:
    if action not in ACTIONS or signaled not in ACTIONS:
        raise ValueError(f"invalid action {action} or percept {signaled}")
    return int(action == state.permutation[signaled - 1])


@dataclass(frozen=True)
class RoundRecord:
    round: int
    signal: int
    action: int
    reward: int
    n_u: int
    epsilon: float
    flags: int  # bitmask of flagged actions at round start


@dataclass
class SessionHistory:
    agent: str
    records: list[RoundRecord] = field(default_factory=list)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([r.reward for r in self.records])

    @property
    def n_u(self) -> np.ndarray:
        return np.array([r.n_u for r in self.records])

    def block_rate(self, start: int = 0, stop: int | None = None) -> float:
        r = self.rewards[start:stop]
        return float(r.mean()) if r.size else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "signal", "action", "reward", "n_u", "epsilon", "flags"])
        for r in self.records:
            w.writerow([r.round, r.signal, r.action, r.reward, r.n_u, repr(float(r.epsilon)), r.flags])
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())


def biased_h(permutation: tuple[int, int, int], bias: float, floor: float = 1.0) -> HValues:
    """h-values giving mass ``bias`` to each percept's rewarded action."""
    if not 1 / 3 <= bias < 1:
        raise ValueError("bias must lie in [1/3, 1)")
    rest = floor
    top = 2 * rest * bias / (1 - bias)
    h = np.full((3, 3), rest)
    for s, move in enumerate(permutation):
        h[s, move - 1] = top
    return HValues(h, floor)


def deliberate(agent: Agent, pi: np.ndarray, flags: FlagSet, rng: np.random.Generator):
    if agent == "classical-rps":
        return classical_rps_deliberate(pi, flags, rng)
    if agent == "quantum-rps":
        eps = float(sum(pi[a - 1] for a in flags))
        return rank_one_deliberate(pi, flags, m_eps_for(eps), rng)
    raise ValueError(f"unknown agent {agent!r}")


def run_session(agent: Agent, rounds: int, switch_at: int | None, rng: np.random.Generator,
                params: LearningParams = LearningParams(), state: GameState = GameState(),
                switched: tuple[int, int, int] = CYCLE, h: HValues | None = None) -> SessionHistory:
    """Play ``rounds`` rounds; from round ``switch_at`` on the attacker uses ``switched``."""
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    h = h if h is not None else HValues.uniform(3, 3)
    flags = {s: FlagSet.all_flagged(ACTIONS) for s in ACTIONS}
    hist = SessionHistory(agent)
    for t in range(rounds):
        if switch_at is not None and t == switch_at:
            state = GameState(switched, state.signal_probs)
        s = state.signal(rng)
        pi = h.probabilities(s)
        f = flags[s]
        eps = float(sum(pi[a - 1] for a in f))
        out = deliberate(agent, pi, f, rng)
        reward = env_round(state, out.action, s)
        hist.records.append(RoundRecord(t, s, out.action, reward, out.steps, eps, f.bitmask()))
        h = learn_update(h, s, out.action, reward, params)
        flags[s] = flag_update(f, out.action, bool(reward))
    return hist
