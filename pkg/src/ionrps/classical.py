"""Classical walks over clip networks: standard PS and reflecting PS."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .ecm import ClipNetwork

STEP_LIMIT = 10**6


class NotConverged(RuntimeError):
    pass


class NotErgodic(ValueError):
    pass


class EmptyTail(ValueError):
    pass


class StepLimitExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class WalkOutcome:
    action: int
    steps: int
    attempts: int = 1


def stationary_distribution(P, tol: float = 1e-12, max_iters: int = 10**6) -> np.ndarray:
    """Power iteration from the uniform vector until ``|P pi - pi|_1 <= tol``."""
    P = np.asarray(P, dtype=float)
    pi = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_iters):
        nxt = P @ pi
        nxt /= nxt.sum()
        if np.abs(P @ nxt - nxt).sum() <= tol:
            return nxt
        pi = nxt
    moduli = np.sort(np.abs(np.linalg.eigvals(P)))[::-1]
    detail = ""
    if moduli.size > 1 and moduli[0] - moduli[1] <= max(tol, 1e-9):
        detail = f"; dominant eigenvalues tie (|l1|={moduli[0]:.12g}, |l2|={moduli[1]:.12g})"
    raise NotConverged(f"power iteration did not converge in {max_iters} iterations{detail}")


def is_rank_one(P, tol: float = 1e-12) -> bool:
    P = np.asarray(P, dtype=float)
    return bool(np.max(np.abs(P - P[:, :1])) <= tol)


def spectral_gap(P, tol: float = 1e-10) -> float:
    """``1 - |lambda_2|``; exactly 1.0 for rank-one chains."""
    P = np.asarray(P, dtype=float)
    if P.shape[0] == 1 or is_rank_one(P):
        return 1.0
    moduli = np.sort(np.abs(np.linalg.eigvals(P)))[::-1]
    gap = 1.0 - moduli[1]
    if gap <= tol:
        raise NotErgodic(f"second eigenvalue modulus {moduli[1]:.12g} is 1 within tolerance")
    return float(gap)


def tailed_distribution(pi, targets: Iterable[int]) -> np.ndarray:
    """Restrict ``pi`` to the (1-based) ``targets`` and renormalize."""
    pi = np.asarray(pi, dtype=float)
    idx = np.array(sorted({t - 1 for t in targets}), dtype=int)
    out = np.zeros_like(pi)
    mass = pi[idx].sum() if idx.size else 0.0
    if mass <= 0:
        raise EmptyTail("target clips carry no stationary mass")
    out[idx] = pi[idx] / mass
    return out


def sample_index(p: np.ndarray, u: float) -> int:
    """Inverse-CDF draw of a 0-based index with a single uniform ``u``."""
    cdf = np.cumsum(p)
    k = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(k, p.size - 1)


def standard_ps_deliberate(network: ClipNetwork, start: int, rng: np.random.Generator,
                           step_limit: int = STEP_LIMIT) -> WalkOutcome:
    """Hop along columns of ``P`` from ``start`` until an action clip is hit."""
    P = network.P
    current = start
    for step in range(1, step_limit + 1):
        current = sample_index(P[:, current - 1], rng.random()) + 1
        if network.is_action(current):
            return WalkOutcome(current, step)
    raise StepLimitExceeded(step_limit)


def absorption_probabilities(network: ClipNetwork, start: int) -> dict[int, float]:
    """Exact hitting distribution of the standard PS walk (linear solve).

    Used as an oracle for :func:`standard_ps_deliberate`.
    """
    P = network.P
    n = network.size
    acts = sorted(network.action_ids)
    trans = [i for i in range(1, n + 1) if i not in network.action_ids]
    ti = [t - 1 for t in trans]
    ai = [a - 1 for a in acts]
    # Q[j, i]: transient i -> transient j; R[a, i]: transient i -> action a
    Q = P[np.ix_(ti, ti)]
    R = P[np.ix_(ai, ti)]
    B = R @ np.linalg.inv(np.eye(len(ti)) - Q)
    col = trans.index(start)
    return {a: float(B[k, col]) for k, a in enumerate(acts)}


def classical_rps_deliberate(pi, flags: Iterable[int], rng: np.random.Generator,
                             chunk: int = 64, step_limit: int = STEP_LIMIT) -> WalkOutcome:
    """Sample the mixed (stationary) chain until a flagged action shows up.

    The rank-one chain mixes in a single step, so each sample costs one
    step.  Uniforms are drawn ``chunk`` at a time and the unused tail of the
    last chunk is discarded.
    """
    pi = np.asarray(pi, dtype=float)
    flagged = np.zeros(pi.size, dtype=bool)
    flagged[[f - 1 for f in flags]] = True
    if pi[flagged].sum() <= 0:
        raise EmptyTail("flagged actions carry no stationary mass")
    cdf = np.cumsum(pi)
    steps = 0
    while steps < step_limit:
        u = rng.random(chunk)
        picks = np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), pi.size - 1)
        hits = np.flatnonzero(flagged[picks])
        if hits.size:
            k = int(hits[0])
            return WalkOutcome(int(picks[k]) + 1, steps + k + 1, steps + k + 1)
        steps += chunk
    raise StepLimitExceeded(step_limit)


def mixed_rps_deliberate(network: ClipNetwork, start: int, flags: Iterable[int],
                         mixing_steps: int, rng: np.random.Generator,
                         step_limit: int = STEP_LIMIT) -> WalkOutcome:
    """Reflecting PS on a general ergodic chain.

    Each attempt walks ``mixing_steps`` hops from ``start`` (approximate
    mixing) and checks the final clip; the count reported is the total number
    of hops.
    """
    flagged = set(flags)
    P = network.P
    steps = attempts = 0
    while steps < step_limit:
        attempts += 1
        current = start
        for _ in range(mixing_steps):
            current = sample_index(P[:, current - 1], rng.random()) + 1
        steps += max(mixing_steps, 1)
        if current in flagged:
            return WalkOutcome(current, steps, attempts)
    raise StepLimitExceeded(step_limit)
