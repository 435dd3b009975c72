"""Gaussian pulse-angle noise and Monte-Carlo deliberation statistics.

Every deliberation attempt consumes one fixed-width row of uniforms from
its trial stream::

    u[0]        -> m = floor(u[0] * (m_eps + 1))
    u[1]        -> clip-basis measurement (inverse CDF)
    u[2:2 + L]  -> pulse-angle noise, normal by inverse CDF, L = 4 + 12 m_eps

The row is drawn even at zero noise, so runs at different ``sigma`` share
their random numbers.  Rows may be fetched several attempts at a time: the
stream yields the same values however the draws are split, so results do
not depend on block sizes.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .pulses import (ALL_KINDS, PulseKind, PulseSequence, angles_from_pi,
                     compile_rank_one_deliberation)
from .quantum import m_eps_for
from .rng import normals_from_uniforms, stream

CHUNK = 500  # trials per work unit; fixed so that results ignore the thread count
MAX_BLOCK = 4096


class AttemptLimitExceeded(RuntimeError):
    pass


class LengthMismatch(ValueError):
    pass


class DegenerateDesign(ValueError):
    pass


class BadConfig(ValueError):
    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class NoiseModel:
    sigma: float = 0.0
    mask: frozenset = ALL_KINDS

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")
        object.__setattr__(self, "mask", frozenset(PulseKind(k) for k in self.mask))


@dataclass(frozen=True)
class ExperimentConfig:
    epsilon: float
    ratio: float
    sigma: float = 0.0
    trials: int = 10_000
    seed: int = 0
    m_eps_override: int | None = None
    noise_mask: frozenset = ALL_KINDS
    attempt_limit: int = 10**6

    def __post_init__(self):
        errors = []
        if not 0 < self.epsilon < 1:
            errors.append(f"epsilon: {self.epsilon} not in (0, 1)")
        if not self.ratio > 0:
            errors.append(f"ratio: {self.ratio} must be positive")
        if not self.sigma >= 0:
            errors.append(f"sigma: {self.sigma} must be non-negative")
        if self.trials < 1:
            errors.append(f"trials: {self.trials} must be at least 1")
        if self.m_eps_override is not None and self.m_eps_override < 0:
            errors.append(f"m_eps_override: {self.m_eps_override} must be non-negative")
        if not 0 <= self.seed < 2**64:
            errors.append(f"seed: {self.seed} must be a 64-bit unsigned integer")
        try:
            object.__setattr__(self, "noise_mask", frozenset(PulseKind(k) for k in self.noise_mask))
        except ValueError as exc:
            errors.append(f"noise_mask: {exc}")
        if errors:
            raise BadConfig(errors)

    @property
    def pi(self) -> np.ndarray:
        p1 = self.epsilon * self.ratio / (1.0 + self.ratio)
        p2 = self.epsilon / (1.0 + self.ratio)
        return np.array([p1, p2, 1.0 - p1 - p2])

    @property
    def m_eps(self) -> int:
        return m_eps_for(self.epsilon) if self.m_eps_override is None else self.m_eps_override

    @property
    def model(self) -> NoiseModel:
        return NoiseModel(self.sigma, self.noise_mask)

    @property
    def label(self) -> str:
        # sigma is left out on purpose: noise levels share random numbers
        return f"rank-one|eps={self.epsilon:.17g}|ratio={self.ratio:.17g}"

    def tailed(self) -> np.ndarray:
        return np.array([self.ratio, 1.0]) / (1.0 + self.ratio)


@dataclass(frozen=True)
class TrialRecord:
    action: int
    n_u: int
    attempts: int


@dataclass(frozen=True)
class ExperimentStats:
    mean_nu: float
    std_nu: float
    std_mean_nu: float  # spread of the means of 100 equal batches
    n1: int
    n2: int
    trials: int
    epsilon: float
    ratio: float
    sigma: float

    @property
    def ratio_empirical(self) -> float:
        return self.n1 / self.n2 if self.n2 else math.inf

    @property
    def distance(self) -> float:
        target = np.array([self.ratio, 1.0]) / (1.0 + self.ratio)
        return statistical_distance(target, np.array([self.n1, self.n2]) / self.trials)


# -- noise --------------------------------------------------------------------------

def noise_mask_vector(seq: PulseSequence, mask: Iterable) -> np.ndarray:
    mask = frozenset(mask)
    return np.array([p.kind in mask for p in seq], dtype=bool)


def perturb_sequence(seq: PulseSequence, model: NoiseModel, rng: np.random.Generator) -> PulseSequence:
    """Add independent ``N(0, sigma^2)`` offsets to the angles of masked pulses.

    One normal is drawn per pulse, masked or not, so the stream layout does
    not depend on the mask.
    """
    z = normals_from_uniforms(rng.random(len(seq)))
    if model.sigma == 0:
        return seq
    hit = noise_mask_vector(seq, model.mask)
    return PulseSequence(tuple(p.with_angle(p.angle + model.sigma * dz) if h else p
                               for p, dz, h in zip(seq, z, hit)), seq.k)


# -- batched two-qubit (+ hidden level) simulator ------------------------------------

# (bit-0 index, bit-1 index) pairs per qubit on |q1 q2>
_PAIRS = {1: ((0, 2), (1, 3)), 2: ((0, 1), (2, 3))}
# measurement outcome -> clip (0 = hidden level, i.e. no clip)
OUTCOME_CLIP = np.array([1, 2, 3, 3, 0])


def _apply_x(S, a):
    c = np.cos(a / 2)[:, None]
    s = (-1j * np.sin(a / 2))[:, None]
    for q in (1, 2):
        (i0, i1), (j0, j1) = _PAIRS[q]
        lo = S[:, [i0, j0]]
        hi = S[:, [i1, j1]]
        S[:, [i0, j0]] = c * lo + s * hi
        S[:, [i1, j1]] = s * lo + c * hi


def _apply_z(S, a, ion):
    ph = np.exp(-0.5j * a)
    (i0, i1), (j0, j1) = _PAIRS[ion]
    S[:, [i0, j0]] *= ph[:, None]
    S[:, [i1, j1]] *= ph.conj()[:, None]


def _apply_ms(S, a):
    c, s = np.cos(a / 2), np.sin(a / 2)
    s0, s4 = S[:, 0].copy(), S[:, 4].copy()
    S[:, 0] = c * s0 - s * s4
    S[:, 4] = s * s0 + c * s4


def apply_pulses_batch(S: np.ndarray, seq: PulseSequence, angles: np.ndarray) -> None:
    """In place: pulse ``i`` of ``seq`` with per-row angles ``angles[:, i]``."""
    for i, p in enumerate(seq):
        a = angles[:, i]
        if p.kind is PulseKind.COLLECTIVE_X:
            _apply_x(S, a)
        elif p.kind is PulseKind.SINGLE_Z:
            _apply_z(S, a, p.ion)
        elif p.kind is PulseKind.MS:
            _apply_ms(S, a)
        else:
            raise ValueError(f"{p.kind.value} is not part of the rank-one schedule")


def _measure(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs, axis=1)
    idx = np.sum(cdf <= (u * cdf[:, -1])[:, None], axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


@dataclass
class _Schedule:
    cfg: ExperimentConfig
    template: PulseSequence = field(init=False)
    base: np.ndarray = field(init=False)
    noisy: np.ndarray = field(init=False)
    width: int = field(init=False)
    ideal: np.ndarray | None = field(init=False, default=None)

    def __post_init__(self):
        cfg = self.cfg
        t1, t2 = angles_from_pi(cfg.pi)
        self.template = compile_rank_one_deliberation(t1, t2, (1, 2), cfg.m_eps)
        self.base = self.template.angles
        self.noisy = noise_mask_vector(self.template, cfg.noise_mask)
        self.width = 2 + len(self.template)
        if cfg.sigma == 0 or not self.noisy.any():
            ms = np.arange(cfg.m_eps + 1)
            self.ideal = self._probs(ms, np.tile(self.base, (ms.size, 1)))

    def _probs(self, m: np.ndarray, angles: np.ndarray) -> np.ndarray:
        order = np.argsort(-m, kind="stable")
        ms = m[order]
        S = np.zeros((m.size, 5), dtype=complex)
        S[:, 0] = 1.0
        ang = angles[order]
        head = PulseSequence(self.template.pulses[:4], 2)
        apply_pulses_batch(S, head, ang[:, :4])
        for b in range(1, self.cfg.m_eps + 1):
            n = int(np.searchsorted(-ms, -b, side="right"))
            if n == 0:
                break
            lo, hi = 4 + 12 * (b - 1), 4 + 12 * b
            sub = S[:n]
            apply_pulses_batch(sub, PulseSequence(self.template.pulses[lo:hi], 2), ang[:n, lo:hi])
            S[:n] = sub
        probs = np.empty((m.size, 5))
        probs[order] = np.abs(S) ** 2
        return probs

    def attempts(self, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Outcome clip (0 for hidden) and ``m`` for each uniform row."""
        m_eps = self.cfg.m_eps
        m = np.minimum((U[:, 0] * (m_eps + 1)).astype(np.int64), m_eps)
        if self.ideal is not None:
            probs = self.ideal[m]
        else:
            z = normals_from_uniforms(U[:, 2:])
            angles = self.base + self.cfg.sigma * z * self.noisy
            probs = self._probs(m, angles)
        return OUTCOME_CLIP[_measure(probs, U[:, 1])], m

    def success_rate(self) -> float:
        ms = np.arange(self.cfg.m_eps + 1)
        probs = self.ideal if self.ideal is not None else self._probs(ms, np.tile(self.base, (ms.size, 1)))
        return float(np.mean(probs[:, 0] + probs[:, 1]))


def trial_stream(cfg: ExperimentConfig, trial: int) -> np.random.Generator:
    return stream(cfg.seed, cfg.label, trial)


def run_trial(config: ExperimentConfig, rng: np.random.Generator) -> TrialRecord:
    """One deliberation: attempts until a flagged action is measured."""
    sched = _Schedule(config)
    n_u = 0
    for attempt in range(1, config.attempt_limit + 1):
        clip, m = sched.attempts(rng.random((1, sched.width)))
        n_u += 2 * int(m[0]) + 1
        if clip[0] in (1, 2):
            return TrialRecord(int(clip[0]), n_u, attempt)
    raise AttemptLimitExceeded(config.attempt_limit)


def _simulate_chunk(sched: _Schedule, trials: range) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    cfg = sched.cfg
    gens = [trial_stream(cfg, t) for t in trials]
    n = len(gens)
    action = np.zeros(n, dtype=np.int64)
    n_u = np.zeros(n, dtype=np.int64)
    tries = np.zeros(n, dtype=np.int64)
    pending = np.arange(n)
    p = max(sched.success_rate(), 1e-6)
    block = int(min(MAX_BLOCK, max(1, math.ceil(1.0 / p))))
    while pending.size:
        U = np.stack([gens[i].random((block, sched.width)) for i in pending])
        clip, m = sched.attempts(U.reshape(-1, sched.width))
        clip = clip.reshape(pending.size, block)
        cost = np.cumsum(2 * m.reshape(pending.size, block) + 1, axis=1)
        hit = (clip == 1) | (clip == 2)
        first = np.argmax(hit, axis=1)
        done = hit[np.arange(pending.size), first]
        rows = np.arange(pending.size)
        idx = pending[done]
        action[idx] = clip[rows[done], first[done]]
        n_u[idx] += cost[rows[done], first[done]]
        tries[idx] += first[done] + 1
        rest = pending[~done]
        n_u[rest] += cost[~done, -1]
        tries[rest] += block
        if rest.size and tries[rest].max() >= cfg.attempt_limit:
            raise AttemptLimitExceeded(cfg.attempt_limit)
        pending = rest
        block = min(MAX_BLOCK, block * 2)
    return action, n_u, tries


def thread_count() -> int:
    env = os.environ.get("QPS_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def simulate(config: ExperimentConfig, trials: int | None = None,
             threads: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Arrays ``(action, n_u, attempts)`` for trials ``0 .. trials-1``."""
    trials = config.trials if trials is None else trials
    sched = _Schedule(config)
    chunks = [range(s, min(s + CHUNK, trials)) for s in range(0, trials, CHUNK)]
    threads = thread_count() if threads is None else threads
    if threads == 1 or len(chunks) == 1:
        parts = [_simulate_chunk(sched, c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _simulate_chunk(sched, c), chunks))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def batch_mean_std(values: np.ndarray, batches: int = 100) -> float:
    """Standard deviation of the means of ``batches`` equal consecutive batches."""
    values = np.asarray(values, dtype=float)
    k = min(batches, values.size)
    if k < 2:
        return 0.0
    means = np.array([b.mean() for b in np.array_split(values, k)])
    return float(np.std(means, ddof=1))


def summarize(config: ExperimentConfig, action, n_u) -> ExperimentStats:
    n_u = np.asarray(n_u, dtype=float)
    return ExperimentStats(
        mean_nu=float(n_u.mean()),
        std_nu=float(n_u.std(ddof=1)) if n_u.size > 1 else 0.0,
        std_mean_nu=batch_mean_std(n_u),
        n1=int(np.sum(action == 1)), n2=int(np.sum(action == 2)),
        trials=int(n_u.size), epsilon=config.epsilon, ratio=config.ratio, sigma=config.sigma)


def monte_carlo(config: ExperimentConfig, trials: int | None = None,
                threads: int | None = None) -> ExperimentStats:
    action, n_u, _ = simulate(config, trials, threads)
    return summarize(config, action, n_u)


# -- statistics -----------------------------------------------------------------------

def statistical_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise LengthMismatch(f"{p.shape} vs {q.shape}")
    return float(0.5 * np.abs(p - q).sum())


@dataclass(frozen=True)
class ScalingFit:
    model: str
    a: float
    b: float
    sse: float


SCALING_MODELS = {
    "inverse_sqrt": lambda eps: 1.0 / np.sqrt(eps),
    "inverse": lambda eps: 1.0 / eps,
}


def fit_scaling(points, model: str) -> ScalingFit:
    """Least squares of ``mean_nu ~ a + b g(eps)``."""
    if model not in SCALING_MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {sorted(SCALING_MODELS)}")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or np.unique(pts[:, 0]).size < 3:
        raise DegenerateDesign("need at least 3 points with distinct epsilon")
    g = SCALING_MODELS[model](pts[:, 0])
    A = np.column_stack([np.ones_like(g), g])
    coef, _, rank, _ = np.linalg.lstsq(A, pts[:, 1], rcond=None)
    if rank < 2:
        raise DegenerateDesign("design matrix is rank deficient")
    resid = pts[:, 1] - A @ coef
    return ScalingFit(model, float(coef[0]), float(coef[1]), float(resid @ resid))


def grover_success(epsilon: float, m: int) -> float:
    """Flagged mass after ``m`` exact iterations: ``sin^2((2m + 1) theta)``."""
    theta = math.asin(math.sqrt(epsilon))
    return math.sin((2 * m + 1) * theta) ** 2
