"""Grid sweeps behind the CSV tables written by the figure commands."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .noise import ExperimentConfig, monte_carlo

EPS_GRID = tuple(float(e) for e in np.geomspace(0.002, 0.5, 40))
RATIO_GRID = (1.0, 2.0, 4.0, 9.0)
SIGMA_GRID = (math.pi / 100, math.pi / 20, math.pi / 10)
DISTANCE_SIGMAS = (0.0, math.pi / 100, math.pi / 20, math.pi / 10, math.pi / 2, math.pi)
RATIO_EPS_GRID = (0.01, 0.05, 0.1, 0.25)

SCALING_HEADER = ("epsilon", "sigma", "trials", "mean_nu", "std_mean_nu")
RATIOS_HEADER = ("epsilon", "ratio_target", "sigma", "n1", "n2", "ratio_empirical")
DISTANCE_HEADER = ("epsilon", "ratio_target", "sigma", "statistical_distance")
COMPARE_HEADER = ("epsilon", "mean_nu_quantum", "mean_nu_classical")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))  # shortest round-trip form


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def scaling_rows(sigmas=SIGMA_GRID, eps_grid=EPS_GRID, ratio: float = 1.0,
                 trials: int = 10_000, seed: int = 0, m_eps_override=None) -> list[tuple]:
    rows = []
    for sigma in sigmas:
        for eps in eps_grid:
            cfg = ExperimentConfig(eps, ratio, sigma, trials, seed, m_eps_override)
            st = monte_carlo(cfg)
            rows.append((eps, sigma, trials, st.mean_nu, st.std_mean_nu))
    return rows


def compare_rows(eps_grid=EPS_GRID, ratio: float = 1.0, sigma: float = 0.0,
                 trials: int = 10_000, seed: int = 0) -> list[tuple]:
    rows = []
    for eps in eps_grid:
        q = monte_carlo(ExperimentConfig(eps, ratio, sigma, trials, seed))
        c = monte_carlo(ExperimentConfig(eps, ratio, sigma, trials, seed, m_eps_override=0))
        rows.append((eps, q.mean_nu, c.mean_nu))
    return rows


def distance_rows(sigmas=DISTANCE_SIGMAS, eps_grid=(0.05,), ratios=(9.0,),
                  trials: int = 10_000, seed: int = 0) -> list[tuple]:
    rows = []
    for eps in eps_grid:
        for ratio in ratios:
            for sigma in sigmas:
                st = monte_carlo(ExperimentConfig(eps, ratio, sigma, trials, seed))
                rows.append((eps, ratio, sigma, st.distance))
    return rows


def ratio_rows(eps_grid=RATIO_EPS_GRID, ratios=RATIO_GRID, sigmas=(0.0,),
               trials: int = 10_000, seed: int = 0) -> list[tuple]:
    rows = []
    for eps in eps_grid:
        for ratio in ratios:
            for sigma in sigmas:
                st = monte_carlo(ExperimentConfig(eps, ratio, sigma, trials, seed))
                rows.append((eps, ratio, sigma, st.n1, st.n2, st.ratio_empirical))
    return rows
