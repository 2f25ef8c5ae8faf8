# src/reservebench/scoring.py
"""
Evaluation of predictive samples against a realised value.

Scores are negatively oriented as in the reserving literature: larger is
better and every score is <= 0.  Quantiles are ceil-indexed order
statistics (index ceil(q * M), clamped to [1, M]).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from .triangle import FloatArray

logger = logging.getLogger(__name__)

PAIR_BLOCK = 512
EXHAUSTIVE_LIMIT = 2000


@dataclass(frozen=True, eq=False)
class PredictiveSample:
    """M draws of the target from one method for one scenario.

    ``failures`` counts discarded bootstrap replicates, ``warnings`` counts
    clamped or zeroed quantities (see the resampling module).
    """

    values: FloatArray
    method_id: str = ""
    failures: int = 0
    warnings: int = 0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).ravel()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @cached_property
    def sorted(self) -> FloatArray:
        out = np.sort(self.values)
        out.setflags(write=False)
        return out

    @property
    def m(self) -> int:
        return int(self.values.shape[0])

    def mean(self) -> float:
        return float(self.values.mean())


@dataclass(frozen=True)
class MsepTerms:
    value: float
    variance_part: float
    bias_part: float


@dataclass(frozen=True)
class ScenarioScore:
    crps: float
    energy: float
    pit: float
    covered: dict[float, bool] = field(default_factory=dict)
    width: dict[float, float] = field(default_factory=dict)
    msep: MsepTerms | None = None


def _check(sample: PredictiveSample, minimum: int = 2) -> None:
    if sample.m < minimum:
        raise ValueError(f"need at least {minimum} draws, got {sample.m}")


def _mean_abs_pair_difference(x_sorted: FloatArray) -> float:
    """E|X - X'| over all M^2 ordered pairs of the empirical distribution."""
    m = x_sorted.shape[0]
    ranks = 2.0 * np.arange(1, m + 1) - m - 1
    return float(2.0 * np.dot(ranks, x_sorted) / (m * m))


def crps(sample: PredictiveSample, obs: float) -> float:
    """CRPS of the empirical CDF, via 1/2 E|X - X'| - E|X - c| in O(M log M)."""
    _check(sample)
    x = sample.sorted
    spread = _mean_abs_pair_difference(x)
    miss = float(np.mean(np.abs(x - obs)))
    return min(0.5 * spread - miss, 0.0)


def crps_naive(sample: PredictiveSample, obs: float) -> float:
    """O(M^2) reference implementation of the same quantity."""
    x = sample.values
    spread = float(np.abs(x[:, None] - x[None, :]).mean())
    return 0.5 * spread - float(np.mean(np.abs(x - obs)))


def default_energy_pairs(m: int) -> int:
    """0 (exhaustive) for small samples, else 10 M random pairs."""
    return 0 if m <= EXHAUSTIVE_LIMIT else 10 * m


def energy_score(
    sample: PredictiveSample,
    obs: float,
    beta: float,
    pairs: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """1/2 E|X - X'|^beta - E|X - c|^beta.

    ``pairs = 0`` enumerates all M^2 pairs; otherwise ``pairs`` random
    i != j pairs are drawn and rescaled by (M - 1) / M so both modes estimate
    the same all-pairs expectation.
    """
    if not 0 < beta < 2:
        raise ValueError(f"beta must lie in (0, 2), got {beta}")
    _check(sample)
    x = sample.values
    m = sample.m
    if pairs is None:
        pairs = default_energy_pairs(m)
    miss = float(np.mean(np.abs(x - obs) ** beta))
    if pairs == 0:
        total = 0.0
        for start in range(0, m, PAIR_BLOCK):
            block = x[start : start + PAIR_BLOCK]
            total += float(np.sum(np.abs(block[:, None] - x[None, :]) ** beta))
        spread = total / (m * m)
    else:
        if rng is None:
            raise ValueError("subsampled energy score needs an rng")
        i = rng.integers(0, m, size=pairs)
        j = (i + rng.integers(1, m, size=pairs)) % m   # j != i, uniform
        spread = float(np.mean(np.abs(x[i] - x[j]) ** beta)) * (m - 1) / m
    return min(0.5 * spread - miss, 0.0)


def pit(
    sample: PredictiveSample,
    obs: float,
    randomize: bool = False,
    rng: np.random.Generator | None = None,
) -> float:
    _check(sample, minimum=1)
    x = sample.sorted
    m = sample.m
    upper = np.searchsorted(x, obs, side="right") / m
    if not randomize:
        return float(upper)
    if rng is None:
        raise ValueError("randomized PIT needs an rng")
    lower = np.searchsorted(x, obs, side="left") / m
    return float(rng.uniform(lower, upper)) if upper > lower else float(upper)


def empirical_quantile(sample: PredictiveSample, q: float) -> float:
    m = sample.m
    idx = min(max(math.ceil(q * m), 1), m)
    return float(sample.sorted[idx - 1])


def below_quantiles(sample: PredictiveSample, obs: float, grid: FloatArray) -> NDArray[np.bool_]:
    """For each p in the grid: is obs strictly below the empirical p-quantile?"""
    m = sample.m
    idx = np.clip(np.ceil(np.asarray(grid) * m).astype(int), 1, m)
    return obs < sample.sorted[idx - 1]


def pp_curve(
    observations: Sequence[float],
    samples: Sequence[PredictiveSample],
    grid: FloatArray,
) -> FloatArray:
    """Fraction of scenarios whose observation lies below each predictive p-quantile."""
    if len(observations) != len(samples) or not samples:
        raise ValueError("need one sample per observation and at least one scenario")
    hits = np.array([below_quantiles(s, o, grid) for s, o in zip(samples, observations)])
    return hits.mean(axis=0)


def default_grid(size: int = 99) -> FloatArray:
    return np.arange(1, size + 1) / (size + 1)


def coverage_and_width(sample: PredictiveSample, obs: float, level: float) -> tuple[bool, float]:
    if not 0 < level < 1:
        raise ValueError(f"interval level must lie in (0, 1), got {level}")
    _check(sample)
    lo = empirical_quantile(sample, (1 - level) / 2)
    hi = empirical_quantile(sample, (1 + level) / 2)
    return bool(lo < obs < hi), hi - lo


def msep_conditional(pred: PredictiveSample, oracle: PredictiveSample) -> MsepTerms:
    _check(pred)
    _check(oracle)
    z = oracle.values
    z_bar = float(z.mean())
    variance = float(np.sum((z - z_bar) ** 2) / (z.shape[0] - 1))
    bias = (pred.mean() - z_bar) ** 2
    return MsepTerms(variance + bias, variance, bias)


def pit_histogram(pits: Sequence[float], bins: int = 20) -> tuple[FloatArray, NDArray[np.int64]]:
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(np.asarray(pits, dtype=float), bins=edges)
    return edges, counts.astype(np.int64)


def pit_uniformity(counts: Sequence[int]) -> float:
    """Chi-square p-value of the PIT histogram against the uniform."""
    counts = np.asarray(counts)
    if counts.sum() == 0:
        return float("nan")
    return float(stats.chisquare(counts).pvalue)


def score_scenario(
    sample: PredictiveSample,
    obs: float,
    *,
    beta: float,
    levels: Sequence[float],
    rng: np.random.Generator,
    oracle: PredictiveSample | None = None,
    randomize_pit: bool = False,
    energy_pairs: int | None = None,
) -> ScenarioScore:
    covered: dict[float, bool] = {}
    width: dict[float, float] = {}
    for level in levels:
        covered[level], width[level] = coverage_and_width(sample, obs, level)
    return ScenarioScore(
        crps=crps(sample, obs),
        energy=energy_score(sample, obs, beta, pairs=energy_pairs, rng=rng),
        pit=pit(sample, obs, randomize=randomize_pit, rng=rng),
        covered=covered,
        width=width,
        msep=None if oracle is None else msep_conditional(sample, oracle),
    )
