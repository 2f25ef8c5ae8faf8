# src/reservebench/resampling.py
"""
Reserving methods that do not refit a single parametric law:

- residual bootstrap with over-dispersed Poisson or Gamma process error,
- Uniform: lower triangles built from uniformly resampled link ratios,
- Unifnorm: normal approximation with the Uniform method's mean and variance.

All replicates of one call share a single Generator and are produced as one
vectorised batch, so results do not depend on how callers schedule work.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .chainladder import (
    ChainLadderFit,
    ResidualAdjustment,
    adjust_residuals,
    fit_chain_ladder,
    fit_chain_ladder_batch,
    pearson_dispersion,
)
from .errors import DegenerateFactor, EmptyPool, ReplicateFailure
from .models import sample_odp
from .scoring import PredictiveSample
from .triangle import (
    FloatArray,
    Target,
    Triangle,
    as_cumulative,
    future_cells,
    latest_diagonal,
    observed_part,
    upper,
    upper_mask,
)

logger = logging.getLogger(__name__)


class UnifnormVariance(str, Enum):
    SQUARED = "squared"   # sum C^2 (...)
    PAPER = "paper"       # sum C (...), weights not squared


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 5000
    variance_power: int = 1
    residual_adjustment: ResidualAdjustment = ResidualAdjustment.PAPER

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.variance_power not in (1, 2):
            raise ValueError("variance_power must be 1 (ODP) or 2 (Gamma)")


# ---------------------------------------------------------------------- #
# Residual bootstrap
# ---------------------------------------------------------------------- #
def pseudo_triangles(
    fit: ChainLadderFit,
    residuals: FloatArray,
    replicates: int,
    variance_power: int,
    rng: np.random.Generator,
) -> FloatArray:
    """Stack of pseudo upper triangles x* = m + r* m^(q/2), shape (B, n, n)."""
    n = fit.n
    observed = upper_mask(n)
    m_obs = fit.fitted[observed]
    picks = rng.integers(0, residuals.shape[0], size=(replicates, m_obs.shape[0]))
    x_obs = m_obs + residuals[picks] * m_obs ** (variance_power / 2.0)
    out = np.zeros((replicates, n, n))
    out[:, observed] = x_obs
    return out


def bootstrap_predict(
    t: Triangle,
    cfg: BootstrapConfig,
    rng: np.random.Generator,
    target: Target = Target.ULTIMATE_CLAIM,
) -> PredictiveSample:
    t = upper(t)
    fit = fit_chain_ladder(t)
    disp = pearson_dispersion(t, fit.fitted, cfg.variance_power)
    residuals = adjust_residuals(disp, t.n, cfg.residual_adjustment)
    pseudo = pseudo_triangles(fit, residuals, cfg.replicates, cfg.variance_power, rng)
    refit = fit_chain_ladder_batch(pseudo)

    cells = future_cells(t.n, target)
    ok = refit.ok
    means = (refit.mu_rows[ok][:, :, None] * refit.gamma[ok][:, None, :])[:, cells]
    non_positive = means <= 0
    warnings = int(non_positive.sum())
    means = np.where(non_positive, 0.0, means)
    phi = disp.phi
    if cfg.variance_power == 1:
        draws = sample_odp(rng, means, phi)
    elif phi == 0:
        draws = means
    else:
        shape = 1.0 / phi
        draws = rng.gamma(shape, means / shape)

    failures = int((~ok).sum())
    if failures == cfg.replicates:
        raise ReplicateFailure(f"all {failures} bootstrap replicates were degenerate")
    if failures:
        logger.debug("bootstrap: %d/%d replicates failed", failures, cfg.replicates)
    values = observed_part(t, target) + draws.sum(axis=1)
    method = "bootstrap_odp" if cfg.variance_power == 1 else "bootstrap_gamma"
    return PredictiveSample(values, method, failures=failures, warnings=warnings)


# ---------------------------------------------------------------------- #
# Link-ratio resampling
# ---------------------------------------------------------------------- #
@dataclass(frozen=True, eq=False)
class FactorPool:
    """pools[j] holds the observed ratios C_{i,j+1} / C_{i,j} (0-based j)."""

    pools: tuple[FloatArray, ...]

    @classmethod
    def from_triangle(cls, t: Triangle) -> FactorPool:
        cum = as_cumulative(upper(t)).cells
        n = t.n
        pools = []
        for j in range(n - 1):
            rows = n - 1 - j
            if rows < 1:
                raise EmptyPool(j + 1)
            den = cum[:rows, j]
            zero = np.flatnonzero(den == 0)
            if zero.size:
                raise DegenerateFactor(int(zero[0]) + 1, j + 1)
            ratios = cum[:rows, j + 1] / den
            ratios.setflags(write=False)
            pools.append(ratios)
        return cls(tuple(pools))

    def means(self) -> FloatArray:
        return np.array([p.mean() for p in self.pools])

    def second_moments(self) -> FloatArray:
        return np.array([np.mean(p**2) for p in self.pools])

    def extension_bounds(self, t: Triangle) -> tuple[float, float]:
        """Smallest and largest ultimate any uniform draw can produce."""
        last = latest_diagonal(t)
        n = t.n
        lo = hi = last[0]
        for i in range(1, n):
            lo_fac = hi_fac = 1.0
            for j in range(n - 1 - i, n - 1):
                cands = (lo_fac * self.pools[j].min(), lo_fac * self.pools[j].max(),
                         hi_fac * self.pools[j].min(), hi_fac * self.pools[j].max())
                lo_fac, hi_fac = min(cands), max(cands)
            lo += min(last[i] * lo_fac, last[i] * hi_fac)
            hi += max(last[i] * lo_fac, last[i] * hi_fac)
        return float(lo), float(hi)


def uniform_predict(
    t: Triangle,
    m: int,
    rng: np.random.Generator,
    target: Target = Target.ULTIMATE_CLAIM,
) -> PredictiveSample:
    pool = FactorPool.from_triangle(t)
    n = t.n
    last = latest_diagonal(t)
    out = np.full(m, observed_part(t, target))
    for i in range(1, n):
        c = np.full(m, last[i])
        for j in range(n - 1 - i, n - 1):
            ratios = pool.pools[j]
            new = c * ratios[rng.integers(0, ratios.shape[0], size=m)]
            if target is Target.NEXT_YEAR_PAYMENTS:
                out += new - c
                break
            c = new
        else:
            out += c - last[i]
    return PredictiveSample(out, "uniform")


def unifnorm_moments(
    t: Triangle,
    target: Target = Target.ULTIMATE_CLAIM,
    variance: UnifnormVariance = UnifnormVariance.SQUARED,
) -> tuple[float, float, bool]:
    """Mean, variance and whether the variance had to be clamped at 0."""
    pool = FactorPool.from_triangle(t)
    e1, e2 = pool.means(), pool.second_moments()
    n = t.n
    last = latest_diagonal(t)
    mean = observed_part(t, target)
    var = 0.0
    for i in range(1, n):
        start = n - 1 - i
        if target is Target.ULTIMATE_CLAIM:
            p1 = float(np.prod(e1[start:]))
            p2 = float(np.prod(e2[start:]))
            mean += last[i] * (p1 - 1.0)
        else:
            p1, p2 = float(e1[start]), float(e2[start])
            mean += last[i] * (p1 - 1.0)
        weight = last[i] ** 2 if variance is UnifnormVariance.SQUARED else last[i]
        var += weight * (p2 - p1**2)
    clamped = var < 0
    return float(mean), max(float(var), 0.0), clamped


def unifnorm_predict(
    t: Triangle,
    m: int,
    rng: np.random.Generator,
    target: Target = Target.ULTIMATE_CLAIM,
    variance: UnifnormVariance = UnifnormVariance.SQUARED,
) -> PredictiveSample:
    mean, var, clamped = unifnorm_moments(t, target, variance)
    if clamped:
        logger.debug("unifnorm: negative variance clamped to 0")
    values = rng.normal(mean, np.sqrt(var), size=m)
    return PredictiveSample(values, "unifnorm", warnings=int(clamped))
