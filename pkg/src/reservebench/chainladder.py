# src/reservebench/chainladder.py
"""
Classical chain-ladder estimators shared by the parametric models and the
residual bootstrap: development factors, payout pattern, row levels,
Pearson residuals and dispersion.

All functions are pure.  Indices are 0-based internally; error locations
are 1-based.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from .errors import (
    DegenerateColumn,
    DegenerateDispersion,
    DegeneratePattern,
    NonPositiveFit,
)
from .triangle import FloatArray, Triangle, as_cumulative, as_incremental, upper_mask

logger = logging.getLogger(__name__)

PATTERN_TOL = 1e-12


class ResidualAdjustment(str, Enum):
    PAPER = "paper"   # sqrt(n / (N - p)), numerator = number of accident years
    DOF = "dof"       # sqrt(N / (N - p))


@dataclass(frozen=True, eq=False)
class DevFactors:
    p: FloatArray
    f: FloatArray

    @classmethod
    def from_p(cls, p: FloatArray) -> DevFactors:
        p = np.asarray(p, dtype=float)
        return cls(p=p, f=1.0 / p)

    @classmethod
    def from_pattern(cls, pattern: PayoutPattern) -> DevFactors:
        beta = np.cumsum(pattern.gamma)
        return cls.from_p(beta[:-1] / beta[1:])


@dataclass(frozen=True, eq=False)
class PayoutPattern:
    gamma: FloatArray

    def __post_init__(self) -> None:
        g = np.asarray(self.gamma, dtype=float)
        object.__setattr__(self, "gamma", g)

    @property
    def n(self) -> int:
        return int(self.gamma.shape[0])

    @property
    def beta(self) -> FloatArray:
        """Cumulative proportions beta_j = gamma_1 + ... + gamma_j."""
        return np.cumsum(self.gamma)

    def tail_sums(self) -> FloatArray:
        """For each row i, the pattern mass of its unobserved cells."""
        n = self.n
        rev = np.cumsum(self.gamma[::-1])[::-1]  # rev[k] = gamma_k + ... + gamma_n
        out = np.zeros(n)
        out[1:] = rev[n - np.arange(1, n)]
        return out


@dataclass(frozen=True, eq=False)
class Dispersion:
    phi: float
    residuals: FloatArray  # upper-triangle cells, row-major
    dof: int


@dataclass(frozen=True, eq=False)
class ChainLadderFit:
    dev: DevFactors
    pattern: PayoutPattern
    mu_rows: FloatArray
    fitted: FloatArray  # n x n, m_ij = mu_i * gamma_j

    @property
    def n(self) -> int:
        return int(self.mu_rows.shape[0])


def dof(n: int) -> int:
    return n * (n + 1) // 2 - (2 * n - 1)


def estimate_dev_factors(t: Triangle) -> DevFactors:
    """Volume-weighted p_j = sum C_{i,j} / sum C_{i,j+1} over rows observing j+1."""
    cum = as_cumulative(t).cells
    n = t.n
    p = np.empty(n - 1)
    for j in range(n - 1):
        rows = n - 1 - j
        num = cum[:rows, j].sum()
        den = cum[:rows, j + 1].sum()
        if num <= 0 or den <= 0:
            raise DegenerateColumn(j + 1)
        p[j] = num / den
    return DevFactors.from_p(p)


def payout_pattern(d: DevFactors) -> PayoutPattern:
    # beta_j = p_j * ... * p_{n-1}, beta_n = 1; gamma is its first difference
    beta = np.append(np.cumprod(d.p[::-1])[::-1], 1.0)
    return PayoutPattern(np.diff(beta, prepend=0.0))


def row_levels(t: Triangle, g: PayoutPattern) -> FloatArray:
    inc = as_incremental(t).cells
    n = t.n
    observed = upper_mask(n)
    mass = np.where(observed, g.gamma[None, :], 0.0).sum(axis=1)
    for i in range(n):
        if mass[i] <= 0:
            raise DegeneratePattern(i + 1)
    return np.where(observed, inc, 0.0).sum(axis=1) / mass


def fit_chain_ladder(t: Triangle) -> ChainLadderFit:
    dev = estimate_dev_factors(t)
    pattern = payout_pattern(dev)
    mu = row_levels(t, pattern)
    return ChainLadderFit(dev, pattern, mu, np.outer(mu, pattern.gamma))


def pearson_dispersion(t: Triangle, fitted: FloatArray, variance_power: int) -> Dispersion:
    """Pearson residuals (x - m) / m^(q/2) over all observed cells and phi = sum r^2 / dof."""
    n = t.n
    k = dof(n)
    if k < 1:
        raise DegenerateDispersion(f"n = {n} leaves {k} degrees of freedom; need n >= 3")
    observed = upper_mask(n)
    m = np.asarray(fitted, dtype=float)
    bad = np.argwhere((m <= 0) & observed)
    if bad.size:
        i, j = (int(x) for x in bad[0])
        raise NonPositiveFit(i + 1, j + 1, float(m[i, j]))
    x = as_incremental(t).cells[observed]
    m_obs = m[observed]
    r = (x - m_obs) / m_obs ** (variance_power / 2.0)
    return Dispersion(phi=float(np.sum(r**2) / k), residuals=r, dof=k)


def residual_scale(n: int, mode: ResidualAdjustment = ResidualAdjustment.PAPER) -> float:
    k = dof(n)
    if k < 1:
        raise DegenerateDispersion(f"n = {n} leaves {k} degrees of freedom; need n >= 3")
    numerator = n if mode is ResidualAdjustment.PAPER else n * (n + 1) // 2
    return float(np.sqrt(numerator / k))


def adjust_residuals(
    d: Dispersion, n: int, mode: ResidualAdjustment = ResidualAdjustment.PAPER
) -> FloatArray:
    if d.dof < 1:
        raise DegenerateDispersion("dispersion has no degrees of freedom")
    return residual_scale(n, mode) * d.residuals


# ---------------------------------------------------------------------- #
# Batch refit (bootstrap)
# ---------------------------------------------------------------------- #
@dataclass(frozen=True, eq=False)
class BatchFit:
    mu_rows: FloatArray     # (B, n)
    gamma: FloatArray       # (B, n)
    ok: NDArray[np.bool_]   # (B,)


def fit_chain_ladder_batch(increments: FloatArray) -> BatchFit:
    """Chain-ladder refit of a stack of upper triangles, shape (B, n, n).

    Replicates whose column sums are not positive are flagged in ``ok``
    instead of raising; their parameters are NaN.
    """
    batch, n, _ = increments.shape
    observed = upper_mask(n)
    cum = np.cumsum(np.where(observed, increments, 0.0), axis=2)
    # rows contributing to ratio j -> j+1 are those observing column j+1
    w = observed[:, 1:].astype(float)                    # (n, n-1)
    num = np.einsum("bij,ij->bj", cum[:, :, :-1], w)
    den = np.einsum("bij,ij->bj", cum[:, :, 1:], w)
    ok = np.all((num > 0) & (den > 0), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(ok[:, None], num / np.where(den > 0, den, 1.0), np.nan)
    beta = np.concatenate(
        [np.cumprod(p[:, ::-1], axis=1)[:, ::-1], np.ones((batch, 1))], axis=1
    )
    gamma = np.diff(beta, axis=1, prepend=0.0)
    idx = np.arange(n)
    diag = cum[:, idx, n - 1 - idx]
    diag_beta = beta[:, n - 1 - idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = diag / diag_beta
    ok &= np.all(diag_beta > 0, axis=1)
    failed = int((~ok).sum())
    if failed:
        logger.debug("chain-ladder batch refit: %d of %d replicates degenerate", failed, batch)
    return BatchFit(mu_rows=mu, gamma=gamma, ok=ok)
