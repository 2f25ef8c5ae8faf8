# src/reservebench/models.py
"""
The five distributional development models.

Each model has a parameter dataclass (the members of the ``ModelParams``
union) and three operations:

- ``fit``: estimate parameters from an upper triangle,
- ``generate_scenario``: draw a full square from known parameters,
- ``predictive_sample`` / ``simulate_ultimate``: draw the target (ultimate
  claim or next-year payments) conditional on an upper triangle.

Poisson draws use numpy's ``Generator.poisson``, which switches to the exact
transformed-rejection sampler for large means; no normal approximation is
involved anywhere.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, ClassVar, Union

import numpy as np
from typing_extensions import assert_never

from .chainladder import (
    DevFactors,
    PayoutPattern,
    estimate_dev_factors,
    fit_chain_ladder,
    payout_pattern,
    pearson_dispersion,
)
from .errors import DegenerateDispersion, InvalidParams, NonPositiveCumulative
from .triangle import (
    FloatArray,
    Flavor,
    Mask,
    Target,
    Triangle,
    UltimateClaim,
    as_cumulative,
    as_incremental,
    future_cells,
    latest_diagonal,
    observed_part,
    target_value,
    ultimate,
    upper,
    upper_mask,
)

logger = logging.getLogger(__name__)

PATTERN_SUM_TOL = 1e-9


class ModelKind(str, Enum):
    LOGNORMAL = "lognormal"
    NEGBINOMIAL = "negbinomial"
    POISSON = "poisson"
    ODP = "odp"
    GAMMA = "gamma"


def _vector(name: str, values: Any) -> FloatArray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise InvalidParams(f"{name} must be a vector of length >= 2")
    if not np.all(np.isfinite(arr)):
        raise InvalidParams(f"{name} has non-finite entries")
    return arr


def _check_pattern(pattern: PayoutPattern) -> None:
    if abs(pattern.gamma.sum() - 1.0) > PATTERN_SUM_TOL:
        raise InvalidParams(f"payout pattern sums to {pattern.gamma.sum()!r}, not 1")


@dataclass(frozen=True, eq=False)
class LogNormalParams:
    mu: FloatArray
    sigma2: FloatArray
    kind: ClassVar[ModelKind] = ModelKind.LOGNORMAL

    def __post_init__(self) -> None:
        mu = _vector("mu", self.mu)
        sigma2 = _vector("sigma2", self.sigma2)
        if mu.shape != sigma2.shape:
            raise InvalidParams("mu and sigma2 differ in length")
        if np.any(sigma2 < 0):
            raise InvalidParams("sigma2 must be non-negative")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def n(self) -> int:
        return int(self.mu.shape[0])


@dataclass(frozen=True, eq=False)
class NegBinomialParams:
    pattern: PayoutPattern
    base_column: FloatArray | None = None
    kind: ClassVar[ModelKind] = ModelKind.NEGBINOMIAL

    def __post_init__(self) -> None:
        _check_pattern(self.pattern)
        if np.any(self.pattern.gamma < 0):
            raise InvalidParams("negative binomial development needs gamma_k >= 0")
        if self.pattern.gamma[0] <= 0:
            raise InvalidParams("negative binomial development needs gamma_1 > 0")
        if self.base_column is not None:
            base = _vector("base_column", self.base_column)
            if base.shape[0] != self.pattern.n:
                raise InvalidParams("base_column length differs from the pattern")
            if np.any(base < 0) or np.any(base != np.round(base)):
                raise InvalidParams("base_column must hold non-negative integers")
            object.__setattr__(self, "base_column", base)

    @property
    def n(self) -> int:
        return self.pattern.n

    @property
    def dev(self) -> DevFactors:
        return DevFactors.from_pattern(self.pattern)


@dataclass(frozen=True, eq=False)
class _RowLevelParams:
    mu_rows: FloatArray
    pattern: PayoutPattern

    def __post_init__(self) -> None:
        mu = _vector("mu", self.mu_rows)
        if mu.shape[0] != self.pattern.n:
            raise InvalidParams("mu and gamma differ in length")
        if np.any(mu < 0) or np.any(self.pattern.gamma < 0):
            raise InvalidParams("row levels and payout pattern must be non-negative")
        _check_pattern(self.pattern)
        object.__setattr__(self, "mu_rows", mu)

    @property
    def n(self) -> int:
        return int(self.mu_rows.shape[0])

    @property
    def means(self) -> FloatArray:
        return np.outer(self.mu_rows, self.pattern.gamma)


@dataclass(frozen=True, eq=False)
class PoissonParams(_RowLevelParams):
    kind: ClassVar[ModelKind] = ModelKind.POISSON


@dataclass(frozen=True, eq=False)
class ODPParams(_RowLevelParams):
    phi: float = 1.0
    kind: ClassVar[ModelKind] = ModelKind.ODP

    def __post_init__(self) -> None:
        super().__post_init__()
        if not (np.isfinite(self.phi) and self.phi > 0):
            raise InvalidParams(f"phi must be positive, got {self.phi!r}")


@dataclass(frozen=True, eq=False)
class GammaParams(_RowLevelParams):
    nu: float = 1.0
    kind: ClassVar[ModelKind] = ModelKind.GAMMA

    def __post_init__(self) -> None:
        super().__post_init__()
        if not (np.isfinite(self.nu) and self.nu > 0):
            raise InvalidParams(f"nu must be positive, got {self.nu!r}")


ModelParams = Union[LogNormalParams, NegBinomialParams, PoissonParams, ODPParams, GammaParams]


@dataclass(frozen=True, eq=False)
class ScenarioTruth:
    full_square: Triangle  # incremental, full
    upper: Triangle        # incremental, upper
    true_uc: UltimateClaim
    generator: ModelParams

    def true_value(self, target: Target) -> float:
        if target is Target.ULTIMATE_CLAIM:
            return self.true_uc.value
        return target_value(self.full_square, target)


# ---------------------------------------------------------------------- #
# Estimation
# ---------------------------------------------------------------------- #
def _fit_lognormal(t: Triangle) -> LogNormalParams:
    cum = as_cumulative(t).cells
    n = t.n
    prev = np.concatenate([np.ones((n, 1)), cum[:, :-1]], axis=1)  # C_{i,0} = 1
    observed = upper_mask(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = cum / prev
    bad = np.argwhere(observed & ~((ratio > 0) & np.isfinite(ratio)))
    if bad.size:
        i, j = (int(x) for x in bad[0])
        raise NonPositiveCumulative(i + 1, j + 1)
    logs = np.where(observed, np.log(np.where(observed, ratio, 1.0)), 0.0)
    counts = observed.sum(axis=0)                     # n - j + 1 (1-based j)
    mu = logs.sum(axis=0) / counts
    sq = np.where(observed, (logs - mu[None, :]) ** 2, 0.0).sum(axis=0)
    sigma2 = np.zeros(n)
    sigma2[:-1] = sq[:-1] / (counts[:-1] - 1)         # divisor n - j
    return LogNormalParams(mu, sigma2)


def fit(kind: ModelKind, t: Triangle) -> ModelParams:
    """Estimate the parameters of ``kind`` from an upper triangle."""
    t = upper(t)
    if kind is ModelKind.LOGNORMAL:
        return _fit_lognormal(t)
    if kind is ModelKind.NEGBINOMIAL:
        pattern = payout_pattern(estimate_dev_factors(t))
        base = as_incremental(t).cells[:, 0]
        if np.all(base >= 0) and np.all(base == np.round(base)):
            return NegBinomialParams(pattern, base)
        return NegBinomialParams(pattern)
    cl = fit_chain_ladder(t)
    if kind is ModelKind.POISSON:
        return PoissonParams(cl.mu_rows, cl.pattern)
    if kind is ModelKind.ODP:
        d = pearson_dispersion(t, cl.fitted, variance_power=1)
        if d.phi <= 0:
            raise DegenerateDispersion("Pearson dispersion is zero (perfect fit)")
        return ODPParams(cl.mu_rows, cl.pattern, phi=d.phi)
    if kind is ModelKind.GAMMA:
        d = pearson_dispersion(t, cl.fitted, variance_power=2)
        if d.phi <= 0:
            raise DegenerateDispersion("Pearson dispersion is zero (perfect fit)")
        return GammaParams(cl.mu_rows, cl.pattern, nu=1.0 / d.phi)
    assert_never(kind)


# ---------------------------------------------------------------------- #
# Samplers
# ---------------------------------------------------------------------- #
def sample_odp(rng: np.random.Generator, mean: Any, phi: float, size: Any = None) -> Any:
    """phi * Poisson(mean / phi); phi == 0 is the deterministic limit."""
    if phi == 0:
        return np.broadcast_to(np.asarray(mean, dtype=float), size or np.shape(mean)).copy()
    return phi * rng.poisson(np.asarray(mean) / phi, size=size)


def sample_gamma(rng: np.random.Generator, mean: FloatArray, nu: float) -> FloatArray:
    """Gamma(shape nu, rate nu / m) per cell; cells with m <= 0 give 0."""
    mean = np.asarray(mean, dtype=float)
    if not np.isfinite(nu):
        return np.maximum(mean, 0.0)
    scale = np.where(mean > 0, mean, 0.0) / nu
    return rng.gamma(nu, scale)


def sample_negbin_step(
    rng: np.random.Generator, cumulative: FloatArray, f: float
) -> FloatArray:
    """One development step: Theta ~ Gamma(C, 1), X ~ Poisson(Theta (f - 1))."""
    theta = rng.gamma(cumulative, 1.0)
    return rng.poisson(theta * (f - 1.0)).astype(float)


def generate_scenario(params: ModelParams, rng: np.random.Generator) -> ScenarioTruth:
    n = params.n
    inc: FloatArray
    if isinstance(params, LogNormalParams):
        factors = np.exp(rng.normal(params.mu, np.sqrt(params.sigma2), size=(n, n)))
        cum = np.cumprod(factors, axis=1)   # C_{i,0} = 1
        inc = np.diff(cum, axis=1, prepend=0.0)
    elif isinstance(params, NegBinomialParams):
        if params.base_column is None:
            raise InvalidParams("negative binomial scenarios need a base_column")
        f = params.dev.f
        inc = np.zeros((n, n))
        inc[:, 0] = params.base_column
        c = params.base_column.copy()
        for j in range(1, n):
            inc[:, j] = sample_negbin_step(rng, c, f[j - 1])
            c = c + inc[:, j]
    elif isinstance(params, ODPParams):
        inc = sample_odp(rng, params.means, params.phi)
    elif isinstance(params, GammaParams):
        inc = sample_gamma(rng, params.means, params.nu)
    elif isinstance(params, PoissonParams):
        inc = rng.poisson(params.means).astype(float)
    else:
        assert_never(params)
    full = Triangle(inc, Flavor.INCREMENTAL, Mask.FULL)
    return ScenarioTruth(
        full_square=full,
        upper=upper(full),
        true_uc=ultimate(full),
        generator=params,
    )


def _extend_rows(
    params: LogNormalParams | NegBinomialParams,
    t: Triangle,
    m: int,
    rng: np.random.Generator,
    target: Target,
) -> FloatArray:
    """Row-by-row recursive extension shared by the log-normal and NegBinom laws."""
    n = t.n
    last = latest_diagonal(t)
    out = np.full(m, observed_part(t, target))
    f = params.dev.f if isinstance(params, NegBinomialParams) else None
    for i in range(1, n):
        c = np.full(m, last[i])
        if f is not None and last[i] < 0:
            raise NonPositiveCumulative(i + 1, n - i)
        for j in range(n - i, n):
            if isinstance(params, LogNormalParams):
                step = np.exp(rng.normal(params.mu[j], np.sqrt(params.sigma2[j]), size=m))
                new = c * step
            else:
                assert f is not None
                new = c + sample_negbin_step(rng, c, f[j - 1])
            if target is Target.NEXT_YEAR_PAYMENTS:
                out += new - c
                break
            c = new
        else:
            out += c - last[i]
    return out


def predictive_sample(
    params: ModelParams,
    t: Triangle,
    m: int,
    rng: np.random.Generator,
    target: Target = Target.ULTIMATE_CLAIM,
) -> FloatArray:
    """``m`` draws of the target conditional on the observed upper triangle."""
    if params.n != t.n:
        raise InvalidParams(f"parameters are for n = {params.n}, triangle has n = {t.n}")
    if m < 1:
        raise ValueError("m must be >= 1")
    t = upper(t)
    if isinstance(params, (LogNormalParams, NegBinomialParams)):
        return _extend_rows(params, t, m, rng, target)

    base = observed_part(t, target)
    cells = future_cells(t.n, target)
    means = params.means[cells]
    if isinstance(params, ODPParams):
        return base + sample_odp(rng, means.sum(), params.phi, size=m)
    if isinstance(params, GammaParams):
        draws = sample_gamma(rng, np.broadcast_to(means, (m, means.size)), params.nu)
        return base + draws.sum(axis=1)
    if isinstance(params, PoissonParams):
        return base + rng.poisson(means.sum(), size=m).astype(float)
    assert_never(params)


def simulate_ultimate(params: ModelParams, t: Triangle, rng: np.random.Generator) -> float:
    return float(predictive_sample(params, t, 1, rng)[0])


# ---------------------------------------------------------------------- #
# JSON documents
# ---------------------------------------------------------------------- #
def params_to_dict(params: ModelParams) -> dict[str, Any]:
    doc: dict[str, Any] = {"model": params.kind.value}
    if isinstance(params, LogNormalParams):
        doc["mu"] = params.mu.tolist()
        doc["sigma2"] = params.sigma2.tolist()
        return doc
    if isinstance(params, NegBinomialParams):
        doc["gamma"] = params.pattern.gamma.tolist()
        if params.base_column is not None:
            doc["base_column"] = params.base_column.tolist()
        return doc
    doc["mu"] = params.mu_rows.tolist()
    doc["gamma"] = params.pattern.gamma.tolist()
    if isinstance(params, ODPParams):
        doc["phi"] = params.phi
    elif isinstance(params, GammaParams):
        doc["nu"] = params.nu
    return doc


def _normalised(doc: dict[str, Any]) -> tuple[FloatArray, float]:
    """Pattern rescaled to sum to 1, plus the factor the row levels absorb.

    Tabulated patterns are rounded; rescaling gamma and mu together keeps
    every cell mean mu_i * gamma_j unchanged.
    """
    gamma = _vector("gamma", doc["gamma"])
    total = float(gamma.sum())
    if total <= 0:
        raise InvalidParams("gamma must have positive total mass")
    if abs(total - 1.0) > PATTERN_SUM_TOL:
        logger.warning("payout pattern sums to %.6g; rescaling to 1", total)
    return gamma / total, total


def params_from_dict(doc: dict[str, Any]) -> ModelParams:
    try:
        kind = ModelKind(doc["model"])
    except (KeyError, ValueError):
        raise InvalidParams(
            f"'model' must be one of {', '.join(k.value for k in ModelKind)}"
        ) from None
    try:
        if kind is ModelKind.LOGNORMAL:
            return LogNormalParams(np.asarray(doc["mu"], float), np.asarray(doc["sigma2"], float))
        gamma, total = _normalised(doc)
        pattern = PayoutPattern(gamma)
        if kind is ModelKind.NEGBINOMIAL:
            base = doc.get("base_column")
            return NegBinomialParams(pattern, None if base is None else np.asarray(base, float))
        mu = _vector("mu", doc["mu"]) * total
        if kind is ModelKind.POISSON:
            return PoissonParams(mu, pattern)
        if kind is ModelKind.ODP:
            return ODPParams(mu, pattern, phi=float(doc["phi"]))
        if kind is ModelKind.GAMMA:
            return GammaParams(mu, pattern, nu=float(doc["nu"]))
    except KeyError as e:
        raise InvalidParams(f"{kind.value} parameters need field {e.args[0]!r}") from None
    except (TypeError, ValueError) as e:
        raise InvalidParams(f"malformed {kind.value} parameters: {e}") from None
    assert_never(kind)


# Gamma case-study generator (parameters fitted to RAA).
GAMMA_CASE_STUDY: dict[str, Any] = {
    "model": "gamma",
    "mu": [21048, 17507, 23723, 29562, 25751, 18680, 15676, 22141, 19019, 18402],
    "gamma": [0.112, 0.224, 0.209, 0.147, 0.119, 0.092, 0.037, 0.031, 0.016, 0.009],
    "nu": 2.22,
}
