# src/reservebench/examples.py
"""
Two toy forecasting problems scored end to end, each with four actuaries:

ex1  xi ~ LN(mu, 1), mu ~ N(0, 1)
ex2  eta ~ Poisson(x lambda), lambda ~ Gamma(shape 1.5, scale 0.5), x = 1000

    actuary     ex1                              ex2
    ideal       LN(mu, 1)                        Poisson(x lambda)
    long-term   LN(0, 2)                         NegBin(1.5, 1 / (1 + 0.5 x))
    ordinary    1/2 LN(mu, 1) + 1/2 LN(mu+d, 1)  1/2 Poisson(x lambda) + 1/2 Poisson(x lambda d)
                d = +-1                          d = 1 +- 1/10
    intern      LN(-mu, s2), s2 = 4 mu + 1       NegBin(2 x lambda, 2/3)
                for mu >= 0, else 1

The intern's ex1 log-location is -mu by default (InternLocation.MIRRORED).
InternLocation.ABSOLUTE uses -|mu| instead, under which the intern equals the
ideal actuary whenever mu < 0.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from typing_extensions import assert_never

from .errors import ConfigError, UnsupportedCombination
from .scoring import (
    PredictiveSample,
    coverage_and_width,
    crps,
    pit,
    pit_histogram,
)

logger = logging.getLogger(__name__)

X = 1000.0
LAMBDA_SHAPE = 1.5
LAMBDA_SCALE = 0.5
DEFAULT_LEVELS = (0.66, 0.90)

# Reference Monte Carlo values for ex1; there is no closed form.
EX1_REFERENCE_MSEP = {"ideal": 34.5, "long_term": 47.2, "ordinary": 37.2, "intern": 34.5}


class Setting(str, Enum):
    LOGNORMAL_EX1 = "ex1"
    POISSON_EX2 = "ex2"


class Actuary(str, Enum):
    IDEAL = "ideal"
    LONG_TERM = "long_term"
    ORDINARY = "ordinary"
    INTERN = "intern"


class InternLocation(str, Enum):
    MIRRORED = "mirrored"   # LN(-mu, s2)
    ABSOLUTE = "absolute"   # LN(-|mu|, s2)


@dataclass(frozen=True)
class ActuaryForecast:
    kind: Actuary
    setting: Setting
    latent: float       # mu (ex1) or lambda (ex2)
    delta: float = 0.0  # the ordinary actuary's estimation error
    intern: InternLocation = InternLocation.MIRRORED

    def sample(self, m: int, rng: np.random.Generator) -> PredictiveSample:
        if self.setting is Setting.LOGNORMAL_EX1:
            values = self._lognormal(m, rng)
        else:
            values = self._poisson(m, rng)
        return PredictiveSample(values, self.kind.value)

    def _lognormal(self, m: int, rng: np.random.Generator) -> np.ndarray:
        mu = self.latent
        if self.kind is Actuary.IDEAL:
            return rng.lognormal(mu, 1.0, size=m)
        if self.kind is Actuary.LONG_TERM:
            return rng.lognormal(0.0, np.sqrt(2.0), size=m)
        if self.kind is Actuary.ORDINARY:
            shifted = rng.random(m) < 0.5
            return rng.lognormal(mu + shifted * self.delta, 1.0)
        if self.kind is Actuary.INTERN:
            sigma2 = 4.0 * mu + 1.0 if mu >= 0 else 1.0
            loc = -abs(mu) if self.intern is InternLocation.ABSOLUTE else -mu
            return rng.lognormal(loc, np.sqrt(sigma2), size=m)
        assert_never(self.kind)

    def _poisson(self, m: int, rng: np.random.Generator) -> np.ndarray:
        lam = X * self.latent
        if self.kind is Actuary.IDEAL:
            return rng.poisson(lam, size=m).astype(float)
        if self.kind is Actuary.LONG_TERM:
            return rng.negative_binomial(LAMBDA_SHAPE, 1.0 / (1.0 + X * LAMBDA_SCALE), size=m)
        if self.kind is Actuary.ORDINARY:
            shifted = rng.random(m) < 0.5
            return rng.poisson(lam * np.where(shifted, self.delta, 1.0)).astype(float)
        if self.kind is Actuary.INTERN:
            return rng.negative_binomial(2.0 * lam, 2.0 / 3.0, size=m).astype(float)
        assert_never(self.kind)


@dataclass
class ActuarySummary:
    actuary: Actuary
    mean_crps: float
    crps_se: float
    coverage: dict[float, float]     # percent
    avg_width: dict[float, float]
    msep: float
    msep_se: float
    pit_counts: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class MsepReference:
    value: float
    analytic: bool


def analytic_msep(setting: Setting | str, kind: Actuary | str) -> MsepReference:
    try:
        setting = Setting(setting)
        kind = Actuary(kind)
    except ValueError:
        raise UnsupportedCombination(f"no MSEP reference for ({setting}, {kind})") from None
    if setting is Setting.LOGNORMAL_EX1:
        return MsepReference(EX1_REFERENCE_MSEP[kind.value], analytic=False)
    base = X * LAMBDA_SHAPE * LAMBDA_SCALE
    if kind in (Actuary.IDEAL, Actuary.INTERN):
        return MsepReference(base, analytic=True)
    if kind is Actuary.LONG_TERM:
        return MsepReference(base * (1.0 + X * LAMBDA_SCALE), analytic=True)
    if kind is Actuary.ORDINARY:
        return MsepReference(
            base * (1.0 + X * (1.0 + LAMBDA_SHAPE) * LAMBDA_SCALE / 400.0), analytic=True
        )
    assert_never(kind)


def _simulate_truth(setting: Setting, rng: np.random.Generator) -> tuple[float, float, float]:
    """(latent, realisation, ordinary actuary's delta) for one simulated year."""
    if setting is Setting.LOGNORMAL_EX1:
        mu = float(rng.normal())
        xi = float(rng.lognormal(mu, 1.0))
        delta = 1.0 if rng.random() < 0.5 else -1.0
        return mu, xi, delta
    lam = float(rng.gamma(LAMBDA_SHAPE, LAMBDA_SCALE))
    eta = float(rng.poisson(X * lam))
    delta = 1.1 if rng.random() < 0.5 else 0.9
    return lam, eta, delta


def run_example(
    setting: Setting,
    n_sims: int,
    m_draws: int,
    seed: int,
    levels: tuple[float, ...] = DEFAULT_LEVELS,
    pit_bins: int = 20,
    intern: InternLocation = InternLocation.MIRRORED,
) -> dict[Actuary, ActuarySummary]:
    """Simulate ``n_sims`` years and score every actuary on each of them.

    Simulation s draws everything from SeedSequence([seed, s]).
    """
    if n_sims < 1 or m_draws < 2:
        raise ConfigError("need n_sims >= 1 and m_draws >= 2")
    randomize = setting is Setting.POISSON_EX2
    kinds = list(Actuary)
    crps_v = np.empty((len(kinds), n_sims))
    msep_v = np.empty((len(kinds), n_sims))
    pits = np.empty((len(kinds), n_sims))
    covered = {lv: np.zeros(len(kinds)) for lv in levels}
    widths = {lv: np.zeros(len(kinds)) for lv in levels}

    for s in range(n_sims):
        rng = np.random.default_rng(np.random.SeedSequence([seed, s]))
        latent, obs, delta = _simulate_truth(setting, rng)
        for k, kind in enumerate(kinds):
            sample = ActuaryForecast(kind, setting, latent, delta, intern).sample(m_draws, rng)
            crps_v[k, s] = crps(sample, obs)
            msep_v[k, s] = (obs - sample.mean()) ** 2
            pits[k, s] = pit(sample, obs, randomize=randomize, rng=rng)
            for lv in levels:
                hit, w = coverage_and_width(sample, obs, lv)
                covered[lv][k] += hit
                widths[lv][k] += w

    out: dict[Actuary, ActuarySummary] = {}
    root_n = np.sqrt(n_sims)
    for k, kind in enumerate(kinds):
        _, counts = pit_histogram(pits[k], pit_bins)
        out[kind] = ActuarySummary(
            actuary=kind,
            mean_crps=float(crps_v[k].mean()),
            crps_se=float(crps_v[k].std(ddof=1) / root_n) if n_sims > 1 else 0.0,
            coverage={lv: 100.0 * covered[lv][k] / n_sims for lv in levels},
            avg_width={lv: float(widths[lv][k] / n_sims) for lv in levels},
            msep=float(msep_v[k].mean()),
            msep_se=float(msep_v[k].std(ddof=1) / root_n) if n_sims > 1 else 0.0,
            pit_counts=counts.tolist(),
        )
    logger.info("example %s: %d simulations x %d draws", setting.value, n_sims, m_draws)
    return out


def example_table_csv(setting: Setting, results: dict[Actuary, ActuarySummary]) -> str:
    """CSV rendering of the coverage / CRPS / MSEP tables for one setting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    levels = sorted(next(iter(results.values())).coverage)
    header = ["actuary", "mean_crps", "crps_se"]
    header += [f"coverage_{round(lv * 100)}" for lv in levels]
    header += [f"width_{round(lv * 100)}" for lv in levels]
    header += ["msep", "msep_se", "reference_msep", "reference_is_analytic"]
    writer.writerow(header)
    for kind, r in results.items():
        ref = analytic_msep(setting, kind)
        row: list[object] = [kind.value, r.mean_crps, r.crps_se]
        row += [r.coverage[lv] for lv in levels]
        row += [r.avg_width[lv] for lv in levels]
        row += [r.msep, r.msep_se, ref.value, str(ref.analytic).lower()]
        writer.writerow(row)
    return buf.getvalue()
