# src/reservebench/harness.py
"""
Three-step Monte Carlo study.

1. Draw N scenarios (full square + upper triangle + true target) from a known
   generator.
2. For every scenario and method, build an M-draw predictive sample from the
   upper triangle alone.  ``ideal`` samples from the generator itself and
   always runs, since its draws are the MSEP oracle.
3. Score each (scenario, method) pair and aggregate per method.

Scenario i / method k draws from ``SeedSequence([master_seed, i, k])`` where k
is the method's position in ``Method``; scenario generation uses
k = len(Method).  Results therefore do not depend on the worker count.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from collections import Counter
from collections.abc import Iterable, Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Any

import numpy as np
from tqdm import tqdm

from .chainladder import ResidualAdjustment
from .errors import ConfigError, InvalidParams, ReserveError, StudyFailure
from .models import (
    ModelKind,
    ModelParams,
    fit,
    generate_scenario,
    params_from_dict,
    params_to_dict,
    predictive_sample,
)
from .resampling import (
    BootstrapConfig,
    UnifnormVariance,
    bootstrap_predict,
    uniform_predict,
    unifnorm_predict,
)
from .scoring import (
    PredictiveSample,
    below_quantiles,
    default_grid,
    pit_histogram,
    pit_uniformity,
    score_scenario,
)
from .triangle import Target, Triangle

logger = logging.getLogger(__name__)


class Method(str, Enum):
    LOGNORMAL = "lognormal"
    NEGBINOMIAL = "negbinomial"
    POISSON = "poisson"
    ODP = "odp"
    GAMMA = "gamma"
    UNIFORM = "uniform"
    UNIFNORM = "unifnorm"
    BOOTSTRAP_GAMMA = "bootstrap_gamma"
    BOOTSTRAP_ODP = "bootstrap_odp"
    IDEAL = "ideal"

    @property
    def index(self) -> int:
        return list(Method).index(self)


PARAMETRIC = {
    Method.LOGNORMAL: ModelKind.LOGNORMAL,
    Method.NEGBINOMIAL: ModelKind.NEGBINOMIAL,
    Method.POISSON: ModelKind.POISSON,
    Method.ODP: ModelKind.ODP,
    Method.GAMMA: ModelKind.GAMMA,
}
NEEDS_DISPERSION = {Method.ODP, Method.GAMMA, Method.BOOTSTRAP_GAMMA, Method.BOOTSTRAP_ODP}
COUNT_MODELS = {ModelKind.POISSON, ModelKind.NEGBINOMIAL}

PRESETS: dict[str, tuple[int, int]] = {
    "paper": (2000, 5000),
    "desk": (200, 1000),
}
DEFAULT_LEVELS = (0.6667, 0.90)


def _enum_list(cls: type[Enum], values: Iterable[Any], name: str) -> tuple[Any, ...]:
    try:
        return tuple(cls(v) for v in values)
    except ValueError as e:
        raise ConfigError(f"{name}: {e}") from None


@dataclass(frozen=True, eq=False)
class StudyConfig:
    generator: ModelParams
    n_scenarios: int = PRESETS["desk"][0]
    m_draws: int = PRESETS["desk"][1]
    methods: tuple[Method, ...] = tuple(Method)
    energy_beta: float = 0.5
    intervals: tuple[float, ...] = DEFAULT_LEVELS
    pit_bins: int = 20
    master_seed: int = 0
    target: Target = Target.ULTIMATE_CLAIM
    residual_adjustment: ResidualAdjustment = ResidualAdjustment.PAPER
    unifnorm_variance: UnifnormVariance = UnifnormVariance.SQUARED
    randomized_pit: bool | None = None   # None: randomize for count generators
    energy_pairs: int | None = None      # None: exhaustive up to 2000 draws
    failure_threshold: float = 0.5
    pp_grid_size: int = 99

    def __post_init__(self) -> None:
        if self.n_scenarios < 1:
            raise ConfigError("n_scenarios must be >= 1")
        if self.m_draws < 2:
            raise ConfigError("m_draws must be >= 2")
        if not self.methods:
            raise ConfigError("methods must not be empty")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods lists a method twice")
        if not self.intervals or not all(0 < lv < 1 for lv in self.intervals):
            raise ConfigError("intervals must be levels in (0, 1)")
        if not 0 < self.energy_beta < 2:
            raise ConfigError("energy_beta must lie in (0, 2)")
        if self.pit_bins < 1 or self.pp_grid_size < 1:
            raise ConfigError("pit_bins and pp_grid_size must be >= 1")
        if not 0 <= self.failure_threshold <= 1:
            raise ConfigError("failure_threshold must lie in [0, 1]")
        if self.energy_pairs is not None and self.energy_pairs < 0:
            raise ConfigError("energy_pairs must be >= 0")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be non-negative")
        if self.generator.n < 3 and NEEDS_DISPERSION.intersection(self.methods):
            raise ConfigError("ODP, Gamma and bootstrap methods need a generator with n >= 3")

    @property
    def ordered_methods(self) -> tuple[Method, ...]:
        return tuple(m for m in Method if m in self.methods)

    @property
    def randomize_pit(self) -> bool:
        if self.randomized_pit is not None:
            return self.randomized_pit
        return self.generator.kind in COUNT_MODELS

    def with_preset(self, name: str) -> StudyConfig:
        try:
            n, m = PRESETS[name]
        except KeyError:
            raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
        return dataclasses.replace(self, n_scenarios=n, m_draws=m)

    def to_dict(self) -> dict[str, Any]:
        return {
            "generator": params_to_dict(self.generator),
            "n_scenarios": self.n_scenarios,
            "m_draws": self.m_draws,
            "methods": [m.value for m in self.ordered_methods],
            "energy_beta": self.energy_beta,
            "intervals": list(self.intervals),
            "pit_bins": self.pit_bins,
            "master_seed": self.master_seed,
            "target": self.target.value,
            "residual_adjustment": self.residual_adjustment.value,
            "unifnorm_variance": self.unifnorm_variance.value,
            "randomized_pit": self.randomized_pit,
            "energy_pairs": self.energy_pairs,
            "failure_threshold": self.failure_threshold,
            "pp_grid_size": self.pp_grid_size,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> StudyConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown study config field(s): {', '.join(sorted(unknown))}")
        if "generator" not in doc:
            raise ConfigError("study config needs a 'generator'")
        kw: dict[str, Any] = dict(doc)
        try:
            kw["generator"] = params_from_dict(doc["generator"])
        except InvalidParams as e:
            raise ConfigError(f"generator: {e}") from None
        if "methods" in kw:
            kw["methods"] = _enum_list(Method, kw["methods"], "methods")
        if "intervals" in kw:
            kw["intervals"] = tuple(float(v) for v in kw["intervals"])
        for name, enum in (
            ("target", Target),
            ("residual_adjustment", ResidualAdjustment),
            ("unifnorm_variance", UnifnormVariance),
        ):
            if name in kw:
                kw[name] = _enum_list(enum, [kw[name]], name)[0]
        for name in ("n_scenarios", "m_draws", "pit_bins", "master_seed", "pp_grid_size"):
            if name in kw and (isinstance(kw[name], bool) or not isinstance(kw[name], int)):
                raise ConfigError(f"{name} must be an integer")
        for name in ("energy_beta", "failure_threshold"):
            if name in kw and (isinstance(kw[name], bool) or not isinstance(kw[name], int | float)):
                raise ConfigError(f"{name} must be a number")
        pairs = kw.get("energy_pairs")
        if pairs is not None and (isinstance(pairs, bool) or not isinstance(pairs, int)):
            raise ConfigError("energy_pairs must be an integer or null")
        return cls(**kw)


# ---------------------------------------------------------------------- #
# Report types
# ---------------------------------------------------------------------- #
@dataclass
class ScenarioRecord:
    method: str
    scenario: int
    observed: float
    failure: str | None = None
    crps: float | None = None
    energy: float | None = None
    pit: float | None = None
    msep: float | None = None
    msep_variance: float | None = None
    msep_bias: float | None = None
    covered: list[bool] = field(default_factory=list)
    width: list[float] = field(default_factory=list)
    replicate_failures: int = 0
    warnings: int = 0


@dataclass
class MethodSummary:
    method: str
    scenarios: int
    failed: int
    failure_reasons: dict[str, int]
    mean_crps: float | None
    crps_se: float | None
    mean_energy: float | None
    mean_msep: float | None
    median_msep: float | None
    coverage: list[float]        # percent, one entry per interval level
    avg_width: list[float]
    pit_counts: list[int]
    pit_pvalue: float | None
    pp_curve: list[float]
    replicate_failures: int = 0
    warnings: int = 0


@dataclass
class StudyReport:
    seed: int
    n_scenarios: int
    m_draws: int
    target: str
    energy_beta: float
    intervals: list[float]
    pit_bins: int
    pp_grid: list[float]
    generator: dict[str, Any]
    methods: list[MethodSummary]
    records: list[ScenarioRecord]
    wall_time: float | None = None

    def method(self, name: str | Method) -> MethodSummary:
        key = Method(name).value
        for summary in self.methods:
            if summary.method == key:
                return summary
        raise KeyError(key)

    def to_dict(self) -> dict[str, Any]:
        doc = dataclasses.asdict(self)
        if self.wall_time is None:
            del doc["wall_time"]
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> StudyReport:
        kw = dict(doc)
        kw["methods"] = [MethodSummary(**m) for m in doc["methods"]]
        kw["records"] = [ScenarioRecord(**r) for r in doc["records"]]
        return cls(**kw)


# ---------------------------------------------------------------------- #
# Step 2: predictive samples
# ---------------------------------------------------------------------- #
def _rng(cfg: StudyConfig, scenario: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.master_seed, scenario, stream]))


def predict(
    method: Method, cfg: StudyConfig, upper_t: Triangle, rng: np.random.Generator
) -> PredictiveSample:
    m, target = cfg.m_draws, cfg.target
    if method is Method.IDEAL:
        return PredictiveSample(predictive_sample(cfg.generator, upper_t, m, rng, target), "ideal")
    if method in PARAMETRIC:
        params = fit(PARAMETRIC[method], upper_t)
        return PredictiveSample(predictive_sample(params, upper_t, m, rng, target), method.value)
    if method is Method.UNIFORM:
        return uniform_predict(upper_t, m, rng, target)
    if method is Method.UNIFNORM:
        return unifnorm_predict(upper_t, m, rng, target, cfg.unifnorm_variance)
    power = 2 if method is Method.BOOTSTRAP_GAMMA else 1
    boot = BootstrapConfig(m, power, cfg.residual_adjustment)
    return bootstrap_predict(upper_t, boot, rng, target)


@dataclass
class _Outcome:
    record: ScenarioRecord
    below: np.ndarray | None


def run_scenario(cfg: StudyConfig, i: int) -> list[_Outcome]:
    """Steps 1 to 3 for scenario ``i``; one outcome per configured method."""
    truth = generate_scenario(cfg.generator, _rng(cfg, i, len(Method)))
    obs = truth.true_value(cfg.target)
    grid = default_grid(cfg.pp_grid_size)

    rngs = {method: _rng(cfg, i, method.index) for method in Method}
    oracle = predict(Method.IDEAL, cfg, truth.upper, rngs[Method.IDEAL])

    out = []
    for method in cfg.ordered_methods:
        rng = rngs[method]
        record = ScenarioRecord(method.value, i, obs)
        try:
            sample = oracle if method is Method.IDEAL else predict(method, cfg, truth.upper, rng)
            score = score_scenario(
                sample,
                obs,
                beta=cfg.energy_beta,
                levels=cfg.intervals,
                rng=rng,
                oracle=oracle,
                randomize_pit=cfg.randomize_pit,
                energy_pairs=cfg.energy_pairs,
            )
        except (ReserveError, ValueError, FloatingPointError) as e:
            record.failure = getattr(e, "code", "numeric")
            logger.debug("scenario %d, %s failed: %s", i, method.value, e)
            out.append(_Outcome(record, None))
            continue
        record.crps, record.energy, record.pit = score.crps, score.energy, score.pit
        if score.msep is not None:
            record.msep = score.msep.value
            record.msep_variance = score.msep.variance_part
            record.msep_bias = score.msep.bias_part
        record.covered = [score.covered[lv] for lv in cfg.intervals]
        record.width = [score.width[lv] for lv in cfg.intervals]
        record.replicate_failures = sample.failures
        record.warnings = sample.warnings
        out.append(_Outcome(record, below_quantiles(sample, obs, grid)))
    return out


# ---------------------------------------------------------------------- #
# Step 3: aggregation
# ---------------------------------------------------------------------- #
def _finite_or_none(x: float) -> float | None:
    return float(x) if np.isfinite(x) else None


def summarize(cfg: StudyConfig, method: Method, outcomes: Sequence[_Outcome]) -> MethodSummary:
    ok = [o for o in outcomes if o.record.failure is None]
    reasons = Counter(str(o.record.failure) for o in outcomes if o.record.failure is not None)
    recs = [o.record for o in ok]
    n_ok = len(recs)
    levels = len(cfg.intervals)

    def mean_of(values: list[float]) -> float | None:
        return float(np.mean(values)) if values else None

    crps_v = [r.crps for r in recs if r.crps is not None]
    msep_v = [r.msep for r in recs if r.msep is not None]
    _, counts = pit_histogram([r.pit for r in recs if r.pit is not None], cfg.pit_bins)
    pp = np.mean([o.below for o in ok], axis=0).tolist() if ok else []
    return MethodSummary(
        method=method.value,
        scenarios=n_ok,
        failed=len(outcomes) - n_ok,
        failure_reasons=dict(sorted(reasons.items())),
        mean_crps=mean_of(crps_v),
        crps_se=float(np.std(crps_v, ddof=1) / np.sqrt(n_ok)) if n_ok > 1 else None,
        mean_energy=mean_of([r.energy for r in recs if r.energy is not None]),
        mean_msep=mean_of(msep_v),
        median_msep=float(np.median(msep_v)) if msep_v else None,
        coverage=[
            100.0 * sum(r.covered[k] for r in recs) / n_ok if n_ok else 0.0 for k in range(levels)
        ],
        avg_width=[
            float(np.mean([r.width[k] for r in recs])) if n_ok else 0.0 for k in range(levels)
        ],
        pit_counts=counts.tolist(),
        pit_pvalue=_finite_or_none(pit_uniformity(counts)),
        pp_curve=pp,
        replicate_failures=sum(r.replicate_failures for r in recs),
        warnings=sum(r.warnings for r in recs),
    )


def _scenario_outcomes(
    cfg: StudyConfig, workers: int, progress: bool
) -> Iterator[list[_Outcome]]:
    task = partial(run_scenario, cfg)
    scenarios = range(cfg.n_scenarios)
    bar = partial(tqdm, total=cfg.n_scenarios, desc="scenarios", disable=not progress)
    if workers <= 1:
        yield from bar(map(task, scenarios))
        return
    chunk = max(1, cfg.n_scenarios // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as executor:
        # map() yields in submission order, so the reduce is order-independent
        yield from bar(executor.map(task, scenarios, chunksize=chunk))


def run_study(
    cfg: StudyConfig,
    workers: int = 1,
    progress: bool = False,
    timing: bool = False,
) -> StudyReport:
    methods = cfg.ordered_methods
    logger.info(
        "study: seed=%d N=%d M=%d target=%s methods=%s",
        cfg.master_seed,
        cfg.n_scenarios,
        cfg.m_draws,
        cfg.target.value,
        ",".join(m.value for m in methods),
    )
    start = time.perf_counter()
    per_method: dict[Method, list[_Outcome]] = {m: [] for m in methods}
    for outcomes in _scenario_outcomes(cfg, workers, progress):
        for method, outcome in zip(methods, outcomes):
            per_method[method].append(outcome)

    summaries = [summarize(cfg, m, per_method[m]) for m in methods]
    elapsed = time.perf_counter() - start
    logger.info("study finished in %.1f s", elapsed)

    failing = []
    for s in summaries:
        if s.failed:
            logger.warning(
                "%s failed on %d/%d scenarios (%s)",
                s.method,
                s.failed,
                cfg.n_scenarios,
                ", ".join(f"{k}={v}" for k, v in s.failure_reasons.items()),
            )
        if s.failed / cfg.n_scenarios > cfg.failure_threshold:
            failing.append(s.method)
    if failing:
        raise StudyFailure(
            f"method(s) {', '.join(failing)} failed on more than "
            f"{cfg.failure_threshold:.0%} of scenarios"
        )

    records = [o.record for m in methods for o in per_method[m]]
    return StudyReport(
        seed=cfg.master_seed,
        n_scenarios=cfg.n_scenarios,
        m_draws=cfg.m_draws,
        target=cfg.target.value,
        energy_beta=cfg.energy_beta,
        intervals=list(cfg.intervals),
        pit_bins=cfg.pit_bins,
        pp_grid=default_grid(cfg.pp_grid_size).tolist(),
        generator=params_to_dict(cfg.generator),
        methods=summaries,
        records=records,
        wall_time=elapsed if timing else None,
    )
