from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from reservebench.chainladder import ResidualAdjustment
from reservebench.errors import ConfigError, StudyFailure
from reservebench.harness import (
    PRESETS,
    Method,
    StudyConfig,
    StudyReport,
    predict,
    run_scenario,
    run_study,
)
from reservebench.models import generate_scenario, params_from_dict
from reservebench.triangle import Target


@pytest.fixture
def small_cfg(small_generator) -> StudyConfig:
    return StudyConfig(small_generator, n_scenarios=6, m_draws=200, master_seed=5)


class TestStudyConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_scenarios": 0},
            {"m_draws": 1},
            {"methods": ()},
            {"methods": (Method.GAMMA, Method.GAMMA)},
            {"intervals": (0.5, 1.0)},
            {"intervals": ()},
            {"energy_beta": 2.0},
            {"pit_bins": 0},
            {"failure_threshold": 1.5},
            {"energy_pairs": -1},
            {"master_seed": -3},
        ],
    )
    def test_rejects(self, small_generator, kwargs):
        with pytest.raises(ConfigError):
            StudyConfig(small_generator, **kwargs)

    def test_dispersion_methods_need_three_rows(self):
        gen = params_from_dict({"model": "poisson", "mu": [10.0, 10.0], "gamma": [0.5, 0.5]})
        with pytest.raises(ConfigError):
            StudyConfig(gen, methods=(Method.ODP,))
        StudyConfig(gen, methods=(Method.POISSON, Method.IDEAL))

    def test_method_order(self, small_generator):
        cfg = StudyConfig(small_generator, methods=(Method.IDEAL, Method.UNIFORM, Method.LOGNORMAL))
        assert cfg.ordered_methods == (Method.LOGNORMAL, Method.UNIFORM, Method.IDEAL)
        assert Method.IDEAL.index == len(Method) - 1

    def test_randomized_pit(self, small_generator):
        assert not StudyConfig(small_generator).randomize_pit
        assert StudyConfig(small_generator, randomized_pit=True).randomize_pit
        gen = params_from_dict({"model": "poisson", "mu": [10.0] * 3, "gamma": [0.5, 0.25, 0.25]})
        assert StudyConfig(gen).randomize_pit

    def test_presets(self, small_cfg):
        assert (small_cfg.with_preset("paper").n_scenarios,
                small_cfg.with_preset("paper").m_draws) == PRESETS["paper"]
        with pytest.raises(ConfigError):
            small_cfg.with_preset("huge")

    def test_dict_identity(self, small_cfg):
        cfg = dataclasses.replace(small_cfg, target=Target.NEXT_YEAR_PAYMENTS, energy_pairs=100)
        doc = cfg.to_dict()
        assert StudyConfig.from_dict(doc).to_dict() == doc

    @pytest.mark.parametrize(
        "patch",
        [
            {"colour": "blue"},
            {"methods": ["gamma", "chain-ladder"]},
            {"target": "someday"},
            {"n_scenarios": "10"},
            {"m_draws": True},
            {"energy_beta": "0.5"},
            {"failure_threshold": "half"},
            {"energy_pairs": 1.5},
            {"energy_pairs": "100"},
            {"generator": {"model": "gamma", "mu": [1.0, 2.0], "gamma": [0.5, 0.5]}},
        ],
    )
    def test_from_dict_errors(self, small_cfg, patch):
        doc = small_cfg.to_dict() | patch
        with pytest.raises(ConfigError):
            StudyConfig.from_dict(doc)

    def test_from_dict_needs_generator(self):
        with pytest.raises(ConfigError):
            StudyConfig.from_dict({"n_scenarios": 3})


class TestPredict:
    @pytest.mark.parametrize("method", list(Method))
    def test_every_method(self, small_cfg, method, rng):
        truth = generate_scenario(small_cfg.generator, rng)
        s = predict(method, small_cfg, truth.upper, rng)
        # degenerate bootstrap replicates are dropped, not redrawn
        assert s.values.shape[0] + s.failures == small_cfg.m_draws
        assert s.method_id == method.value
        assert np.all(np.isfinite(s.values))

    def test_scenario_outcomes(self, small_cfg):
        outcomes = run_scenario(small_cfg, 0)
        assert [o.record.method for o in outcomes] == [m.value for m in Method]
        assert len({o.record.observed for o in outcomes}) == 1
        ideal = outcomes[-1].record
        assert ideal.msep_bias == 0.0
        assert ideal.msep == ideal.msep_variance


class TestRunStudy:
    def test_shape(self, small_cfg):
        report = run_study(small_cfg)
        n, k = small_cfg.n_scenarios, len(Method)
        assert len(report.records) == n * k
        assert [m.method for m in report.methods] == [m.value for m in Method]
        assert [r.scenario for r in report.records[:n]] == list(range(n))
        assert report.wall_time is None
        for summary in report.methods:
            assert summary.scenarios + summary.failed == n
            assert len(summary.coverage) == len(small_cfg.intervals)
            assert sum(summary.pit_counts) == summary.scenarios
            assert len(summary.pp_curve) == 99
        assert report.method("ideal").failed == 0
        assert report.method(Method.GAMMA).failed == 0

    def test_ideal_has_no_bias(self, small_cfg):
        report = run_study(small_cfg)
        assert all(r.msep_bias == 0.0 for r in report.records if r.method == "ideal")

    def test_reproducible(self, small_cfg):
        assert run_study(small_cfg).to_dict() == run_study(small_cfg).to_dict()

    def test_worker_count_does_not_matter(self, small_cfg):
        assert run_study(small_cfg, workers=1).to_dict() == run_study(small_cfg, workers=2).to_dict()

    def test_seed_matters(self, small_cfg):
        other = dataclasses.replace(small_cfg, master_seed=6)
        assert run_study(small_cfg).records[0].observed != run_study(other).records[0].observed

    def test_timing(self, small_cfg):
        cfg = dataclasses.replace(small_cfg, n_scenarios=1, methods=(Method.IDEAL,))
        report = run_study(cfg, timing=True)
        assert report.wall_time is not None and report.wall_time >= 0.0
        assert "wall_time" in report.to_dict()

    def test_next_year_target(self, small_cfg, small_generator):
        cfg = dataclasses.replace(
            small_cfg, target=Target.NEXT_YEAR_PAYMENTS, methods=(Method.GAMMA, Method.IDEAL)
        )
        report = run_study(cfg)
        for i in range(cfg.n_scenarios):
            seed = np.random.SeedSequence([cfg.master_seed, i, len(Method)])
            truth = generate_scenario(small_generator, np.random.default_rng(seed))
            assert report.records[i].observed == truth.true_value(Target.NEXT_YEAR_PAYMENTS)

    def test_report_dict_roundtrip(self, small_cfg):
        report = run_study(dataclasses.replace(small_cfg, methods=(Method.POISSON, Method.IDEAL)))
        doc = report.to_dict()
        assert StudyReport.from_dict(doc).to_dict() == doc


class TestFailures:
    @pytest.fixture
    def sparse_cfg(self):
        gen = params_from_dict({"model": "poisson", "mu": [0.5] * 4, "gamma": [0.5, 0.25, 0.125, 0.125]})
        return StudyConfig(
            gen,
            n_scenarios=20,
            m_draws=50,
            methods=(Method.LOGNORMAL, Method.POISSON, Method.IDEAL),
            failure_threshold=1.0,
        )

    def test_failures_are_counted(self, sparse_cfg):
        report = run_study(sparse_cfg)
        lognormal = report.method(Method.LOGNORMAL)
        assert lognormal.failed > 0
        assert set(lognormal.failure_reasons) == {"non-positive-cumulative"}
        assert sum(lognormal.failure_reasons.values()) == lognormal.failed
        assert report.method(Method.IDEAL).failed == 0
        failed = [r for r in report.records if r.failure is not None]
        assert all(r.crps is None and r.covered == [] for r in failed)

    def test_threshold(self, sparse_cfg):
        with pytest.raises(StudyFailure) as exc:
            run_study(dataclasses.replace(sparse_cfg, failure_threshold=0.0))
        assert exc.value.exit_code == 3


@pytest.mark.slow
class TestGammaCaseStudy:
    @pytest.fixture(scope="class")
    def config(self):
        gen = params_from_dict(
            {
                "model": "gamma",
                "mu": [21048, 17507, 23723, 29562, 25751, 18680, 15676, 22141, 19019, 18402],
                "gamma": [0.112, 0.224, 0.209, 0.147, 0.119, 0.092, 0.037, 0.031, 0.016, 0.009],
                "nu": 2.22,
            }
        )
        return StudyConfig(gen, master_seed=2013).with_preset("desk")

    @pytest.fixture(scope="class")
    def report(self, config):
        return run_study(config, workers=2)

    @pytest.fixture(scope="class")
    def dof_report(self, config):
        cfg = dataclasses.replace(
            config,
            methods=(Method.GAMMA, Method.BOOTSTRAP_GAMMA, Method.BOOTSTRAP_ODP, Method.IDEAL),
            residual_adjustment=ResidualAdjustment.DOF,
        )
        return run_study(cfg, workers=2)

    def test_ideal_is_best(self, report):
        ideal = report.method(Method.IDEAL)
        for m in report.methods:
            if m.method != "ideal":
                assert ideal.mean_crps > m.mean_crps, m.method

    def test_ideal_coverage(self, report):
        cov66, cov90 = report.method(Method.IDEAL).coverage
        assert cov66 == pytest.approx(66.67, abs=9.0)
        assert cov90 == pytest.approx(90.0, abs=7.0)

    def test_count_models_are_too_narrow(self, report):
        assert report.method(Method.POISSON).coverage[1] < 10.0
        assert report.method(Method.NEGBINOMIAL).coverage[1] < 10.0

    def test_subset_reuses_method_streams(self, report, dof_report):
        assert dof_report.method(Method.GAMMA).mean_crps == report.method(Method.GAMMA).mean_crps

    def test_bootstrap_is_wide_with_dof_scaling(self, dof_report):
        gamma = dof_report.method(Method.GAMMA)
        boot = dof_report.method(Method.BOOTSTRAP_GAMMA)
        assert boot.avg_width[1] >= 2.0 * gamma.avg_width[1]
        assert boot.coverage[1] > gamma.coverage[1]
        assert dof_report.method(Method.BOOTSTRAP_ODP).coverage[1] > gamma.coverage[1]

    def test_dof_scaling_widens_the_bootstrap(self, report, dof_report):
        for method in (Method.BOOTSTRAP_GAMMA, Method.BOOTSTRAP_ODP):
            assert dof_report.method(method).avg_width[1] > report.method(method).avg_width[1]

    @pytest.mark.parametrize(
        "method",
        [Method.ODP, Method.POISSON, Method.NEGBINOMIAL, Method.LOGNORMAL,
         Method.UNIFORM, Method.UNIFNORM],
    )
    def test_gamma_beats_parametric_and_factor_methods(self, report, method):
        assert report.method(Method.GAMMA).mean_crps > report.method(method).mean_crps

    def test_bootstraps_agree(self, report):
        a = report.method(Method.BOOTSTRAP_GAMMA).mean_crps
        b = report.method(Method.BOOTSTRAP_ODP).mean_crps
        assert a == pytest.approx(b, rel=0.05)

    def test_lognormal_msep(self, report):
        assert report.method(Method.LOGNORMAL).mean_msep > report.method(Method.GAMMA).mean_msep
