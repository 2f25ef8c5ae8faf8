from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from reservebench.chainladder import (
    DevFactors,
    ResidualAdjustment,
    adjust_residuals,
    dof,
    estimate_dev_factors,
    fit_chain_ladder,
    fit_chain_ladder_batch,
    payout_pattern,
    pearson_dispersion,
    residual_scale,
    row_levels,
    PayoutPattern,
)
from reservebench.errors import (
    DegenerateColumn,
    DegenerateDispersion,
    DegeneratePattern,
    NonPositiveFit,
)
from reservebench.triangle import Flavor, Triangle, as_incremental, upper_mask


def cumulative(rows: list[list[float]]) -> Triangle:
    n = len(rows)
    cells = np.zeros((n, n))
    for i, r in enumerate(rows):
        cells[i, : len(r)] = r
    return Triangle(cells, Flavor.CUMULATIVE)


class TestDevFactors:
    def test_single_ratio(self):
        d = estimate_dev_factors(cumulative([[1, 3], [3]]))
        assert_allclose(d.p, [1 / 3])
        assert_allclose(d.f, [3.0])

    def test_no_development(self):
        d = estimate_dev_factors(cumulative([[5, 5, 5], [2, 2], [7]]))
        assert_allclose(d.p, [1.0, 1.0])

    def test_zero_column(self):
        with pytest.raises(DegenerateColumn) as exc:
            estimate_dev_factors(cumulative([[0, 1, 1], [0, 2], [3]]))
        assert exc.value.column == 1

    def test_scale_equivariance(self, raa):
        scaled = raa.with_cells(raa.cells * 37.5)
        assert_allclose(estimate_dev_factors(scaled).p, estimate_dev_factors(raa).p, rtol=1e-12)

    def test_from_pattern_inverts_payout_pattern(self, rng):
        d = DevFactors.from_p(rng.uniform(0.2, 0.95, 6))
        assert_allclose(DevFactors.from_pattern(payout_pattern(d)).p, d.p, rtol=1e-12)


class TestPayoutPattern:
    def test_two_columns(self):
        g = payout_pattern(DevFactors.from_p(np.array([1 / 3])))
        assert_allclose(g.gamma, [1 / 3, 2 / 3])

    def test_all_mass_first(self):
        g = payout_pattern(DevFactors.from_p(np.ones(4)))
        assert_allclose(g.gamma, [1, 0, 0, 0, 0])

    @pytest.mark.parametrize("seed", range(20))
    def test_sums_to_one(self, seed):
        p = np.random.default_rng(seed).uniform(0.01, 0.99, 9)
        g = payout_pattern(DevFactors.from_p(p))
        assert abs(g.gamma.sum() - 1.0) < 1e-12
        assert np.all(g.gamma > 0)

    def test_tail_sums(self):
        g = PayoutPattern(np.array([0.5, 0.3, 0.2]))
        assert_allclose(g.tail_sums(), [0.0, 0.2, 0.5])

    def test_raa(self, raa):
        g = fit_chain_ladder(raa).pattern.gamma
        assert g[0] == pytest.approx(0.1121, abs=2e-3)
        assert g[1] == pytest.approx(0.2241, abs=2e-3)


class TestRowLevels:
    def test_small(self):
        t = Triangle(np.array([[1.0, 2.0], [3.0, 0.0]]))
        mu = row_levels(t, PayoutPattern(np.array([1 / 3, 2 / 3])))
        assert_allclose(mu, [3.0, 9.0])

    def test_full_row_is_row_sum(self):
        t = Triangle(np.array([[1.0, 2.0, 4.0], [1.0, 1.0, 0.0], [2.0, 0.0, 0.0]]))
        mu = row_levels(t, PayoutPattern(np.array([0.25, 0.25, 0.5])))
        assert mu[0] == pytest.approx(7.0)

    def test_degenerate(self):
        t = Triangle(np.ones((3, 3)))
        with pytest.raises(DegeneratePattern) as exc:
            row_levels(t, PayoutPattern(np.array([0.0, 0.0, 1.0])))
        assert exc.value.row == 2


class TestDispersion:
    def test_needs_three_rows(self):
        t = Triangle(np.array([[1.0, 2.0], [3.0, 0.0]]))
        with pytest.raises(DegenerateDispersion):
            pearson_dispersion(t, np.ones((2, 2)), 1)

    def test_perfect_fit(self, exact_fit_triangle):
        fit = fit_chain_ladder(exact_fit_triangle)
        for q in (1, 2):
            d = pearson_dispersion(exact_fit_triangle, fit.fitted, q)
            assert d.phi == 0.0
            assert np.all(d.residuals == 0.0)

    def test_hand_computed(self):
        x = np.array([[10.0, 6.0, 3.0], [12.0, 5.0, 0.0], [9.0, 0.0, 0.0]])
        m = np.array([[11.0, 5.0, 2.5], [10.0, 6.0, 9.9], [8.0, 9.9, 9.9]])
        t = Triangle(x)
        cells = [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0)]
        odp = sum((x[c] - m[c]) ** 2 / m[c] for c in cells)
        gam = sum((x[c] - m[c]) ** 2 / m[c] ** 2 for c in cells)
        assert dof(3) == 1
        assert pearson_dispersion(t, m, 1).phi == pytest.approx(odp, rel=1e-12)
        assert pearson_dispersion(t, m, 2).phi == pytest.approx(gam, rel=1e-12)

    def test_non_positive_fit(self):
        t = Triangle(np.ones((3, 3)))
        m = np.ones((3, 3))
        m[1, 1] = 0.0
        with pytest.raises(NonPositiveFit) as exc:
            pearson_dispersion(t, m, 1)
        assert (exc.value.row, exc.value.column) == (2, 2)

    def test_lower_fitted_values_are_ignored(self):
        t = Triangle(np.ones((3, 3)))
        m = np.ones((3, 3))
        m[2, 2] = -5.0
        assert pearson_dispersion(t, m, 1).phi == 0.0

    def test_odp_residual_identity(self, raa):
        inc = as_incremental(raa)
        fit = fit_chain_ladder(inc)
        d = pearson_dispersion(inc, fit.fitted, 1)
        obs = upper_mask(raa.n)
        lhs = float(np.sum(d.residuals * np.sqrt(fit.fitted[obs])))
        rhs = float(inc.cells[obs].sum() - fit.fitted[obs].sum())
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-6)


class TestAdjustment:
    def test_accident_year_scale(self):
        assert residual_scale(10) == pytest.approx(np.sqrt(10 / 36))
        assert residual_scale(10) == pytest.approx(0.5270, abs=1e-4)
        assert residual_scale(3) == pytest.approx(np.sqrt(3.0))

    def test_dof_scale(self):
        assert residual_scale(10, ResidualAdjustment.DOF) == pytest.approx(np.sqrt(55 / 36))

    def test_zero_residuals(self, exact_fit_triangle):
        fit = fit_chain_ladder(exact_fit_triangle)
        d = pearson_dispersion(exact_fit_triangle, fit.fitted, 1)
        assert np.all(adjust_residuals(d, 3) == 0.0)

    def test_scales_every_residual(self, raa):
        inc = as_incremental(raa)
        d = pearson_dispersion(inc, fit_chain_ladder(inc).fitted, 2)
        assert_allclose(adjust_residuals(d, 10), d.residuals * np.sqrt(10 / 36))

    def test_degenerate(self):
        with pytest.raises(DegenerateDispersion):
            residual_scale(2)


class TestBatchRefit:
    def test_matches_single_fits(self, rng):
        n, b = 6, 8
        stack = rng.uniform(1.0, 100.0, size=(b, n, n))
        batch = fit_chain_ladder_batch(stack)
        assert batch.ok.all()
        for k in range(b):
            single = fit_chain_ladder(Triangle(stack[k]))
            assert_allclose(batch.mu_rows[k], single.mu_rows, rtol=1e-10)
            assert_allclose(batch.gamma[k], single.pattern.gamma, rtol=1e-10, atol=1e-14)

    def test_flags_degenerate_replicates(self, rng):
        stack = rng.uniform(1.0, 10.0, size=(3, 4, 4))
        stack[1, :, 0] = -50.0
        batch = fit_chain_ladder_batch(stack)
        assert batch.ok.tolist() == [True, False, True]
        assert np.all(np.isnan(batch.gamma[1, :-1]))
