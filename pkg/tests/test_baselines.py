"""Tests for water-filling, iterative water-filling, spatial multiplexing and the constraint scenarios."""

import numpy as np
import pytest

from app.baselines.constraints import ConstraintMode, antenna_budgets, budgets_for_mode, snr_db_to_power
from app.baselines.multiplexing import capacity_for_mode, spatial_multiplexing_rate
from app.baselines.waterfilling import iterative_water_fill, sum_power_gap, water_fill, water_fill_gains
from app.channel.models import SumBudget, make_instance
from app.channel.sampling import sample_rayleigh
from app.core.exceptions import DimensionMismatchError, MaxItersExceededError
from app.linalg.kernel import logdet_hpd, min_eigenvalue
from app.mac.models import LN2


class TestWaterFillGains:
    def test_both_channels_active(self):
        powers, level = water_fill_gains(np.array([4.0, 1.0]), 1.0)
        assert level == pytest.approx(1.125)
        assert np.allclose(powers, [0.875, 0.125])

    def test_weak_channel_left_dry(self):
        powers, level = water_fill_gains(np.array([4.0, 0.1]), 0.1)
        assert level == pytest.approx(0.35)
        assert np.allclose(powers, [0.1, 0.0])

    def test_input_order_is_preserved(self):
        powers, _ = water_fill_gains(np.array([1.0, 4.0]), 1.0)
        assert np.allclose(powers, [0.125, 0.875])

    def test_zero_gain_gets_no_power(self):
        powers, level = water_fill_gains(np.array([1.0, 0.0]), 1.0)
        assert np.allclose(powers, [1.0, 0.0])
        assert level == pytest.approx(2.0)

    def test_invalid_gains(self):
        with pytest.raises(ValueError):
            water_fill_gains(np.array([1.0, -1.0]), 1.0)
        with pytest.raises(ValueError):
            water_fill_gains(np.zeros(2), 1.0)


class TestWaterFill:
    def test_scalar(self):
        assert np.allclose(water_fill(np.array([[2.0]]), 1.0), np.array([[1.0]]))

    def test_uses_full_power(self, rng):
        H = sample_rayleigh(3, 3, rng)
        Q = water_fill(H, SumBudget(2.0))
        assert np.real(np.trace(Q)) == pytest.approx(2.0)
        assert min_eigenvalue(Q) >= -1e-12

    def test_beats_uniform_allocation(self, rng):
        for _ in range(10):
            H = sample_rayleigh(3, 3, rng)
            Q = water_fill(H, 1.5)
            best = logdet_hpd(np.eye(3) + H @ Q @ H.conj().T)
            uniform = logdet_hpd(np.eye(3) + 0.5 * H @ H.conj().T)
            assert best >= uniform - 1e-12

    def test_wide_channel_is_rank_one(self, rng):
        h = sample_rayleigh(1, 3, rng)
        Q = water_fill(h, 1.0)
        assert np.linalg.matrix_rank(Q, tol=1e-10) == 1
        assert np.real(np.trace(Q)) == pytest.approx(1.0)


class TestIterativeWaterFill:
    def test_single_user_is_water_filling(self, rayleigh_instance):
        instance = rayleigh_instance(users=1)
        report = iterative_water_fill(instance)
        H = instance.channels[0]
        Q = water_fill(H, instance.budgets[0].total)
        assert report.sum_rate_nats == pytest.approx(logdet_hpd(np.eye(4) + H @ Q @ H.conj().T), abs=1e-9)

    def test_scalar_users(self, scalar_mac):
        report = iterative_water_fill(scalar_mac)
        assert report.converged
        assert report.sum_rate_nats == pytest.approx(np.log(3.0), abs=1e-9)

    def test_rate_trace_is_monotone(self, rayleigh_instance):
        report = iterative_water_fill(rayleigh_instance(users=4))
        steps = np.diff([report.initial_rate_nats] + report.rate_trace_nats)
        assert np.all(steps >= -1e-12)
        assert all(dual is None for dual in report.duals)

    def test_gap_at_convergence(self, rayleigh_instance):
        instance = rayleigh_instance(users=3)
        report = iterative_water_fill(instance, tol_bits=1e-8)
        assert report.converged
        totals = [budget.total for budget in instance.budgets]
        gap = sum_power_gap(instance, report.covariances, totals)
        assert 0.0 <= gap + 1e-12
        assert gap < 1e-8 * LN2

    def test_explicit_totals(self, scalar_mac):
        report = iterative_water_fill(scalar_mac, totals=[SumBudget(3.0), 3.0])
        assert report.sum_rate_nats == pytest.approx(np.log(7.0), abs=1e-9)

    def test_total_count_mismatch(self, scalar_mac):
        with pytest.raises(DimensionMismatchError):
            iterative_water_fill(scalar_mac, totals=[1.0])

    def test_iteration_cap(self, rayleigh_instance):
        with pytest.raises(MaxItersExceededError):
            iterative_water_fill(rayleigh_instance(users=3), max_iterations=1)


class TestSpatialMultiplexing:
    def test_scalar_users(self, scalar_mac):
        assert spatial_multiplexing_rate(scalar_mac) == pytest.approx(np.log(3.0))

    def test_identity_channel(self):
        instance = make_instance([np.eye(2)], [[0.5, 0.5]])
        assert spatial_multiplexing_rate(instance) == pytest.approx(2.0 * np.log(1.5))

    def test_unequal_split(self):
        instance = make_instance([np.eye(2)], [[0.5, 0.5]])
        expected = np.log(1.0 + 1.0 / 3.0) + np.log(1.0 + 2.0 / 3.0)
        assert spatial_multiplexing_rate(instance, ConstraintMode.SM_UNEQUAL) == pytest.approx(expected)

    def test_rejects_optimized_modes(self, scalar_mac):
        with pytest.raises(ValueError):
            spatial_multiplexing_rate(scalar_mac, ConstraintMode.SUM_POWER)


class TestConstraintModes:
    def test_snr_conversion(self):
        assert snr_db_to_power(10.0) == pytest.approx(10.0)
        assert snr_db_to_power(0.0) == pytest.approx(1.0)

    def test_unequal_budgets(self):
        assert np.allclose(antenna_budgets(ConstraintMode.PER_ANTENNA_UNEQUAL, 2.0, 4), 2.0 * np.arange(1, 5) / 10.0)

    def test_equal_budgets(self):
        for mode in (ConstraintMode.PER_ANTENNA_EQUAL, ConstraintMode.SUM_POWER, ConstraintMode.SM_EQUAL):
            assert np.allclose(antenna_budgets(mode, 2.0, 4), np.full(4, 0.5))

    def test_invalid_totals(self):
        with pytest.raises(ValueError):
            antenna_budgets(ConstraintMode.SM_EQUAL, 0.0, 2)
        with pytest.raises(ValueError):
            antenna_budgets(ConstraintMode.SM_EQUAL, 1.0, 0)

    def test_budgets_follow_antenna_counts(self):
        budgets = budgets_for_mode(ConstraintMode.SM_UNEQUAL, 3.0, [1, 2])
        assert [budget.size for budget in budgets] == [1, 2]
        assert all(budget.total == pytest.approx(3.0) for budget in budgets)

    def test_mode_flags(self):
        assert ConstraintMode.SM_UNEQUAL.unequal and ConstraintMode.SM_UNEQUAL.spatial_multiplexing
        assert not ConstraintMode.SUM_POWER.unequal
        assert ConstraintMode("per-antenna-equal") is ConstraintMode.PER_ANTENNA_EQUAL


class TestCapacityForMode:
    def test_spatial_multiplexing_has_no_report(self, rayleigh_instance):
        capacity = capacity_for_mode(rayleigh_instance(users=2), ConstraintMode.SM_EQUAL, 2.0)
        assert capacity.report is None
        assert capacity.converged
        assert capacity.rate_bits == pytest.approx(capacity.rate_nats / LN2)

    def test_scenarios_are_ordered(self, rayleigh_instance):
        for realization in range(3):
            instance = rayleigh_instance(users=2, realization=realization)
            rates = {
                mode: capacity_for_mode(instance, mode, 2.0, tol_bits=1e-9).rate_nats
                for mode in ConstraintMode
            }
            slack = 1e-8
            assert rates[ConstraintMode.SUM_POWER] + slack >= rates[ConstraintMode.PER_ANTENNA_EQUAL]
            assert rates[ConstraintMode.SUM_POWER] + slack >= rates[ConstraintMode.PER_ANTENNA_UNEQUAL]
            assert rates[ConstraintMode.PER_ANTENNA_EQUAL] + slack >= rates[ConstraintMode.SM_EQUAL]
            assert rates[ConstraintMode.PER_ANTENNA_UNEQUAL] + slack >= rates[ConstraintMode.SM_UNEQUAL]

    def test_capacity_uses_total_not_instance_budget(self, scalar_mac):
        capacity = capacity_for_mode(scalar_mac, ConstraintMode.PER_ANTENNA_EQUAL, 3.0)
        assert capacity.rate_nats == pytest.approx(np.log(7.0), abs=1e-8)
