"""Tests for the Monte-Carlo experiments, the two-user region and the result writers."""

import json
import pickle

import numpy as np
import pytest
from pydantic import ValidationError

from app.baselines.constraints import ConstraintMode
from app.channel.models import make_instance
from app.core.config import settings
from app.core.exceptions import EXIT_NOT_CONVERGED, NotTwoUsersError, RealizationError
from app.experiments.output import render_csv, render_table
from app.experiments.pool import ordered_map
from app.experiments.region import inside_outer, two_user_region
from app.experiments.runner import (
    calls_to_reach,
    mean_stderr,
    ordering_violations,
    run_complexity,
    run_convergence,
    run_snr_sweep,
    run_user_sweep,
)
from app.experiments.schemas import ExperimentConfig, ExperimentKind, OutputFormat, ResultTable


class TestExperimentConfig:
    def test_defaults_come_from_settings(self):
        config = ExperimentConfig(kind=ExperimentKind.CONVERGENCE)
        assert config.realizations == settings.realizations
        assert config.seed == settings.seed
        assert config.tol_bits == settings.mac_tol_bits
        assert config.snr_db == settings.snr_db_list

    def test_power_length_must_match_antennas(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(kind=ExperimentKind.SOLVE, tx=2, power=[0.5, 0.5, 0.5])

    def test_per_antenna_power_vector(self):
        config = ExperimentConfig(kind=ExperimentKind.SOLVE, tx=2, power=[0.25, 0.75])
        assert np.allclose(config.antenna_power(), [0.25, 0.75])
        assert len(config.budgets(3)) == 3

    def test_invalid_values(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(kind=ExperimentKind.SOLVE, users=[2, 0])
        with pytest.raises(ValidationError):
            ExperimentConfig(kind=ExperimentKind.SOLVE, power=[-1.0])
        with pytest.raises(ValidationError):
            ExperimentConfig(kind=ExperimentKind.SOLVE, order="random")
        with pytest.raises(ValidationError):
            ExperimentConfig(kind=ExperimentKind.SOLVE, tol_bits=0.0)


class TestResultTable:
    def test_missing_column(self):
        table = ResultTable(name="t", columns=["a", "b"])
        with pytest.raises(ValueError):
            table.add_row(a=1)

    def test_plain_values_in_column_order(self):
        table = ResultTable(name="t", columns=["a", "b"])
        table.add_row(b=np.float64(0.5), a=np.bool_(True))
        assert list(table.rows[0]) == ["a", "b"]
        assert table.rows[0] == {"a": 1, "b": 0.5}
        assert isinstance(table.rows[0]["b"], float)


class TestHelpers:
    def test_mean_stderr(self):
        assert mean_stderr([2.0]) == (2.0, 0.0)
        mean, stderr = mean_stderr([1.0, 3.0])
        assert mean == pytest.approx(2.0)
        assert stderr == pytest.approx(1.0)

    def test_calls_to_reach(self):
        assert calls_to_reach([1.0, 2.0, 3.0], 0.5) == 1
        assert calls_to_reach([1.0, 2.0, 3.0], 2.5) == 3
        assert calls_to_reach([1.0, 2.0, 3.0], 10.0) == 3

    def test_ordering_violations(self):
        rates = {
            ConstraintMode.SUM_POWER: 1.0,
            ConstraintMode.PER_ANTENNA_EQUAL: 1.1,
            ConstraintMode.PER_ANTENNA_UNEQUAL: 0.9,
            ConstraintMode.SM_EQUAL: 0.5,
            ConstraintMode.SM_UNEQUAL: 0.95,
        }
        assert ordering_violations(rates, {}) == 2
        assert ordering_violations(rates, {ConstraintMode.SUM_POWER: 0.2}) == 1

    def test_ordered_map_keeps_order(self):
        assert ordered_map(abs, [-3, 1, -2, 4], workers=2) == [3, 1, 2, 4]
        assert ordered_map(abs, [], workers=4) == []

    def test_realization_error_survives_pickling(self):
        error = RealizationError(3, "MaxItersExceededError: cap", EXIT_NOT_CONVERGED)
        restored = pickle.loads(pickle.dumps(error))
        assert restored.realization == 3
        assert restored.exit_code == EXIT_NOT_CONVERGED
        assert restored.detail == error.detail


class TestConvergence:
    def test_rows_and_monotone_means(self, small_config):
        config = small_config(ExperimentKind.CONVERGENCE, users=[3], max_iters=8)
        table = run_convergence(config)
        assert table.column("iteration") == list(range(1, 9))
        assert np.all(np.diff(table.column("per_antenna_bits")) >= -1e-9)
        assert np.all(np.diff(table.column("sum_power_bits")) >= -1e-9)
        assert table.summary["nonconverged"] == table.rows[0]["nonconverged"]

    def test_sum_power_is_above_per_antenna(self, small_config):
        table = run_convergence(small_config(ExperimentKind.CONVERGENCE, max_iters=20))
        assert table.rows[-1]["sum_power_bits"] + 1e-6 >= table.rows[-1]["per_antenna_bits"]

    def test_single_user_is_flat(self, small_config):
        table = run_convergence(small_config(ExperimentKind.CONVERGENCE, users=[1], max_iters=5))
        rates = table.column("per_antenna_bits")
        assert max(rates) - min(rates) < 1e-6

    def test_deterministic_across_runs_and_workers(self, small_config):
        config = small_config(ExperimentKind.CONVERGENCE, max_iters=6, realizations=3)
        first = run_convergence(config)
        second = run_convergence(config)
        pooled = run_convergence(config.model_copy(update={"workers": 2}))
        assert first.rows == second.rows
        assert first.rows == pooled.rows


class TestComplexity:
    def test_single_user_needs_one_call(self, small_config):
        table = run_complexity(small_config(ExperimentKind.COMPLEXITY, users=[1]))
        assert table.rows[0]["mean_calls"] == 1.0
        assert "slope_calls_per_user" not in table.summary

    def test_slope_over_several_k(self, small_config):
        table = run_complexity(small_config(ExperimentKind.COMPLEXITY, users=[2, 4]))
        assert table.column("users") == [2, 4]
        assert "slope_calls_per_user" in table.summary
        assert all(calls >= users for calls, users in zip(table.column("mean_calls"), table.column("users")))


class TestSnrSweep:
    def test_ordering_holds(self, small_config):
        table = run_snr_sweep(small_config(ExperimentKind.SNR_SWEEP))
        assert table.column("snr_db") == [0.0, 10.0]
        assert table.summary["ordering_violations"] == 0
        for row in table.rows:
            assert row["sum_power_bits"] + 1e-6 >= row["per_antenna_equal_bits"] >= row["sm_equal_bits"] - 1e-6
            assert row["gap_sum_power_vs_per_antenna_equal"] >= -1e-6

    def test_capacity_grows_with_snr(self, small_config):
        table = run_snr_sweep(small_config(ExperimentKind.SNR_SWEEP))
        low, high = table.rows
        for mode in ("sum_power", "per_antenna_equal", "per_antenna_unequal", "sm_equal", "sm_unequal"):
            assert high[f"{mode}_bits"] > low[f"{mode}_bits"]

    def test_vanishing_power(self, small_config):
        table = run_snr_sweep(small_config(ExperimentKind.SNR_SWEEP, snr_db=[-60.0]))
        assert table.rows[0]["per_antenna_equal_bits"] < 1e-4
        assert table.rows[0]["sum_power_bits"] < 1e-4


class TestUserSweep:
    def test_first_sweep_and_gap_bound(self, small_config):
        table = run_user_sweep(small_config(ExperimentKind.USER_SWEEP, users=[2, 3]))
        assert table.column("users") == [2, 3]
        for row in table.rows:
            assert row["first_sweep_bits"] <= row["per_antenna_bits"] + 1e-9
            assert row["sm_bits"] <= row["per_antenna_bits"] + 1e-6
            assert row["gap_bound_violations"] == 0
            assert 0.0 <= row["half_bound_fraction"] <= 1.0

    def test_capacity_gap_columns(self, small_config):
        table = run_user_sweep(small_config(ExperimentKind.USER_SWEEP, users=[2, 3]))
        for row in table.rows:
            assert row["gap_sum_power_vs_per_antenna"] == pytest.approx(row["sum_power_bits"] - row["per_antenna_bits"], abs=1e-12)
            assert row["gap_per_antenna_vs_sm"] == pytest.approx(row["per_antenna_bits"] - row["sm_bits"], abs=1e-12)
            assert row["gap_sum_power_vs_per_antenna"] >= -1e-6
            assert row["gap_per_antenna_vs_sm"] >= -1e-6


class TestTwoUserRegion:
    def test_symmetric_instance(self):
        instance = make_instance([np.eye(2), np.eye(2)], [[0.5, 0.5], [0.5, 0.5]])
        bounds = two_user_region(instance, points=5)
        assert bounds.a[0] == pytest.approx(bounds.b[1], abs=1e-8)
        assert bounds.a[1] == pytest.approx(bounds.b[0], abs=1e-8)
        assert bounds.single_user[0] == pytest.approx(bounds.single_user[1], abs=1e-8)

    def test_converged_corners_on_sum_line(self, rayleigh_instance):
        bounds = two_user_region(rayleigh_instance(users=2, rx=2, tx=2), points=5)
        assert bounds.converged
        assert sum(bounds.c) == pytest.approx(bounds.sum_capacity, abs=1e-8)
        assert sum(bounds.d) == pytest.approx(bounds.sum_capacity, abs=1e-8)
        assert len(bounds.curve_ac) == 5 and len(bounds.curve_bd) == 5

    def test_inner_inside_outer(self, rayleigh_instance):
        for realization in range(3):
            bounds = two_user_region(rayleigh_instance(users=2, rx=2, tx=2, realization=realization), points=7)
            for point in bounds.inner:
                assert inside_outer(bounds, point)
            assert bounds.outer[0] == (0.0, bounds.single_user[1])
            assert bounds.outer[-1] == (bounds.single_user[0], 0.0)

    def test_sum_power_region_contains_per_antenna(self, rayleigh_instance):
        instance = rayleigh_instance(users=2, rx=2, tx=2)
        per_antenna = two_user_region(instance, points=3)
        sum_power = two_user_region(instance, ConstraintMode.SUM_POWER, points=3)
        assert sum_power.constraint is ConstraintMode.SUM_POWER
        assert sum_power.sum_capacity + 1e-8 >= per_antenna.sum_capacity

    def test_requires_two_users(self, rayleigh_instance):
        with pytest.raises(NotTwoUsersError):
            two_user_region(rayleigh_instance(users=3))

    def test_rejects_spatial_multiplexing(self, rayleigh_instance):
        with pytest.raises(ValueError):
            two_user_region(rayleigh_instance(users=2), ConstraintMode.SM_EQUAL)


class TestOutput:
    def test_csv_starts_with_config(self, small_config):
        config = small_config(ExperimentKind.CONVERGENCE)
        table = ResultTable(name="t", columns=["a"])
        table.add_row(a=0.1)
        lines = render_csv(table, config).splitlines()
        assert lines[0].startswith("# config: ")
        assert json.loads(lines[0][len("# config: "):]) == config.header()
        assert lines[1:] == ["a", "0.1"]

    def test_csv_summary_line(self, small_config):
        table = ResultTable(name="t", columns=["a"], summary={"nonconverged": 0})
        lines = render_csv(table, small_config(ExperimentKind.CONVERGENCE)).splitlines()
        assert json.loads(lines[1][len("# summary: "):]) == {"nonconverged": 0}

    def test_json_format(self, small_config):
        config = small_config(ExperimentKind.CONVERGENCE, format=OutputFormat.JSON)
        table = ResultTable(name="t", columns=["a"])
        table.add_row(a=2)
        payload = json.loads(render_table(table, config))
        assert payload["config"]["kind"] == "convergence"
        assert payload["table"]["rows"] == [{"a": 2}]
