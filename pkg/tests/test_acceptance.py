"""
Acceptance-scale checks over many seeded realizations.

These take minutes; run them with `pytest -m slow`.
"""

import numpy as np
import pytest

from app.baselines.constraints import ConstraintMode
from app.channel.sampling import channel_stream, sample_rayleigh
from app.experiments.region import inside_outer, two_user_region
from app.experiments.runner import run_complexity, run_snr_sweep
from app.experiments.schemas import ExperimentKind
from app.main import main
from app.mac.audit import kkt_report_mac
from app.mac.models import nats_to_bits
from app.mac.solver import first_sweep_gap_audit, solve_mac
from app.single_user.solver import kkt_report_single, miso_rate, solve_single_user

from .oracles import mac_projected_gradient_oracle, single_user_grid_oracle


pytestmark = pytest.mark.slow


class TestSingleUserAcceptance:
    def test_grid_oracle_on_200_channels(self):
        rng = channel_stream(101)
        P = np.array([0.5, 0.5])
        for _ in range(200):
            H = sample_rayleigh(2, 2, rng)
            result = solve_single_user(H, P)
            assert result.rate_nats == pytest.approx(single_user_grid_oracle(H, P), abs=1e-6)
            residuals = kkt_report_single(H, P, result.covariance, result.dual)
            assert residuals.max_violation() <= 1e-7

    def test_miso_closed_form_on_200_channels(self):
        rng = channel_stream(102)
        for index in range(200):
            n = (2, 4, 8)[index % 3]
            h = sample_rayleigh(1, n, rng)
            P = rng.uniform(0.1, 2.0, size=n)
            assert solve_single_user(h, P).rate_nats == pytest.approx(miso_rate(h, P), abs=1e-8)


class TestMacAcceptance:
    @pytest.mark.parametrize("users", [2, 4, 8, 15])
    def test_monotone_and_ten_sweeps_typically_suffice(self, rayleigh_instance, users):
        shortfalls = []
        for realization in range(25):
            instance = rayleigh_instance(users=users, seed=103, realization=realization)
            report = solve_mac(instance, tol_bits=1e-12, max_iterations=50, raise_on_max_iters=False)
            steps = np.diff([report.initial_rate_nats] + report.rate_trace_nats)
            assert np.all(steps >= -1e-12)
            shortfalls.append(nats_to_bits(report.rate_after_sweep(50)) - nats_to_bits(report.rate_after_sweep(10)))
        # Slowly coupled realizations can trail by a few 1e-5 bits after ten sweeps
        assert np.median(shortfalls) <= 1e-6
        assert max(shortfalls) <= 1e-3

    def test_first_sweep_gap_bound_on_100_instances(self, rayleigh_instance):
        for realization in range(100):
            audit = first_sweep_gap_audit(rayleigh_instance(users=4, seed=104, realization=realization))
            assert audit.within_bound

    def test_projected_gradient_oracle_on_50_instances(self, rayleigh_instance):
        for realization in range(50):
            instance = rayleigh_instance(users=2, rx=2, tx=2, power=0.5, seed=105, realization=realization)
            report = solve_mac(instance, tol_bits=1e-9)
            assert report.sum_rate_nats == pytest.approx(mac_projected_gradient_oracle(instance), abs=1e-5)

    def test_kkt_at_convergence(self, rayleigh_instance):
        for realization in range(20):
            instance = rayleigh_instance(users=3, seed=106, realization=realization)
            report = solve_mac(instance, tol_bits=1e-9)
            for residuals in kkt_report_mac(instance, report.covariances, report.duals):
                assert residuals.max_violation() <= 1e-6


class TestHarnessAcceptance:
    def test_ordering_on_every_realization(self, small_config):
        config = small_config(
            ExperimentKind.SNR_SWEEP, rx=4, tx=4, users=[2], realizations=200, snr_db=[-10.0, 0.0, 10.0, 20.0]
        )
        table = run_snr_sweep(config)
        assert table.summary["ordering_violations"] == 0

    def test_region_structure(self, rayleigh_instance):
        for realization in range(10):
            instance = rayleigh_instance(users=2, seed=107, realization=realization)
            for constraint in (ConstraintMode.PER_ANTENNA_EQUAL, ConstraintMode.SUM_POWER):
                bounds = two_user_region(instance, constraint, points=9)
                assert sum(bounds.c) == pytest.approx(bounds.sum_capacity, abs=1e-8)
                assert sum(bounds.d) == pytest.approx(bounds.sum_capacity, abs=1e-8)
                assert all(inside_outer(bounds, point) for point in bounds.inner)

    def test_complexity_grows_linearly(self, small_config):
        config = small_config(ExperimentKind.COMPLEXITY, rx=4, tx=4, users=[2, 4, 8], realizations=50, max_iters=100)
        table = run_complexity(config)
        calls = dict(zip(table.column("users"), table.column("mean_calls")))
        assert 2.0 <= calls[8] / calls[2] <= 6.0

    def test_one_and_eight_workers_write_identical_files(self, tmp_path):
        argv = ["user-sweep", "--users", "2,4", "--realizations", "16", "--seed", "9"]
        single = tmp_path / "single.csv"
        pooled = tmp_path / "pooled.csv"
        assert main([*argv, "--workers", "1", "--out", str(single)]) == 0
        assert main([*argv, "--workers", "8", "--out", str(pooled)]) == 0
        assert single.read_bytes() == pooled.read_bytes()
