"""Monte-Carlo harness: error metric, trial seeding, sweep aggregation."""

import math

import numpy as np
import pytest

from uwbsync import (
    ExperimentPlan,
    MseRecord,
    records_to_csv,
    run_sweep,
    run_trial,
    wrapped_error,
)
from uwbsync.defaults import default_plan

TS = 1120e-9


class TestWrappedError:
    def test_zero(self):
        assert wrapped_error(0.0, 0.0, TS) == 0.0

    def test_wraps_near_boundary(self):
        assert wrapped_error(TS - 1e-9, 0.0, TS) == pytest.approx(-1e-9)
        assert wrapped_error(0.0, TS - 1e-9, TS) == pytest.approx(1e-9)

    def test_half_symbol_boundary_is_positive(self):
        assert wrapped_error(TS / 2, 0.0, TS) == TS / 2

    def test_bounded_and_congruent(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            a, b = rng.uniform(0, TS, size=2)
            e = wrapped_error(a, b, TS)
            assert abs(e) <= TS / 2
            # e differs from the raw difference by a whole number of T_s
            k = (a - b - e) / TS
            assert k == pytest.approx(round(k), abs=1e-9)


class TestRunTrial:
    def test_noiseless_da_recovers_offset(self):
        plan = default_plan(channel_model="single_path")
        res = run_trial(plan, math.inf, 16, "da", 0, 0)
        e = wrapped_error(res.tau_hat_fine, res.delta_tau_true, TS)
        assert abs(e) <= plan.fine_cfg.fine_step

    def test_deterministic(self):
        plan = default_plan()
        a = run_trial(plan, 12.0, 8, "nda", 3, 1)
        b = run_trial(plan, 12.0, 8, "nda", 3, 1)
        assert a == b

    def test_trials_draw_independent_randomness(self):
        plan = default_plan()
        a = run_trial(plan, math.inf, 8, "nda", 0, 0)
        b = run_trial(plan, math.inf, 8, "nda", 1, 0)
        assert a.delta_tau_true != b.delta_tau_true


class TestRunSweep:
    def test_single_trial_cell_equals_trial_error(self):
        plan = default_plan(
            snr_grid_db=(math.inf,), m_grid=(8,), modes=("da",),
            floors=("coarse_only", "coarse_plus_fine"), trials_per_cell=1,
            channel_model="single_path",
        )
        records = run_sweep(plan)
        res = run_trial(plan, math.inf, 8, "da", 0, 0)
        e1 = wrapped_error(res.tau_hat_coarse, res.delta_tau_true, TS)
        e2 = wrapped_error(res.tau_hat_fine, res.delta_tau_true, TS)
        assert records[0].normalized_mse == pytest.approx((e1 / TS) ** 2)
        assert records[1].normalized_mse == pytest.approx((e2 / TS) ** 2)
        assert records[0].std_error == 0.0
        assert records[0].n_trials == 1

    def test_record_order_and_cardinality(self):
        plan = default_plan(
            snr_grid_db=(0.0, 16.0), m_grid=(8,), modes=("nda", "da"),
            trials_per_cell=1,
        )
        records = run_sweep(plan)
        assert len(records) == 2 * 1 * 2 * 2
        keys = [(r.snr_db, r.m, r.mode, r.floor) for r in records]
        assert keys == [
            (0.0, 8, "nda", "coarse_only"), (0.0, 8, "nda", "coarse_plus_fine"),
            (0.0, 8, "da", "coarse_only"), (0.0, 8, "da", "coarse_plus_fine"),
            (16.0, 8, "nda", "coarse_only"), (16.0, 8, "nda", "coarse_plus_fine"),
            (16.0, 8, "da", "coarse_only"), (16.0, 8, "da", "coarse_plus_fine"),
        ]

    def test_reproducible_across_worker_counts(self):
        plan = default_plan(
            snr_grid_db=(10.0,), m_grid=(8,), modes=("nda", "da"),
            trials_per_cell=4,
        )
        serial = records_to_csv(run_sweep(plan, n_workers=1))
        parallel = records_to_csv(run_sweep(plan, n_workers=2))
        assert serial == parallel

    def test_mse_within_wrapped_bound(self):
        plan = default_plan(snr_grid_db=(-100.0,), m_grid=(8,),
                            modes=("nda",), trials_per_cell=8)
        for rec in run_sweep(plan):
            assert 0.0 <= rec.normalized_mse <= 0.25
            assert rec.std_error >= 0.0


class TestCsv:
    def test_format(self):
        rec = MseRecord(16.0, 8, "nda", "coarse_only", 1.2345678e-4, 3.3e-6, 200)
        text = records_to_csv([rec])
        lines = text.splitlines()
        assert lines[0] == "snr_db,m,mode,floor,normalized_mse,std_error,n_trials"
        assert lines[1] == "16,8,nda,coarse_only,0.000123457,3.3e-06,200"
