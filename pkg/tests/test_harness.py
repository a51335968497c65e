import math

import numpy as np
import pytest

from seqmpc.controller import ControllerConfig
from seqmpc.harness import (
    ConfigError,
    ScenarioConfig,
    compute_metrics,
    compute_rmse,
    compute_switching_frequency,
    compute_thd,
    dump_config,
    load_config,
    profile_value,
    run_scenario,
    sweep,
    write_sweep_csv,
)

# short but long enough for a one-period THD window at 56.25 Hz
QUICK = dict(duration=0.04, substeps=2, thd_periods=1)


def quick_cfg(**kw):
    merged = {**QUICK, **kw}
    return ScenarioConfig(**merged)


class TestRmse:
    def test_identical_series(self):
        assert compute_rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_constant_offset(self):
        x = np.array([5.0, 6.0, 7.0])
        assert compute_rmse(x, x - 2.5) == pytest.approx(2.5)

    def test_known_value(self):
        assert compute_rmse([0.0, 2.0], [0.0, 0.0]) == pytest.approx(math.sqrt(2.0))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            compute_rmse([], [])


class TestThd:
    FS = 20_000.0

    def _tone(self, f0, periods=40, harmonics=()):
        n = int(round(periods * self.FS / f0))
        t = np.arange(n) / self.FS
        x = np.cos(2 * np.pi * f0 * t)
        for h, amp in harmonics:
            x = x + amp * np.cos(2 * np.pi * h * f0 * t)
        return x

    def test_pure_tone_is_distortion_free(self):
        x = self._tone(50.0)
        assert compute_thd(x, 1 / self.FS, 50.0, 5) == pytest.approx(0.0, abs=1e-9)

    def test_ten_percent_third_harmonic(self):
        x = self._tone(50.0, harmonics=[(3, 0.1)])
        assert compute_thd(x, 1 / self.FS, 50.0, 5) == pytest.approx(0.1, abs=1e-6)

    def test_amplitude_invariance(self):
        x = self._tone(50.0, harmonics=[(5, 0.07), (7, 0.02)])
        a = compute_thd(x, 1 / self.FS, 50.0, 5)
        b = compute_thd(123.4 * x, 1 / self.FS, 50.0, 5)
        assert a == pytest.approx(b, rel=1e-12)
        assert a == pytest.approx(math.hypot(0.07, 0.02), abs=1e-6)

    def test_phase_offset_insensitivity(self):
        # steady periodic signal: shifting the window must not move THD much
        f0 = 56.25
        n_shift = 17
        x = self._tone(f0, periods=60, harmonics=[(3, 0.05)])
        a = compute_thd(x, 1 / self.FS, f0, 5)
        b = compute_thd(x[:-n_shift], 1 / self.FS, f0, 5)
        assert b == pytest.approx(a, rel=0.05)

    def test_zero_signal_rejected(self):
        with pytest.raises(ValueError):
            compute_thd(np.zeros(4000), 1 / self.FS, 50.0, 5)

    def test_short_signal_rejected(self):
        with pytest.raises(ValueError):
            compute_thd(np.ones(10), 1 / self.FS, 50.0, 5)


class TestSwitchingFrequency:
    T_S = 50e-6

    def test_constant_levels(self):
        levels = np.tile([1, 0, -1], (100, 1))
        assert compute_switching_frequency(levels, self.T_S) == 0.0

    def test_single_phase_toggle(self):
        n = 201
        levels = np.zeros((n, 3), dtype=int)
        levels[1::2, 0] = 1
        f = compute_switching_frequency(levels, self.T_S)
        assert f == pytest.approx(20_000.0 / 3.0, rel=1e-9)

    def test_double_step_counts_twice(self):
        levels = np.array([[-1, 0, 0], [1, 0, 0]])
        f = compute_switching_frequency(levels, self.T_S)
        assert f == pytest.approx(2.0 / (3.0 * self.T_S))

    def test_duration_invariance_for_periodic_pattern(self):
        base = np.array([[0, 0, 0], [1, 0, 0]] * 50)
        tripled = np.vstack([base, base, base])
        f1 = compute_switching_frequency(base, self.T_S)
        f3 = compute_switching_frequency(tripled, self.T_S)
        assert f3 == pytest.approx(f1, rel=0.02)


class TestProfiles:
    def test_piecewise_lookup(self):
        prof = ((0.0, 1.0), (0.1, 5.0), (0.2, -2.0))
        assert profile_value(prof, 0.0) == 1.0
        assert profile_value(prof, 0.05) == 1.0
        assert profile_value(prof, 0.1) == 5.0
        assert profile_value(prof, 0.3) == -2.0

    def test_unsorted_profile_rejected(self):
        with pytest.raises(ConfigError):
            ScenarioConfig(speed_rpm=((0.1, 5.0), (0.0, 1.0)))


class TestRunScenario:
    def test_record_count(self):
        cfg = ScenarioConfig(duration=0.001, substeps=2)
        series = run_scenario(cfg, ControllerConfig(n_h=1, t_s=cfg.t_s))
        assert len(series) == 20

    def test_zero_source_scenario_stays_at_zero(self):
        cfg = quick_cfg(
            e_peak=0.0,
            speed_rpm=((0.0, 0.0),),
            torque_nm=((0.0, 0.0),),
            pi_kp=0.0, pi_ki=0.0,
        )
        series = run_scenario(cfg, ControllerConfig(n_h=1, t_s=cfg.t_s))
        assert np.abs(series.column("i_m_d")).max() == 0.0
        assert np.abs(series.column("i_n_al")).max() == 0.0
        assert np.abs(series.column("v_imb")).max() == 0.0
        assert series.column("v_dc").max() == 700.0

    def test_determinism_bytes(self, tmp_path):
        cfg = quick_cfg()
        ctrl = ControllerConfig(n_h=1, n_k=2, n_l=2, t_s=cfg.t_s)
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        run_scenario(cfg, ctrl).write_csv(a)
        run_scenario(cfg, ctrl).write_csv(b)
        assert a.read_bytes() == b.read_bytes()


class TestMetricsPipeline:
    def test_metrics_are_finite_and_nonnegative(self):
        cfg = quick_cfg(duration=0.08)
        series = run_scenario(cfg, ControllerConfig(n_h=1, n_k=2, n_l=2, t_s=cfg.t_s))
        metrics = compute_metrics(series, cfg)
        for name in metrics.FIELDS:
            value = getattr(metrics, name)
            assert np.isfinite(value) and value >= 0.0

    def test_node_accounting_matches_series(self):
        cfg = quick_cfg()
        series = run_scenario(cfg, ControllerConfig(n_h=1, t_s=cfg.t_s))
        nodes = series.column("nodes_m") + series.column("nodes_n")
        got = compute_metrics(series, cfg)
        assert got.avg_nodes == pytest.approx(nodes.mean())


class TestSweep:
    def test_grid_of_one(self):
        cfg = quick_cfg(horizons=(1,), n_ks=(1,), n_ls=(1,), lambdas=(0.1,), modes=("sequential",))
        rows = sweep(cfg)
        assert len(rows) == 1
        assert rows[0]["status"] == "ok"

    def test_cross_product_row_count(self):
        cfg = quick_cfg(horizons=(1, 2), n_ks=(1, 2), modes=("sequential", "standard_sd"))
        rows = sweep(cfg)
        assert len(rows) == 8

    def test_failed_cell_recorded_not_raised(self):
        # zero-source scenario has zero fundamental current: THD fails but
        # the sweep must keep going
        cfg = quick_cfg(
            e_peak=0.0, speed_rpm=((0.0, 0.0),), torque_nm=((0.0, 0.0),),
            pi_kp=0.0, pi_ki=0.0, horizons=(1, 1),
        )
        rows = sweep(cfg)
        assert len(rows) == 2
        assert all(r["status"].startswith("error") for r in rows)

    def test_csv_round_trip(self, tmp_path):
        cfg = quick_cfg(horizons=(1,))
        rows = sweep(cfg)
        path = tmp_path / "metrics.csv"
        write_sweep_csv(rows, path)
        text = path.read_text().splitlines()
        assert text[0].startswith("n_h,n_k,n_l,lambda,mode,status")
        assert len(text) == 2

    def test_node_count_grows_with_horizon(self):
        cfg = quick_cfg(horizons=(1, 3), n_ks=(1,), n_ls=(1,))
        rows = sweep(cfg)
        by_horizon = {r["n_h"]: r["avg_nodes"] for r in rows}
        assert by_horizon[3] > by_horizon[1]


class TestModeEquivalence:
    def test_single_candidate_sequential_matches_baseline_trajectory(self):
        # with one candidate per side the imbalance stage has nothing to
        # choose, so both modes must emit the same switches at every step
        cfg = quick_cfg(duration=0.02)
        seq = run_scenario(cfg, ControllerConfig(n_h=2, n_k=1, n_l=1, t_s=cfg.t_s))
        std = run_scenario(cfg, ControllerConfig(n_h=2, mode="standard_sd", t_s=cfg.t_s))
        for col in ("s_m_a", "s_m_b", "s_m_c", "s_n_a", "s_n_b", "s_n_c"):
            assert (seq.column(col) == std.column(col)).all()
        assert (seq.column("v_imb") == std.column("v_imb")).all()


class TestConfigFiles:
    def test_round_trip(self, tmp_path):
        cfg = ScenarioConfig(
            duration=0.25,
            horizons=(1, 3),
            n_ks=(2,),
            modes=("sequential", "standard_sd"),
            speed_rpm=((0.0, 900.0), (0.1, 1125.0)),
        )
        path = tmp_path / "scenario.ini"
        path.write_text(dump_config(cfg))
        loaded = load_config(path)
        assert loaded == cfg

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[scenario]\nduraton = 1.0\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_bad_profile_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[references]\nspeed_rpm = fast\n")
        with pytest.raises(ConfigError):
            load_config(path)
