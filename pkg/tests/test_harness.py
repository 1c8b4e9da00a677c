"""Harness tests: config round-trip and validation, preset snapshots,
episode determinism, delay semantics, Monte Carlo aggregation, export, CLI."""

import dataclasses
import json

import numpy as np
import pytest

from loitersim import cli, estimation, gmt, guidance, harness, presets, sensors


def small_config(**overrides):
    cfg = presets.get("paper-3mode-camera")
    rbpf = dataclasses.replace(cfg.filter.rbpf, n=20, resample_threshold=10.0)
    cfg = dataclasses.replace(cfg, horizon=150,
                              filter=dataclasses.replace(cfg.filter, rbpf=rbpf))
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


class TestConfigSerialisation:
    def test_round_trip_all_presets(self):
        for name in presets.PRESETS:
            cfg = presets.get(name)
            back = harness.config_from_dict(harness.config_to_dict(cfg))
            assert harness.config_hash(back) == harness.config_hash(cfg)

    def test_json_file_round_trip(self, tmp_path):
        cfg = small_config()
        path = tmp_path / "scenario.json"
        harness.save_config(cfg, str(path))
        loaded = harness.load_config(str(path))
        assert harness.config_hash(loaded) == harness.config_hash(cfg)

    def test_hash_changes_with_content(self):
        cfg = small_config()
        other = dataclasses.replace(cfg, loiter=guidance.LoiterSpec(150.0, 5.0))
        assert harness.config_hash(cfg) != harness.config_hash(other)


class TestValidation:
    def test_clean_preset(self):
        report = harness.validate_config(presets.get("paper-3mode-camera"))
        assert report.ok and report.clean

    def test_incompatible_sensor_rate(self):
        cfg = small_config()
        cam = dataclasses.replace(cfg.sensor.camera, rate_hz=7.0)  # 1/7 s vs 0.04 s
        cfg = dataclasses.replace(cfg, sensor=dataclasses.replace(cfg.sensor, camera=cam))
        report = harness.validate_config(cfg)
        assert not report.ok

    def test_infeasible_guidance_is_soft(self):
        cfg = small_config(loiter=guidance.LoiterSpec(10.0, 5.0))  # v/r = 0.5 > 0.2
        report = harness.validate_config(cfg)
        assert report.ok and not report.clean
        assert any("feasibility" in w for w in report.warnings)

    def test_bad_gains_are_soft(self):
        cfg = small_config()
        gains = dataclasses.replace(cfg.gains, m_v=30.0)  # 1/tau = 25
        report = harness.validate_config(dataclasses.replace(cfg, gains=gains))
        assert report.ok and any("m_v" in w for w in report.warnings)

    def test_run_episode_rejects_hard_errors(self):
        cfg = small_config()
        cam = dataclasses.replace(cfg.sensor.camera, rate_hz=7.0)
        cfg = dataclasses.replace(cfg, sensor=dataclasses.replace(cfg.sensor, camera=cam))
        with pytest.raises(ValueError):
            harness.run_episode(cfg, seed=0)


class TestPresetSnapshots:
    def test_three_mode_camera_values(self):
        cfg = presets.get("paper-3mode-camera")
        assert cfg.tau_sim == pytest.approx(0.04)
        assert cfg.horizon == 7500
        np.testing.assert_allclose(cfg.gmt.initial_state,
                                   [0.0, 100.0, 0.0, 8 * np.cos(np.pi / 4), 8 * np.sin(np.pi / 4)])
        np.testing.assert_array_equal(cfg.gmt.maneuver.modes,
                                      [[0, 0], [-1, 1], [1, -1]])
        np.testing.assert_allclose(np.diag(cfg.gmt.maneuver.transition), 0.9)
        np.testing.assert_allclose(cfg.gmt.noise_cov,
                                   np.diag([0.09, 0.09, 0.01]))
        assert (cfg.uav.initial.x, cfg.uav.initial.y) == (-300.0, 100.0)
        assert cfg.uav.initial.v == 10.0
        assert cfg.uav.initial.psi == pytest.approx(-np.pi / 2)
        assert cfg.uav.altitude == 50.0
        assert cfg.uav.limits.max_turn_rate == 0.2
        assert cfg.uav.disturbance_sigma == (0.1, 0.02)
        assert (cfg.uav.disturbance_bounds.accel,
                cfg.uav.disturbance_bounds.turn_rate) == (0.3, 0.06)
        assert cfg.loiter.radius == 200.0
        assert cfg.sensor.kind == "camera"
        assert cfg.sensor.camera.rate_hz == 25.0
        np.testing.assert_allclose(cfg.sensor.camera.noise_cov, np.diag([9e-4, 9e-4]))
        assert cfg.sensor.delay_s == pytest.approx(0.1)
        assert cfg.delay_periods == 3  # 2.5 periods rounded up
        assert cfg.filter.kind == "rbpf" and cfg.filter.rbpf.n == 100
        assert cfg.filter.rbpf.transition_known
        np.testing.assert_allclose(cfg.filter.sigma0, np.diag([100, 100, 1, 4, 4]))
        assert (cfg.gains.w_v, cfg.gains.w_psi) == (0.2, 0.04)
        assert (cfg.gains.m_v, cfg.gains.m_psi) == (5.0, 0.6)
        assert (cfg.gains.c_v, cfg.gains.c_psi) == (5.0, 3.0)

    def test_radar_preset_values(self):
        cfg = presets.get("paper-3mode-radar")
        assert cfg.tau_sim == pytest.approx(0.1)
        assert cfg.horizon == 3000
        assert cfg.sensor.kind == "radar"
        assert cfg.sensor.radar.rate_hz == 10.0
        np.testing.assert_allclose(cfg.sensor.radar.noise_cov, np.diag([4.0, 1e-4]))
        assert cfg.delay_periods == 1

    def test_nine_mode_values(self):
        cfg = presets.get("paper-9mode")
        assert cfg.gmt.maneuver.n_modes == 9
        np.testing.assert_allclose(np.diag(cfg.gmt.maneuver.transition), 0.6)
        off = cfg.gmt.maneuver.transition[np.eye(9) == 0]
        np.testing.assert_allclose(off, 0.05)
        assert not cfg.filter.rbpf.transition_known
        np.testing.assert_array_equal(
            cfg.gmt.maneuver.modes,
            [[0, 0], [1, 0], [1, 1], [0, 1], [-1, 1], [-1, 0], [-1, -1], [0, -1], [1, -1]],
        )

    def test_stationary_values(self):
        cfg = presets.get("paper-stationary")
        np.testing.assert_array_equal(cfg.gmt.maneuver.modes, [[0.0, 0.0]])
        np.testing.assert_array_equal(cfg.gmt.noise_cov, np.zeros((3, 3)))
        assert cfg.filter.assumed_maneuver is not None
        assert cfg.filter.assumed_maneuver.n_modes == 3

    def test_unknown_preset_rejected(self):
        with pytest.raises(KeyError):
            presets.get("paper-unknown")


class TestEpisode:
    def test_determinism_same_seed(self):
        cfg = small_config()
        a = harness.run_episode(cfg, seed=42)
        b = harness.run_episode(cfg, seed=42)
        for col in harness.TRACE_SCALAR_COLUMNS:
            np.testing.assert_array_equal(a.columns[col], b.columns[col])
        np.testing.assert_array_equal(a.mode_fractions, b.mode_fractions)

    def test_different_seed_differs(self):
        cfg = small_config()
        a = harness.run_episode(cfg, seed=1)
        b = harness.run_episode(cfg, seed=2)
        assert not np.array_equal(a.columns["t_x"], b.columns["t_x"])

    def test_stationary_perfect_state_converges_to_radius(self):
        cfg = presets.get("paper-stationary")
        cfg = dataclasses.replace(cfg, guidance_source="truth",
                                  filter=dataclasses.replace(cfg.filter, kind="none"))
        trace = harness.run_episode(cfg, seed=3)
        rel = trace.columns["rel_dist"]
        assert np.all(np.abs(rel[-1875:] - 200.0) < 1.0)

    def test_zero_disturbance_perfect_state_tracks_exactly(self):
        # Constant-velocity target, no disturbances, no noise: after the
        # transient the commands are tracked to numerical chatter level.
        cfg = presets.get("paper-stationary")
        gmt_scn = harness.GmtScenario(
            initial_state=np.array([0.0, 100.0, 0.0, 3.0, 0.0]),
            maneuver=gmt.ManeuverModel(np.zeros((1, 2)), np.ones((1, 1))),
            noise_cov=np.zeros((3, 3)),
        )
        uav_scn = dataclasses.replace(
            cfg.uav,
            disturbance_sigma=(0.0, 0.0),
            disturbance_bounds=harness.uav.DisturbanceBounds(0.0, 0.0),
        )
        gains = harness.ismc.GainSet(1e-9, 1e-9, 5.0, 0.6, 5.0, 3.0)
        cfg = dataclasses.replace(
            cfg, horizon=10_000, gmt=gmt_scn, uav=uav_scn, gains=gains,
            guidance_source="truth",
            filter=dataclasses.replace(cfg.filter, kind="none"),
        )
        trace = harness.run_episode(cfg, seed=4)
        assert np.max(np.abs(trace.columns["e_v"][-1000:])) < 1e-6
        assert np.max(np.abs(trace.columns["e_psi"][-1000:])) < 1e-6

    def test_delayed_measurement_matches_earlier_state(self):
        # Noise-free radar, 0.3 s delay at 10 Hz: the measurement delivered
        # at step k equals the measurement of the geometry 3 steps earlier.
        cfg = presets.get("paper-3mode-radar")
        radar = sensors.RadarModel(noise_cov=np.zeros((2, 2)), rate_hz=10.0)
        sensor = dataclasses.replace(cfg.sensor, radar=radar, delay_s=0.3)
        cfg = dataclasses.replace(cfg, horizon=40, sensor=sensor)
        assert cfg.delay_periods == 3
        trace = harness.run_episode(cfg, seed=7)
        cols = trace.columns
        uav_alt = cfg.uav.altitude
        delivered = np.nonzero(cols["meas_valid"] == 1.0)[0]
        assert delivered.size > 0
        assert delivered[0] == 3  # k = 4: first delivery after the buffer fills
        for i in delivered[:10]:
            j = i - 3
            target = np.array([cols["t_x"][j], cols["t_y"][j], cols["t_z"][j]])
            # UAV pose at capture time (recorded post-step; reconstruct via
            # the previous row's pose, i.e. the pose the capture used).
            uav_state = harness.uav.UavState(
                cols["a_x"][j - 1] if j > 0 else cfg.uav.initial.x,
                cols["a_y"][j - 1] if j > 0 else cfg.uav.initial.y,
                cols["a_v"][j - 1] if j > 0 else cfg.uav.initial.v,
                cols["a_psi"][j - 1] if j > 0 else cfg.uav.initial.psi,
            )
            want = sensors.radar_measure(
                sensors.relative_position(target, uav_state, uav_alt)
            )
            np.testing.assert_allclose([cols["m1"][i], cols["m2"][i]], want, atol=1e-9)

    def test_filter_none_reports_truth(self):
        cfg = small_config(filter=dataclasses.replace(small_config().filter, kind="none"),
                           guidance_source="truth")
        trace = harness.run_episode(cfg, seed=5)
        np.testing.assert_array_equal(trace.columns["est_x"], trace.columns["t_x"])

    def test_ekf_filter_runs(self):
        cfg = small_config(filter=dataclasses.replace(small_config().filter, kind="ekf"))
        trace = harness.run_episode(cfg, seed=6)
        err = np.hypot(trace.columns["est_x"] - trace.columns["t_x"],
                       trace.columns["est_y"] - trace.columns["t_y"])
        assert np.isfinite(err).all()


class TestMonteCarlo:
    def test_single_run_rmse_is_error_norm(self):
        cfg = small_config()
        report = harness.run_monte_carlo(cfg, 1)
        trace = harness.run_episode(cfg, seed=cfg.seed)
        want = np.hypot(trace.columns["est_x"] - trace.columns["t_x"],
                        trace.columns["est_y"] - trace.columns["t_y"])
        np.testing.assert_allclose(report.rmse, want, atol=1e-12)

    def test_seed_schedule_prefix_stable(self):
        cfg = small_config()
        three = harness.run_monte_carlo(cfg, 3)
        five = harness.run_monte_carlo(cfg, 5)
        assert three.seeds == five.seeds[:3]
        # Aggregates over the shared prefix are reproducible run-by-run.
        a0 = harness.run_episode(cfg, seed=three.seeds[0])
        b0 = harness.run_episode(cfg, seed=five.seeds[0])
        np.testing.assert_array_equal(a0.columns["est_x"], b0.columns["est_x"])

    def test_parallel_invariance(self):
        cfg = small_config()
        serial = harness.run_monte_carlo(cfg, 4, parallelism=1)
        parallel = harness.run_monte_carlo(cfg, 4, parallelism=2)
        assert json.dumps(serial.to_dict(), sort_keys=True) == json.dumps(
            parallel.to_dict(), sort_keys=True
        )

    def test_report_round_trip(self):
        report = harness.run_monte_carlo(small_config(), 2)
        back = harness.MonteCarloReport.from_dict(report.to_dict())
        assert json.dumps(report.to_dict(), sort_keys=True) == json.dumps(
            back.to_dict(), sort_keys=True
        )

    def test_invalid_runs_rejected(self):
        with pytest.raises(ValueError):
            harness.run_monte_carlo(small_config(), 0)


class TestExport:
    def test_csv_row_count_and_header(self, tmp_path):
        cfg = small_config()
        trace = harness.run_episode(cfg, seed=11)
        out = tmp_path / "trace.csv"
        harness.export_trace(trace, str(out), "csv")
        lines = out.read_text().splitlines()
        assert len(lines) == cfg.horizon + 1
        header = lines[0].split(",")
        assert header[: len(harness.TRACE_SCALAR_COLUMNS)] == harness.TRACE_SCALAR_COLUMNS
        assert header[len(harness.TRACE_SCALAR_COLUMNS):] == [
            f"mode_frac_{i}" for i in range(trace.mode_fractions.shape[1])
        ]
        assert out.read_text().endswith("\n")

    def test_trace_json_round_trip(self, tmp_path):
        trace = harness.run_episode(small_config(), seed=12)
        out = tmp_path / "trace.json"
        harness.export_trace(trace, str(out), "json")
        data = json.loads(out.read_text())
        np.testing.assert_array_equal(np.array(data["columns"]["t_x"]),
                                      trace.columns["t_x"])

    def test_report_json_round_trip_identical(self, tmp_path):
        report = harness.run_monte_carlo(small_config(), 2)
        out = tmp_path / "report.json"
        harness.export_report(report, str(out), "json")
        loaded = harness.MonteCarloReport.from_dict(json.loads(out.read_text()))
        assert json.dumps(loaded.to_dict(), sort_keys=True) == json.dumps(
            report.to_dict(), sort_keys=True
        )

    def test_field_grid_schema(self, tmp_path):
        spec = guidance.LoiterSpec(200.0, 5.0)
        grid = harness.field_grid(spec, np.linspace(-400, 400, 5), np.linspace(-400, 400, 4))
        assert grid.shape == (20, 4)
        speeds = np.hypot(grid[:, 2], grid[:, 3])
        np.testing.assert_allclose(speeds, 5.0, atol=1e-9)
        out = tmp_path / "field.csv"
        harness.export_field_grid(grid, str(out))
        lines = out.read_text().splitlines()
        assert lines[0] == "x,y,vx,vy"
        assert len(lines) == 21

    def test_unwritable_path_raises_with_context(self, tmp_path):
        trace = harness.run_episode(small_config(), seed=13)
        bad = tmp_path / "missing_dir" / "trace.csv"
        with pytest.raises(OSError, match="missing_dir"):
            harness.export_trace(trace, str(bad), "csv")


class TestCli:
    def test_simulate_writes_csv(self, tmp_path, capsys):
        out = tmp_path / "t.csv"
        code = cli.main(["simulate", "--preset", "paper-stationary", "--seed", "1",
                         "--horizon", "50", "--out", str(out)])
        assert code == 0
        assert out.exists()
        assert len(out.read_text().splitlines()) == 51

    def test_simulate_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            assert cli.main(["simulate", "--preset", "paper-3mode-camera", "--seed", "42",
                             "--horizon", "100", "--out", str(path)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_validate_ok(self, capsys):
        assert cli.main(["validate", "--preset", "paper-3mode-camera"]) == 0
        assert "all checks passed" in capsys.readouterr().out

    def test_validate_bad_config_exit_2(self, tmp_path, capsys):
        cfg = small_config(loiter=guidance.LoiterSpec(10.0, 5.0))
        path = tmp_path / "bad.json"
        harness.save_config(cfg, str(path))
        assert cli.main(["validate", "--config", str(path)]) == 2

    def test_montecarlo_json(self, tmp_path):
        out = tmp_path / "r.json"
        code = cli.main(["montecarlo", "--preset", "paper-stationary", "--runs", "2",
                         "--horizon", "60", "--out", str(out)])
        assert code == 0
        data = json.loads(out.read_text())
        assert len(data["seeds"]) == 2

    def test_export_field(self, tmp_path):
        out = tmp_path / "f.csv"
        code = cli.main(["export-field", "--preset", "paper-stationary",
                         "--nx", "7", "--ny", "3", "--out", str(out)])
        assert code == 0
        assert len(out.read_text().splitlines()) == 22

    def test_config_file_flow(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        harness.save_config(small_config(), str(cfg_path))
        out = tmp_path / "t.csv"
        assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(out)]) == 0
        assert out.exists()
