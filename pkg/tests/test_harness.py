"""Tests for the experiment harness and its CLI."""

import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from beliefplan.cli import main
from beliefplan.harness import (
    ExperimentConfig,
    ExperimentReport,
    cohens_d,
    config_from_file,
    default_goal,
    export,
    generate_scene_files,
    rows_to_csv,
    run,
    summary_to_json,
    unimodal_rise_fall,
    wilson_ci,
    _trial_seeds,
)
from beliefplan.scene import generate_scene, scene_from_json


class TestWilson:
    def test_published_interval(self):
        # hand evaluation: p=0.88, z=1.96, center=0.918416, margin=0.097925,
        # denominator=1.076832
        lo, hi = wilson_ci(44, 50, 1.96)
        assert abs(lo - 0.762) < 5e-4
        assert abs(hi - 0.944) < 5e-4
        assert abs(lo - 0.7619487) < 1e-6
        assert abs(hi - 0.9438251) < 1e-6

    def test_all_successes(self):
        # p=1 makes the margin exactly z^2/2n, so the upper limit is exactly 1
        lo, hi = wilson_ci(10, 10, 1.96)
        assert hi == 1.0
        assert abs(lo - 10 / (10 + 1.96**2)) < 1e-12

    def test_no_successes(self):
        lo, hi = wilson_ci(0, 10, 1.96)
        assert lo == 0.0
        assert 0 < hi < 1

    def test_contains_point_estimate(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 400))
            s = int(rng.integers(0, n + 1))
            lo, hi = wilson_ci(s, n)
            assert 0.0 <= lo <= s / n <= hi <= 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            wilson_ci(5, 0)
        with pytest.raises(ValueError):
            wilson_ci(11, 10)
        with pytest.raises(ValueError):
            wilson_ci(-1, 10)
        with pytest.raises(ValueError):
            wilson_ci(5, 10, z=0.0)


class TestCohensD:
    def test_hand_value(self):
        assert abs(cohens_d([1, 2, 3], [2, 3, 4]) - (-1.0)) < 1e-12

    def test_identical_samples(self):
        assert cohens_d([1, 2, 3], [1, 2, 3]) == 0.0

    def test_one_pooled_sd_shift(self):
        xs = [1.0, 2.0, 3.0]
        ys = [x - 1.0 for x in xs]  # shifted down by exactly one pooled SD
        assert abs(cohens_d(xs, ys) - 1.0) < 1e-12

    def test_degenerate(self):
        with pytest.raises(ValueError):
            cohens_d([1.0], [2.0, 3.0])
        with pytest.raises(ValueError):
            cohens_d([2.0, 2.0], [2.0, 2.0])


class TestUnimodal:
    def test_rise_then_fall(self):
        assert unimodal_rise_fall([0.2, 0.6, 0.9, 0.7, 0.4])

    def test_plateau_peak(self):
        assert unimodal_rise_fall([0.2, 0.9, 0.9, 0.4])

    def test_monotone_rise_is_not_shaped(self):
        assert not unimodal_rise_fall([0.1, 0.5, 0.9])

    def test_dip_rejected(self):
        assert not unimodal_rise_fall([0.2, 0.8, 0.3, 0.9, 0.4])

    def test_too_short(self):
        assert not unimodal_rise_fall([0.2, 0.8])


class TestConfig:
    def test_defaults_valid(self):
        cfg = ExperimentConfig(kind="calibration")
        assert cfg.trials == 20 and cfg.samples == 10_000

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            ExperimentConfig(kind="nope")

    def test_bad_ranges(self):
        with pytest.raises(ValueError):
            ExperimentConfig(kind="calibration", trials=0)
        with pytest.raises(ValueError):
            ExperimentConfig(kind="calibration", tau_plan=1.0)
        with pytest.raises(ValueError):
            ExperimentConfig(kind="calibration", alpha=0.0)
        with pytest.raises(ValueError):
            ExperimentConfig(kind="threshold-sweep", taus=(0.5, 1.5))

    def test_taus_normalized(self):
        cfg = ExperimentConfig(kind="threshold-sweep", taus=[0.5, 0.7])
        assert cfg.taus == (0.5, 0.7)

    def test_noise_mapping(self):
        cfg = ExperimentConfig(
            kind="alpha-fit", noise_flip=0.05, noise_sd=0.4, miscal_gamma=2.0, alpha=0.25
        )
        noise = cfg.noise(exact_reduction=True)
        assert noise.base_flip_rate == 0.05
        assert noise.logit_noise_sd == 0.4
        assert noise.miscal_gamma == 2.0
        assert noise.look_gain == 0.25 and noise.push_gain == 0.25
        assert noise.exact_reduction

    def test_config_file_roundtrip(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"trials": 7, "taus": [0.4, 0.6]}))
        vals = config_from_file(p)
        assert vals == {"trials": 7, "taus": (0.4, 0.6)}

    def test_config_file_unknown_field(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"bogus": 1}))
        with pytest.raises(ValueError, match="bogus"):
            config_from_file(p)


class TestSeeds:
    def test_deterministic_and_distinct(self):
        a = _trial_seeds(3, 0, 5)
        assert a == _trial_seeds(3, 0, 5)
        seen = {_trial_seeds(3, s, t) for s in range(4) for t in range(50)}
        assert len(seen) == 200


class TestDefaultGoal:
    def test_three_object_chain(self):
        scene = generate_scene(4, 0.4, 12)
        goal = default_goal(scene)
        ids = scene.object_ids()
        assert str(goal) == f"On({ids[0]},{ids[1]}) & On({ids[1]},{ids[2]})"


class TestCalibrationKind:
    def test_schema_and_summary(self):
        rep = run(ExperimentConfig(kind="calibration", seed=4, samples=300))
        assert rep.kind == "calibration"
        assert rep.header == ("confidence", "label")
        assert len(rep.rows) == 300
        for p, y in rep.rows:
            assert 0.0 <= p <= 1.0 and y in (0, 1)
        assert 0.0 <= rep.summary["ece"] <= 1.0
        assert rep.summary["n_samples"] == 300
        assert set(rep.summary["checks"]) == {"ece_within_tol", "brier_within_tol"}


class TestAlphaFitKind:
    def test_schema_and_decay(self):
        cfg = ExperimentConfig(
            kind="alpha-fit", seed=9, trials=3, steps=4,
            noise_flip=0.02, noise_sd=0.6, n_objects=3,
        )
        rep = run(cfg)
        assert rep.header == ("episode_id", "step", "U", "action_kind")
        assert len(rep.rows) == 3 * 5  # steps + initial observation
        for episode in range(3):
            trace = [r[2] for r in rep.rows if r[0] == episode]
            steps = [r[1] for r in rep.rows if r[0] == episode]
            assert steps == list(range(5))
            assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))
            assert trace[-1] < trace[0]
        kinds = {r[3] for r in rep.rows}
        assert kinds == {"observe", "look_closer"}
        assert 0.0 < rep.summary["alpha_hat"] < 1.0


class TestConvergenceKind:
    def test_schema_and_bound(self):
        cfg = ExperimentConfig(
            kind="convergence", seed=2, trials=4, n_objects=3,
            noise_flip=0.1, noise_sd=0.8,
        )
        rep = run(cfg)
        assert rep.header == ("trial", "u0", "k_empirical", "k_bound", "gap_pct")
        assert len(rep.rows) == 4
        for trial, u0, k_emp, k_bound, gap in rep.rows:
            assert 0.0 < u0 <= 1.0
            assert k_emp <= k_bound + 1  # exact-mode guarantee
            if k_bound > 0:
                assert abs(gap - 100.0 * (k_bound - k_emp) / k_bound) < 1e-9
        assert rep.summary["checks"]["all_within_bound_plus_one"]


class TestSweepKind:
    def test_schema(self):
        cfg = ExperimentConfig(
            kind="threshold-sweep", seed=6, trials=2, taus=(0.55, 0.75)
        )
        rep = run(cfg)
        assert rep.header == ("tau", "success_rate", "mean_time_ms", "trials")
        assert len(rep.rows) == 2
        assert [r[0] for r in rep.rows] == [0.55, 0.75]
        for _, rate, ms, trials in rep.rows:
            assert 0.0 <= rate <= 1.0 and ms > 0 and trials == 2
        assert "checks" in rep.summary


class TestBenchmarkKind:
    def test_paired_rows(self):
        cfg = ExperimentConfig(
            kind="plan-benchmark", seed=8, trials=3, noise_flip=0.12, noise_sd=0.9
        )
        rep = run(cfg)
        assert len(rep.rows) == 6
        for trial in range(3):
            policies = [r[1] for r in rep.rows if r[0] == trial]
            assert policies == ["info_on", "info_off"]
        s = rep.summary
        lo, hi = s["wilson_info_on"]
        assert lo <= s["success_rate_info_on"] <= hi

    def test_info_off_never_gathers(self):
        cfg = ExperimentConfig(
            kind="plan-benchmark", seed=21, trials=3, noise_flip=0.15, noise_sd=1.0
        )
        rep = run(cfg)
        assert all(r[3] == 0 for r in rep.rows if r[1] == "info_off")


class TestMrfCheckKind:
    def test_schema_and_tightening(self):
        rep = run(ExperimentConfig(kind="mrf-check", seed=14, trials=12))
        assert rep.header == (
            "trial", "n_nodes", "n_edges", "converged", "max_marginal_dev",
            "u_dep", "u_indep",
        )
        assert len(rep.rows) == 12
        for _, n, n_edges, converged, dev, u_dep, u_indep in rep.rows:
            assert 2 <= n <= 10
            assert u_dep <= u_indep + 1e-9
            if n_edges == 0:
                assert abs(u_dep - u_indep) <= 1e-9
        assert rep.summary["checks"]["tightening_holds"]

    def test_includes_edgeless_graphs(self):
        rep = run(ExperimentConfig(kind="mrf-check", seed=14, trials=40))
        assert rep.summary["n_edgeless"] >= 1
        assert rep.summary["n_edgeless"] < 40


class TestDeterminism:
    def test_rerun_byte_identical(self):
        cfg = ExperimentConfig(kind="mrf-check", seed=5, trials=8)
        a, b = run(cfg), run(cfg)
        assert rows_to_csv(a.header, a.rows) == rows_to_csv(b.header, b.rows)
        assert summary_to_json(a.summary) == summary_to_json(b.summary)

    @pytest.mark.parametrize("workers", [4, 8])
    def test_worker_count_invisible(self, workers):
        base = ExperimentConfig(kind="mrf-check", seed=5, trials=8)
        seq = run(base)
        par = run(replace(base, workers=workers))
        assert rows_to_csv(seq.header, seq.rows) == rows_to_csv(par.header, par.rows)
        assert summary_to_json(seq.summary) == summary_to_json(par.summary)


class TestExport:
    def test_csv_files(self, tmp_path):
        rep = run(ExperimentConfig(kind="mrf-check", seed=1, trials=3))
        paths = export(rep, tmp_path, "csv")
        assert [p.name for p in paths] == ["mrf-check_rows.csv", "mrf-check_summary.json"]
        text = paths[0].read_text()
        assert text.splitlines()[0] == "trial,n_nodes,n_edges,converged,max_marginal_dev,u_dep,u_indep"
        assert len(text.splitlines()) == 4
        doc = json.loads(paths[1].read_text())
        assert doc["n_trials"] == 3

    def test_json_format(self, tmp_path):
        rep = run(ExperimentConfig(kind="mrf-check", seed=1, trials=3))
        paths = export(rep, tmp_path, "json")
        assert [p.name for p in paths] == ["mrf-check.json"]
        doc = json.loads(paths[0].read_text())
        assert doc["kind"] == "mrf-check"
        assert doc["header"] == list(rep.header)
        assert len(doc["rows"]) == 3

    def test_empty_report_header_only(self, tmp_path):
        rep = ExperimentReport("threshold-sweep", ("tau", "success_rate", "mean_time_ms", "trials"), [], {})
        paths = export(rep, tmp_path, "csv")
        assert paths[0].read_text() == "tau,success_rate,mean_time_ms,trials\n"

    def test_rewrite_byte_identical(self, tmp_path):
        rep = run(ExperimentConfig(kind="convergence", seed=3, trials=3, n_objects=3))
        a = export(rep, tmp_path / "a", "csv")
        b = export(rep, tmp_path / "b", "csv")
        assert a[0].read_bytes() == b[0].read_bytes()
        assert a[1].read_bytes() == b[1].read_bytes()

    def test_nine_significant_digits(self):
        text = rows_to_csv(("x",), [(0.123456789123456789,)])
        assert text == "x\n0.123456789\n"

    def test_bad_format(self, tmp_path):
        rep = ExperimentReport("mrf-check", ("a",), [], {})
        with pytest.raises(ValueError):
            export(rep, tmp_path, "yaml")


class TestSceneFiles:
    def test_gen_and_reload(self, tmp_path):
        paths = generate_scene_files(3, 4, 0.4, 17, tmp_path)
        assert len(paths) == 3
        for p in paths:
            scene = scene_from_json(p.read_text())
            assert len(scene.objects) == 4

    def test_count_validation(self, tmp_path):
        with pytest.raises(ValueError):
            generate_scene_files(0, 4, 0.4, 17, tmp_path)


class TestCli:
    def test_mrf_check_prints_summary(self, capsys, tmp_path):
        rc = main(["mrf-check", "--trials", "4", "--seed", "2", "--out-dir", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        summary = json.loads(out)
        assert summary["n_trials"] == 4
        assert (tmp_path / "mrf-check_rows.csv").exists()
        assert (tmp_path / "mrf-check_summary.json").exists()

    def test_json_format_flag(self, capsys, tmp_path):
        rc = main(["verify-convergence", "--trials", "2", "--objects", "3",
                   "--out-dir", str(tmp_path), "--format", "json"])
        assert rc == 0
        assert (tmp_path / "convergence.json").exists()

    def test_config_file_with_cli_override(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"trials": 9, "n_objects": 3}))
        rc = main(["verify-convergence", "--config", str(cfg), "--trials", "2"])
        assert rc == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["n_trials"] == 2  # flag beats file

    def test_bad_config_field(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"wrong": 1}))
        rc = main(["mrf-check", "--config", str(cfg)])
        assert rc == 2
        assert "wrong" in capsys.readouterr().err

    def test_gen_scenes(self, capsys, tmp_path):
        rc = main(["gen-scenes", "--trials", "2", "--objects", "3",
                   "--seed", "4", "--out-dir", str(tmp_path / "scenes")])
        assert rc == 0
        files = sorted((tmp_path / "scenes").iterdir())
        assert len(files) == 2
        for f in files:
            assert len(scene_from_json(f.read_text()).objects) == 3

    def test_missing_command(self):
        with pytest.raises(SystemExit):
            main([])

    def test_sweep_cli_taus(self, capsys):
        rc = main(["sweep-threshold", "--trials", "2", "--taus", "0.6", "0.8",
                   "--seed", "3"])
        assert rc == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["tau_grid"] == [0.6, 0.8]
