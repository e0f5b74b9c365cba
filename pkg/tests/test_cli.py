import json
import shutil

import numpy as np
import pytest
from click.testing import CliRunner

from poakit import core, detect as detect_mod, io as pio, metrics as mx
from poakit.cli import cli

SYNTH_CFG = {
    "length": 600,
    "variables": [
        {"kind": "sine", "amplitude": 1.0, "period": 50.0},
        {"kind": "ar1", "coef": 0.85, "noise_std": 0.08},
    ],
    "anomalies": [
        {"start": 300, "length": 20, "kind": "level_shift", "magnitude": 2.0},
        {"start": 450, "length": 15, "kind": "spike", "magnitude": 2.0},
    ],
    "precursor": {"lead": 15, "length": 15, "drift_magnitude": 0.8, "noise_inflation": 2.0},
    "obs_noise_std": 0.05,
    "seed": 11,
}

MEMBERS = "persistence,moving_average:5,ar_ols:2,exp_smoothing:0.5"


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run the full CLI pipeline once on a small synthetic dataset."""
    root = tmp_path_factory.mktemp("pipeline")
    runner = CliRunner()
    cfg_path = root / "cfg.json"
    cfg_path.write_text(json.dumps(SYNTH_CFG))

    steps = [
        ["synth", str(root / "data"), "--config", str(cfg_path)],
        ["split", str(root / "data/train.csv"), str(root / "parts"), "--train-frac", "0.7"],
        [
            "forecast", str(root / "parts/train.csv"), str(root / "parts/valid.csv"),
            str(root / "fc"), "--test", str(root / "data/test.csv"),
            "--members", MEMBERS, "--top-k", "3", "--input-len", "30", "--horizon", "8",
        ],
        [
            "score", str(root / "fc/test_forecasts.csv"),
            str(root / "fc/valid_forecasts.csv"), str(root / "run/scores.csv"),
        ],
        [
            "detect", str(root / "run/scores.csv"), str(root / "data/labels.csv"),
            str(root / "run/detection.csv"), "--grid-n", "32", "--delta", "8",
        ],
        [
            "evaluate", str(root / "run/detection.csv"), str(root / "data/labels.csv"),
            str(root / "run"), "--delta", "8",
        ],
    ]
    (root / "run").mkdir()
    for args in steps:
        result = runner.invoke(cli, args)
        assert result.exit_code == 0, f"{args}: {result.output}"
    return root


class TestPipeline:
    def test_outputs_exist(self, pipeline):
        for rel in (
            "data/train.csv", "data/test.csv", "data/labels.csv",
            "data/precursor_truth.csv", "data/manifest.json",
            "parts/train.csv", "parts/valid.csv",
            "fc/scoreboard.csv", "fc/valid_forecasts.csv", "fc/test_forecasts.csv",
            "run/scores.csv", "run/detection.csv", "run/detection.csv.meta.json",
            "run/evaluation.json", "run/theta_curve.csv",
        ):
            assert (pipeline / rel).exists(), rel

    def test_scoreboard_selects_top_k(self, pipeline):
        lines = (pipeline / "fc/scoreboard.csv").read_text().splitlines()
        assert lines[0] == "member_id,mse,mae,selected"
        rows = [line.split(",") for line in lines[1:]]
        assert len(rows) == 4
        assert sum(int(r[3]) for r in rows) == 3

    def test_scores_cover_tail_of_series(self, pipeline):
        scores = pio.read_scores(pipeline / "run/scores.csv")
        assert len(scores) == SYNTH_CFG["length"]
        # stride-1 windows with input 30: first scored timestamp is 30
        assert not scores.defined[:30].any()
        assert scores.defined[30:].all()

    def test_evaluation_matches_library(self, pipeline):
        detection = pio.read_detection(pipeline / "run/detection.csv")
        labels = pio.read_labels_csv(pipeline / "data/labels.csv")
        payload = json.loads((pipeline / "run/evaluation.json").read_text())
        params = mx.MetricParams(theta=0.0, delta=8)
        anomalies = core.segments_from_flags(labels.flags)
        segments = detect_mod.split_precursor_prediction(detection, anomalies, 8)
        sweep = mx.ptapr_theta_sweep(segments, params, np.linspace(0, 1, 101))
        assert payload["ptapr"]["f1_0"] == pytest.approx(sweep.f1_at_0, abs=1e-8)
        assert payload["ptapr"]["f1_1"] == pytest.approx(sweep.f1_at_1, abs=1e-8)
        assert payload["ptapr"]["auc"] == pytest.approx(sweep.auc, abs=1e-8)
        suite = mx.pa_k_suite(detection.flags, labels.flags)
        assert payload["pak"]["f1_pa"] == pytest.approx(suite.f1_pa, abs=1e-8)

    def test_report_consolidates(self, pipeline):
        runner = CliRunner()
        shutil.copy(pipeline / "data/labels.csv", pipeline / "run/labels.csv")
        result = runner.invoke(cli, ["report", str(pipeline / "run")])
        assert result.exit_code == 0, result.output
        assert (pipeline / "run/report.json").exists()
        assert (pipeline / "run/plot_timeline.csv").exists()
        assert (pipeline / "run/plot_theta_curve.csv").exists()
        lines = (pipeline / "run/plot_timeline.csv").read_text().splitlines()
        assert lines[0] == "timestamp,score,flag,label"
        assert len(lines) == SYNTH_CFG["length"] + 1

    def test_sweep_k(self, pipeline):
        runner = CliRunner()
        out = pipeline / "run/k_sweep.csv"
        result = runner.invoke(
            cli,
            [
                "sweep", str(pipeline / "run/detection.csv"),
                str(pipeline / "data/labels.csv"), str(out),
                "--param", "k", "--values", "0.1,0.01,0.001", "--delta", "8",
            ],
        )
        assert result.exit_code == 0, result.output
        lines = out.read_text().splitlines()
        assert lines[0] == "k,f1_0,f1_1,auc"
        assert len(lines) == 4


class TestDeterminism:
    def test_synth_reproducible_bytes(self, tmp_path):
        runner = CliRunner()
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(SYNTH_CFG))
        for out in ("a", "b"):
            result = runner.invoke(
                cli, ["synth", str(tmp_path / out), "--config", str(cfg_path)]
            )
            assert result.exit_code == 0
        assert (tmp_path / "a/test.csv").read_bytes() == (tmp_path / "b/test.csv").read_bytes()
        assert (tmp_path / "a/train.csv").read_bytes() == (tmp_path / "b/train.csv").read_bytes()

    def test_seed_env_override(self, tmp_path, monkeypatch):
        runner = CliRunner()
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(SYNTH_CFG))
        monkeypatch.setenv("POAKIT_SEED", "999")
        result = runner.invoke(cli, ["synth", str(tmp_path / "env"), "--config", str(cfg_path)])
        assert result.exit_code == 0
        manifest = json.loads((tmp_path / "env/manifest.json").read_text())
        assert manifest["seed"] == 999

    def test_jobs_flag_does_not_change_output(self, tmp_path):
        runner = CliRunner()
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(SYNTH_CFG))
        assert runner.invoke(cli, ["synth", str(tmp_path / "d"), "--config", str(cfg_path)]).exit_code == 0
        assert runner.invoke(
            cli, ["split", str(tmp_path / "d/train.csv"), str(tmp_path / "p")]
        ).exit_code == 0
        outputs = []
        for jobs, name in (("1", "f1"), ("4", "f4")):
            result = runner.invoke(
                cli,
                [
                    "forecast", str(tmp_path / "p/train.csv"), str(tmp_path / "p/valid.csv"),
                    str(tmp_path / name), "--members", MEMBERS, "--top-k", "3",
                    "--input-len", "30", "--horizon", "8", "--jobs", jobs,
                ],
            )
            assert result.exit_code == 0, result.output
            outputs.append((tmp_path / name / "valid_forecasts.csv").read_bytes())
        assert outputs[0] == outputs[1]


class TestOptionalFlags:
    def test_detect_search_pair_matches_default_on_same_files(self, pipeline, tmp_path):
        runner = CliRunner()
        out = tmp_path / "det2.csv"
        result = runner.invoke(
            cli,
            [
                "detect", str(pipeline / "run/scores.csv"),
                str(pipeline / "data/labels.csv"), str(out),
                "--grid-n", "32", "--delta", "8",
                "--search-scores", str(pipeline / "run/scores.csv"),
                "--search-labels", str(pipeline / "data/labels.csv"),
            ],
        )
        assert result.exit_code == 0, result.output
        assert out.read_bytes() == (pipeline / "run/detection.csv").read_bytes()

    def test_detect_search_flags_must_pair(self, pipeline, tmp_path):
        runner = CliRunner()
        result = runner.invoke(
            cli,
            [
                "detect", str(pipeline / "run/scores.csv"),
                str(pipeline / "data/labels.csv"), str(tmp_path / "d.csv"),
                "--search-scores", str(pipeline / "run/scores.csv"),
            ],
        )
        assert result.exit_code == 2
        assert "go together" in result.output

    def test_forecast_standardize_changes_scale(self, tmp_path):
        runner = CliRunner()
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(SYNTH_CFG))
        assert runner.invoke(cli, ["synth", str(tmp_path / "d"), "--config", str(cfg_path)]).exit_code == 0
        assert runner.invoke(
            cli, ["split", str(tmp_path / "d/train.csv"), str(tmp_path / "p")]
        ).exit_code == 0
        for flag, name in (("--no-standardize", "raw"), ("--standardize", "std")):
            result = runner.invoke(
                cli,
                [
                    "forecast", str(tmp_path / "p/train.csv"), str(tmp_path / "p/valid.csv"),
                    str(tmp_path / name), "--members", MEMBERS, "--top-k", "3",
                    "--input-len", "30", "--horizon", "8", flag,
                ],
            )
            assert result.exit_code == 0, result.output
        raw = (tmp_path / "raw/valid_forecasts.csv").read_bytes()
        std = (tmp_path / "std/valid_forecasts.csv").read_bytes()
        assert raw != std
        manifest = json.loads((tmp_path / "std/manifest.json").read_text())
        assert manifest["config"]["standardize"] is True


class TestErrorHandling:
    def test_missing_file_is_usage_error(self):
        runner = CliRunner()
        result = runner.invoke(cli, ["split", "/nonexistent.csv", "/tmp/x"])
        assert result.exit_code == 2

    def test_validation_error_exit_code(self, tmp_path):
        runner = CliRunner()
        bad = tmp_path / "bad.csv"
        bad.write_text("timestamp,x\n0,1.0\n0,2.0\n")
        result = runner.invoke(cli, ["split", str(bad), str(tmp_path / "out")])
        assert result.exit_code == 2
        assert "error[validation]" in result.output

    def test_length_mismatch_is_validation_error(self, tmp_path):
        runner = CliRunner()
        scores = tmp_path / "scores.csv"
        scores.write_text("timestamp,score,lead_time\n0,1.0,1\n1,2.0,1\n")
        labels = tmp_path / "labels.csv"
        labels.write_text("timestamp,label\n0,0\n")
        result = runner.invoke(
            cli, ["detect", str(scores), str(labels), str(tmp_path / "det.csv")]
        )
        assert result.exit_code == 2
        assert "error[validation]" in result.output

    def test_bad_metric_name(self, tmp_path):
        runner = CliRunner()
        scores = tmp_path / "scores.csv"
        scores.write_text("timestamp,score,lead_time\n0,1.0,1\n")
        labels = tmp_path / "labels.csv"
        labels.write_text("timestamp,label\n0,1\n")
        result = runner.invoke(
            cli,
            ["detect", str(scores), str(labels), str(tmp_path / "d.csv"),
             "--metric", "nonsense"],
        )
        assert result.exit_code == 2

    def test_unknown_evaluate_metric(self, tmp_path):
        runner = CliRunner()
        det = tmp_path / "det.csv"
        det.write_text("timestamp,flag,lead_time\n0,1,1\n")
        labels = tmp_path / "labels.csv"
        labels.write_text("timestamp,label\n0,1\n")
        result = runner.invoke(
            cli, ["evaluate", str(det), str(labels), str(tmp_path / "out"),
                  "--metrics", "bogus"],
        )
        assert result.exit_code == 2
