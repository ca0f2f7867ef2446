import hashlib
import json
from pathlib import Path

import pytest

from stride_intent.cli import main

SMALL = [
    "--set", "synth.n_trials_per_mode=3",
    "--set", "ica.max_iter=150",
    "--set", "cv.folds=4",
]


def run(args):
    return main([str(a) for a in args])


def file_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run1")
    code = run(["pipeline", "--out", out, "--seed", "11", *SMALL])
    assert code == 0
    return out


class TestSynthCommand:
    def test_creates_session_files(self, tmp_path):
        code = run(["synth", "--out", tmp_path / "s", "--seed", "1", *SMALL])
        assert code == 0
        for name in (
            "signals.csv",
            "keypoints.csv",
            "events.csv",
            "ground_truth.csv",
            "manifest.csv",
            "config.effective.ini",
        ):
            assert (tmp_path / "s" / name).exists()


class TestPipeline:
    def test_metrics_keys(self, pipeline_run):
        metrics = json.loads((pipeline_run / "metrics.json").read_text())
        for key in (
            "acc_ana_epoch",
            "cv_loss_ana",
            "acc_lr_epoch",
            "confusion_3class",
            "rt_report",
        ):
            assert key in metrics
        assert 0.0 <= metrics["acc_ana_epoch"] <= 1.0
        conf = metrics["confusion_3class"]
        assert len(conf["matrix_percent"]) == 3

    def test_stage_artifacts_exist(self, pipeline_run):
        assert (pipeline_run / "steps" / "events.csv").exists()
        assert (pipeline_run / "steps" / "sync_report.csv").exists()
        assert (pipeline_run / "preprocess" / "signals.csv").exists()
        assert (pipeline_run / "preprocess" / "ica_report.csv").exists()
        assert (pipeline_run / "epochs" / "labels.csv").exists()
        assert (pipeline_run / "epochs" / "behavior_report.csv").exists()
        assert (pipeline_run / "features_ana" / "features.csv").exists()
        assert (pipeline_run / "features_ana" / "filters.csv").exists()
        assert (pipeline_run / "features_ana" / "patterns.csv").exists()
        assert (pipeline_run / "eval_3c" / "confusion.csv").exists()

    def test_determinism_same_seed(self, pipeline_run, tmp_path):
        out2 = tmp_path / "run2"
        assert run(["pipeline", "--out", out2, "--seed", "11", *SMALL]) == 0
        a = json.loads((pipeline_run / "metrics.json").read_text())
        b = json.loads((out2 / "metrics.json").read_text())
        assert a == b
        assert file_hash(pipeline_run / "metrics.json") == file_hash(out2 / "metrics.json")

    def test_pipeline_equals_stage_composition(self, pipeline_run, tmp_path):
        """Running the stages by hand on the same inputs reproduces the
        pipeline's artifacts byte for byte."""
        session = pipeline_run / "session"
        out = tmp_path / "manual"
        assert run(
            ["steps", "--signals", session / "signals.csv", "--keypoints",
             session / "keypoints.csv", "--out", out / "steps", "--seed", "11", *SMALL]
        ) == 0
        assert file_hash(out / "steps" / "events.csv") == file_hash(
            pipeline_run / "steps" / "events.csv"
        )
        assert run(
            ["preprocess", "--signals", session / "signals.csv", "--strikes",
             out / "steps" / "events.csv", "--out", out / "preprocess",
             "--seed", "11", *SMALL]
        ) == 0
        assert file_hash(out / "preprocess" / "signals.csv") == file_hash(
            pipeline_run / "preprocess" / "signals.csv"
        )
        assert run(
            ["epochs", "--strikes", out / "steps" / "events.csv", "--tones",
             session / "events.csv", "--out", out / "epochs", "--seed", "11", *SMALL]
        ) == 0
        assert file_hash(out / "epochs" / "labels.csv") == file_hash(
            pipeline_run / "epochs" / "labels.csv"
        )
        assert run(
            ["train-eval", "--signals", out / "preprocess" / "signals.csv",
             "--labels", out / "epochs" / "labels.csv", "--scheme", "adapt-nonadapt",
             "--out", out / "eval_ana", "--seed", "11", *SMALL]
        ) == 0
        assert file_hash(out / "eval_ana" / "metrics.json") == file_hash(
            pipeline_run / "eval_ana" / "metrics.json"
        )


class TestSweepCommand:
    def test_window_sweep_rows(self, pipeline_run, tmp_path):
        out = tmp_path / "sweep"
        code = run(
            ["sweep", "--signals", pipeline_run / "preprocess" / "signals.csv",
             "--labels", pipeline_run / "epochs" / "labels.csv",
             "--scheme", "adapt-nonadapt", "--w", "90,80", "--out", out,
             "--seed", "11", *SMALL]
        )
        assert code == 0
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "w,feature,classifier,acc_window,acc_epoch,cv_loss"
        assert len(lines) == 1 + 2 * 4  # 2 windows x {csp,rcsp} x {lda,svm}

    def test_component_sweep(self, pipeline_run, tmp_path):
        out = tmp_path / "csweep"
        code = run(
            ["sweep", "--signals", pipeline_run / "preprocess" / "signals.csv",
             "--labels", pipeline_run / "epochs" / "labels.csv",
             "--scheme", "adapt-nonadapt", "--components", "4", "--out", out,
             "--seed", "11", *SMALL]
        )
        assert code == 0
        lines = (out / "csweep.csv" if (out / "csweep.csv").exists() else out / "component_curve.csv").read_text().splitlines()
        assert lines[0] == "k,cv_loss"
        assert len(lines) == 5


class TestValidation:
    def test_unknown_config_key_exits_2(self, tmp_path):
        code = run(["synth", "--out", tmp_path, "--set", "synth.bogus=1"])
        assert code == 2

    def test_missing_input_exits_2(self, tmp_path):
        code = run(
            ["steps", "--signals", tmp_path / "nope.csv", "--keypoints",
             tmp_path / "nope2.csv", "--out", tmp_path / "o"]
        )
        assert code == 2

    def test_config_file_roundtrip(self, tmp_path):
        cfg = tmp_path / "cfg.ini"
        cfg.write_text("[windows]\nw = 80\n\n[csp]\nk = 4\n")
        code = run(["synth", "--out", tmp_path / "s", "--config", cfg, *SMALL])
        assert code == 0
        text = (tmp_path / "s" / "config.effective.ini").read_text()
        assert "w = 80" in text
        assert "k = 4" in text

    def test_bad_config_file_missing(self, tmp_path):
        code = run(["synth", "--out", tmp_path / "s", "--config", tmp_path / "no.ini"])
        assert code == 2
