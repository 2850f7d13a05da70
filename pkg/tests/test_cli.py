import json

import numpy as np
import pytest

from eegdecode.cli import main
from eegdecode.datamodel import dataset_read
from eegdecode.dsp import ContinuousRecording, Marker, write_recording
from eegdecode.models import load_model


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture()
def synth_file(tmp_path):
    out = tmp_path / "subj.eegd"
    assert run(["synth", "--out", out, "--trials-per-exemplar", "2",
                "--snr", "10", "--seed", "5"]) == 0
    return out


class TestSynth:
    def test_same_seed_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.eegd", tmp_path / "b.eegd"
        for out in (a, b):
            assert run(["synth", "--out", out, "--trials-per-exemplar", "2", "--seed", "9"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_output_readable_and_manifest_written(self, synth_file, tmp_path):
        ds = dataset_read(synth_file)
        assert ds.n_trials == 144
        manifest = json.loads((tmp_path / "subj.manifest.json").read_text())
        assert manifest["command"] == "synth"
        assert manifest["config"]["generator"]["seed"] == 5

    def test_full_subject_size(self, tmp_path):
        out = tmp_path / "full.eegd"
        assert run(["synth", "--out", out, "--trials-per-exemplar", "72", "--seed", "1"]) == 0
        ds = dataset_read(out)
        assert ds.n_trials == 5184
        np.testing.assert_array_equal(np.bincount(ds.exemplar_labels, minlength=72), 72)

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "synth.json"
        cfg.write_text(json.dumps({"trials_per_exemplar": 1, "snr": 5.0, "seed": 2}))
        out = tmp_path / "c.eegd"
        assert run(["synth", "--config", cfg, "--out", out, "--seed", "3"]) == 0
        manifest = json.loads((tmp_path / "c.manifest.json").read_text())
        assert manifest["config"]["generator"]["seed"] == 3       # flag wins
        assert manifest["config"]["generator"]["snr"] == 5.0     # config survives

    def test_custom_templates_from_config(self, tmp_path):
        templates = [{"latency": 4 + 3 * c, "duration": 8,
                      "channels": list(range(10 * c, 10 * c + 4))} for c in range(6)]
        cfg = tmp_path / "synth.json"
        cfg.write_text(json.dumps({"trials_per_exemplar": 1, "snr": 8.0,
                                   "templates": templates, "seed": 4}))
        out = tmp_path / "t.eegd"
        assert run(["synth", "--config", cfg, "--out", out]) == 0
        ds = dataset_read(out)
        assert ds.n_trials == 72
        # category-0 signal must sit on its configured focus channels
        cat0 = ds.trials[ds.category_labels == 0]
        assert np.abs(cat0[:, 0:4]).mean() > 2 * np.abs(cat0[:, 60:64]).mean()


class TestPreprocess:
    @pytest.fixture()
    def raw_file(self, tmp_path):
        fs = 1000.0
        t = np.arange(int(12.0 * fs)) / fs
        rng = np.random.default_rng(0)
        data = np.tile(np.sin(2 * np.pi * 7.0 * t), (124, 1)) + 0.1 * rng.standard_normal((124, len(t)))
        markers = [Marker(int((2.0 + 0.7 * k) * fs), k % 72) for k in range(12)]
        rec = ContinuousRecording(data, fs, markers, "raw01")
        path = tmp_path / "raw.eegr"
        write_recording(path, rec)
        return path

    def test_chain_produces_62_5hz_width_32(self, raw_file, tmp_path):
        out = tmp_path / "pre.eegd"
        assert run(["preprocess", "--input", raw_file, "--out", out]) == 0
        ds = dataset_read(out)
        assert ds.sampling_rate_hz == 62.5
        assert ds.n_samples == 32
        assert ds.n_trials == 12

    def test_manifest_logs_coefficients(self, raw_file, tmp_path):
        out = tmp_path / "pre.eegd"
        run(["preprocess", "--input", raw_file, "--out", out])
        manifest = json.loads((tmp_path / "pre.manifest.json").read_text())
        assert len(manifest["config"]["filters"]["highpass_sos"]) == 2
        assert len(manifest["config"]["filters"]["lowpass_sos"]) == 4

    def test_rerun_is_byte_identical(self, raw_file, tmp_path):
        out1, out2 = tmp_path / "p1.eegd", tmp_path / "p2.eegd"
        run(["preprocess", "--input", raw_file, "--out", out1])
        run(["preprocess", "--input", raw_file, "--out", out2])
        assert out1.read_bytes() == out2.read_bytes()


class TestTrainEvaluate:
    def test_train_writes_loadable_checkpoint(self, synth_file, tmp_path):
        outdir = tmp_path / "run"
        assert run(["train", "--data", synth_file, "--out", outdir, "--model", "plain_cnn",
                    "--classes", "6", "--epochs", "1", "--batch-size", "72", "--seed", "2"]) == 0
        mp = load_model(outdir / "model.edkp")
        assert mp.spec.variant == "plain_cnn"
        log = json.loads((outdir / "training_log.json").read_text())
        assert len(log["loss_per_epoch"]) == 1

    def test_evaluate_emits_reports(self, synth_file, tmp_path, capsys):
        outdir = tmp_path / "eval"
        assert run(["evaluate", "--data", synth_file, "--out", outdir, "--model", "lda",
                    "--classes", "6", "--folds", "2"]) == 0
        printed = capsys.readouterr().out
        assert "6-class accuracy:" in printed
        assert "chance 16.67%" in printed
        for name in ("eval.json", "eval.csv", "eval_confusion.svg",
                     "eval_exemplars.svg", "manifest.json"):
            assert (outdir / name).exists()

    def test_72_class_chance_annotation(self, tmp_path, capsys):
        data = tmp_path / "s4.eegd"
        assert run(["synth", "--out", data, "--trials-per-exemplar", "4", "--seed", "6"]) == 0
        outdir = tmp_path / "eval72"
        assert run(["evaluate", "--data", data, "--out", outdir, "--model", "lda",
                    "--classes", "72", "--folds", "2"]) == 0
        assert "chance 1.39%" in capsys.readouterr().out


class TestCompareCli:
    def test_rows_and_no_stars_single_subject(self, synth_file, tmp_path, capsys):
        outdir = tmp_path / "cmp"
        assert run(["compare", "--data", synth_file, "--out", outdir,
                    "--methods", "lda", "--classes", "6", "--folds", "2"]) == 0
        report = json.loads((outdir / "compare.json").read_text())
        assert len(report["rows"]) == 1
        assert report["rows"][0]["ttest"] is None
        assert (outdir / "compare.csv").exists()


class TestTransferCli:
    def test_transfer_reports_both_columns(self, synth_file, tmp_path, capsys):
        outdir = tmp_path / "tr"
        assert run(["transfer", "--data", synth_file, "--out", outdir, "--folds", "2",
                    "--epochs", "1", "--fine-tune-epochs", "1", "--batch-size", "72"]) == 0
        printed = capsys.readouterr().out
        assert "transfer:" in printed and "scratch:" in printed
        report = json.loads((outdir / "transfer.json").read_text())
        assert len(report["per_fold_transfer_accuracy"]) == 2
        assert len(report["per_fold_scratch_accuracy"]) == 2


class TestPrecisionFlag:
    def test_f64_evaluation_runs(self, synth_file, tmp_path, capsys):
        outdir = tmp_path / "f64"
        assert run(["evaluate", "--data", synth_file, "--out", outdir,
                    "--model", "plain_cnn", "--classes", "6", "--folds", "2",
                    "--epochs", "1", "--precision", "f64", "--threads", "1"]) == 0
        manifest = json.loads((outdir / "manifest.json").read_text())
        assert manifest["config"]["precision"] == "f64"


class TestErrorPaths:
    def test_missing_data_file_exit_code(self, tmp_path):
        assert run(["inspect", "--data", tmp_path / "nothere.eegd"]) == 4

    def test_bad_magic_exit_code(self, tmp_path):
        bad = tmp_path / "bad.eegd"
        bad.write_bytes(b"WHAT" + b"\x00" * 32)
        assert run(["inspect", "--data", bad]) == 4

    def test_config_error_exit_code(self, tmp_path):
        assert run(["synth"]) == 2  # --out missing

    def test_invalid_config_json(self, tmp_path):
        cfg = tmp_path / "broken.json"
        cfg.write_text("{nope")
        assert run(["synth", "--config", cfg, "--out", tmp_path / "x.eegd"]) == 2

    def test_gradcheck_exit_zero(self, tmp_path, capsys):
        assert run(["gradcheck", "--instances", "1", "--out", tmp_path]) == 0
        report = json.loads((tmp_path / "gradcheck.json").read_text())
        assert all(entry["passed"] for entry in report)
        assert all("max_rel_err" in entry for entry in report)

    def test_gradcheck_tolerance_override(self, tmp_path, capsys):
        code = run(["gradcheck", "--instances", "1", "--tolerance", "1e-6", "--out", tmp_path])
        assert code in (0, 1)  # tightened tolerance may legitimately fail
        report = json.loads((tmp_path / "gradcheck.json").read_text())
        assert all(entry["tolerance"] == 1e-6 for entry in report)


class TestInspect:
    def test_dataset_summary(self, synth_file, capsys):
        assert run(["inspect", "--data", synth_file]) == 0
        out = capsys.readouterr().out
        assert "trials=144" in out
        assert "channels=124" in out
