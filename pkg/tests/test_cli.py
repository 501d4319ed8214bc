"""Command-line workflow: end-to-end pipeline plus error-category contracts."""
from __future__ import annotations

import json

import pytest

from crest.artifacts import corpus_path, load_manifest, report_path, run_path
from crest.cli import main

CRITERIA = ("impact", "condition", "frequency", "reproducibility")


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One full CLI workflow: corpus → index → scorers → weights → runs."""
    rd = tmp_path_factory.mktemp("cli") / "run"
    steps = [
        [
            "synth-corpus", "--run-dir", str(rd), "--n", "60", "--seed", "7",
            "--missing-rate", "0.08", "--val-size", "15", "--test-size", "15",
        ],
        ["build-index", "--run-dir", str(rd), "--dim", "512"],
    ]
    for arch in ("bi", "cross"):
        for target in CRITERIA + ("single",):
            steps.append([
                "train-scorer", "--run-dir", str(rd), "--arch", arch,
                "--target", target, "--epochs", "4",
            ])
    steps += [
        ["train-weights", "--run-dir", str(rd), "--stage", "ir", "--epochs", "20"],
        ["train-weights", "--run-dir", str(rd), "--stage", "rr", "--epochs", "20"],
        ["run", "--run-dir", str(rd), "--mode", "crest", "--name", "crest"],
        ["run", "--run-dir", str(rd), "--mode", "single", "--name", "single"],
        ["run", "--run-dir", str(rd), "--mode", "criterion:impact", "--name", "hti"],
        ["run", "--run-dir", str(rd), "--mode", "ablate:reproducibility", "--name", "worepro"],
    ]
    for argv in steps:
        assert main(argv) == 0, argv
    return rd


class TestWorkflow:
    def test_manifest_tracks_every_step(self, workspace):
        manifest = load_manifest(workspace)
        steps = manifest["steps"]
        assert {"synth-corpus", "build-index", "train-weights-ir", "train-weights-rr"} <= set(steps)
        assert manifest["corpus_hash"]

    def test_runs_written_in_trec_format(self, workspace):
        for name in ("crest", "single", "hti", "worepro"):
            path = run_path(workspace, name)
            assert path.exists(), name
            first = path.read_text().splitlines()[0].split()
            assert len(first) == 6 and first[1] == "Q0"

    def test_evaluate_renders_table_and_report(self, workspace, capsys):
        code, out, _ = _run(
            capsys, "evaluate", "--run-dir", str(workspace), "--run", "crest,single"
        )
        assert code == 0
        assert "MRR" in out and "crest" in out and "single" in out
        report = json.loads(report_path(workspace, "evaluate-crest-single").read_text())
        assert {"crest", "single"} <= {row["config"] for row in report["rows"]}

    def test_crest_beats_single_on_generated_corpus(self, workspace, capsys):
        code, out, _ = _run(
            capsys, "evaluate", "--run-dir", str(workspace), "--run", "crest,single"
        )
        report = json.loads(report_path(workspace, "evaluate-crest-single").read_text())
        by_config = {row["config"]: row["metrics"] for row in report["rows"]}
        assert by_config["crest"]["MRR"] >= by_config["single"]["MRR"]

    def test_calibrate_reports_ece(self, workspace, capsys):
        code, out, _ = _run(
            capsys, "calibrate", "--run-dir", str(workspace), "--run", "crest"
        )
        assert code == 0
        assert "ECE" in out
        report = json.loads(report_path(workspace, "crest-calibration").read_text())
        assert 0.0 <= report["ece"] <= 1.0
        assert report["n_samples"] > 0

    def test_ablate_emits_all_four_exclusions(self, workspace, capsys):
        code, out, _ = _run(capsys, "ablate", "--run-dir", str(workspace))
        assert code == 0
        for criterion in CRITERIA:
            assert f"without-{criterion}" in out
        report = json.loads(report_path(workspace, "ablation").read_text())
        assert len(report["rows"]) == 5  # all + four exclusions

    def test_parse_reports_extraction_stats(self, workspace, capsys):
        code, out, _ = _run(capsys, "parse", "--run-dir", str(workspace), "--verbose")
        assert code == 0
        payload = json.loads(out)
        assert payload["n_trs"] == 60
        assert len(payload["per_tr"]) == 60
        assert 0 < payload["n_all_criteria"] <= 60
        # every recorded diagnostic kind is a known one
        known = {
            "empty_observation", "empty_field", "merged_fields",
            "duplicate_header", "residue_folded",
        }
        assert set(payload["diagnostics_by_kind"]) <= known

    def test_parse_single_text_file(self, tmp_path, capsys):
        sample = tmp_path / "obs.txt"
        sample.write_text("Trouble description: desc\nImpact: bad\nImpact: worse")
        code, out, _ = _run(capsys, "parse", "--text", str(sample))
        assert code == 0
        payload = json.loads(out)
        assert "impact" in payload["criteria"]
        assert any("duplicate_header" in d for d in payload["diagnostics"])


class TestDeterminism:
    def test_synth_corpus_twice_is_byte_identical(self, tmp_path):
        dirs = []
        for name in ("a", "b"):
            rd = tmp_path / name
            assert main([
                "synth-corpus", "--run-dir", str(rd), "--n", "25", "--seed", "3",
                "--val-size", "5", "--test-size", "5",
            ]) == 0
            dirs.append(rd)
        assert corpus_path(dirs[0]).read_bytes() == corpus_path(dirs[1]).read_bytes()


class TestErrorCategories:
    def test_missing_artifacts_exit_3(self, tmp_path, capsys):
        code, _, err = _run(
            capsys, "build-index", "--run-dir", str(tmp_path / "nothing")
        )
        assert code == 3
        assert json.loads(err)["error"] == "artifact_missing"

    def test_invalid_config_exit_2(self, tmp_path, capsys):
        code, _, err = _run(
            capsys, "synth-corpus", "--run-dir", str(tmp_path / "x"), "--n", "-5"
        )
        assert code == 2
        assert json.loads(err)["error"] == "config_invalid"

    def test_unknown_flag_exit_2(self, capsys):
        code, _, err = _run(capsys, "synth-corpus", "--does-not-exist", "1")
        assert code == 2
        assert json.loads(err)["error"] == "config_invalid"

    def test_unknown_mode_exit_2(self, workspace, capsys):
        code, _, err = _run(
            capsys, "run", "--run-dir", str(workspace), "--mode", "sideways"
        )
        assert code == 2
        assert json.loads(err)["error"] == "config_invalid"

    def test_tampered_corpus_exit_4(self, tmp_path, capsys):
        rd = tmp_path / "tamper"
        assert main([
            "synth-corpus", "--run-dir", str(rd), "--n", "20", "--seed", "2",
            "--val-size", "4", "--test-size", "4",
        ]) == 0
        assert main(["build-index", "--run-dir", str(rd), "--dim", "256"]) == 0
        path = corpus_path(rd)
        lines = path.read_text().splitlines()
        record = json.loads(lines[0])
        record["answer"] += " drifted"
        lines[0] = json.dumps(record, ensure_ascii=False)
        path.write_text("\n".join(lines) + "\n")
        capsys.readouterr()
        code = main([
            "train-scorer", "--run-dir", str(rd), "--arch", "bi",
            "--target", "single", "--epochs", "1",
        ])
        err = capsys.readouterr().err
        assert code == 4
        assert json.loads(err)["error"] == "artifact_mismatch"

    def test_evaluate_unknown_run_exit_3(self, workspace, capsys):
        code, _, err = _run(
            capsys, "evaluate", "--run-dir", str(workspace), "--run", "ghost"
        )
        assert code == 3
        assert json.loads(err)["error"] == "artifact_missing"
