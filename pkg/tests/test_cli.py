import json

import pytest

from semsens import fixtures, pipeline, stagefiles
from semsens.cli import (
    EXIT_CONSISTENCY,
    EXIT_OK,
    EXIT_STAGE,
    EXIT_USAGE,
    main,
    run_selftest,
)


@pytest.fixture()
def fixture_tree(tmp_path):
    config_path = fixtures.write_fixture_tree(tmp_path)
    return tmp_path, config_path


def _patch_mock_transport(monkeypatch):
    """Route CLI-built clients to the fixture transport instead of HTTP."""
    transports = []

    def fake_http_transport(config, session=None):
        transport = fixtures.build_transport()
        transports.append(transport)
        return transport

    monkeypatch.setattr("semsens.cli.HttpTransport", fake_http_transport)
    return transports


class TestSelftest:
    def test_clean_checkout_selftest_passes(self, tmp_path, capsys):
        assert run_selftest(tmp_path) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3
        assert all(line.startswith("[PASS]") for line in lines)

    def test_selftest_via_main(self, tmp_path):
        assert main(["--out", str(tmp_path), "selftest"]) == EXIT_OK


class TestStageSequencing:
    def test_generate_before_filter_is_a_stage_failure(self, fixture_tree, monkeypatch, capsys):
        out, config_path = fixture_tree
        _patch_mock_transport(monkeypatch)
        code = main(["--config", str(config_path), "--out", str(out), "generate"])
        assert code == EXIT_STAGE
        error = json.loads(capsys.readouterr().err)
        assert "missing stage output" in error["error"]

    def test_stagewise_run_matches_full_run(self, fixture_tree, monkeypatch, tmp_path_factory):
        out, config_path = fixture_tree
        _patch_mock_transport(monkeypatch)
        for stage in pipeline.STAGE_ORDER:
            assert main(["--config", str(config_path), "--out", str(out), stage]) == EXIT_OK

        full_out = tmp_path_factory.mktemp("full")
        full_config = fixtures.write_fixture_tree(full_out)
        assert main(["--config", str(full_config), "--out", str(full_out), "run"]) == EXIT_OK
        for name in (stagefiles.REPORT_JSON, stagefiles.REPORT_MD, stagefiles.RATES_CSV):
            assert (out / name).read_bytes() == (full_out / name).read_bytes()

    def test_report_rerun_is_byte_identical(self, fixture_tree, monkeypatch):
        out, config_path = fixture_tree
        _patch_mock_transport(monkeypatch)
        assert main(["--config", str(config_path), "--out", str(out), "run"]) == EXIT_OK
        before = (out / stagefiles.REPORT_MD).read_bytes()
        assert main(["--config", str(config_path), "--out", str(out), "report"]) == EXIT_OK
        assert (out / stagefiles.REPORT_MD).read_bytes() == before


class TestExitCodes:
    def test_usage_error_without_config(self, tmp_path, capsys):
        code = main(["--out", str(tmp_path), "run"])
        assert code == EXIT_USAGE
        assert json.loads(capsys.readouterr().err)["kind"] == "usage"

    def test_unknown_flag_is_usage_error(self, capsys):
        assert main(["--nonsense"]) == EXIT_USAGE

    def test_config_without_seed_rejected(self, tmp_path, capsys):
        config_path = tmp_path / "config.json"
        manifests = fixtures.materialize_corpus(tmp_path / "corpus")
        payload = fixtures.fixture_config_payload(manifests)
        del payload["seed"]
        config_path.write_text(json.dumps(payload))
        code = main(["--config", str(config_path), "--out", str(tmp_path), "run"])
        assert code == EXIT_USAGE
        assert "seed" in json.loads(capsys.readouterr().err)["error"]

    def test_consistency_violation_exit_code(self, fixture_tree, monkeypatch, capsys):
        out, config_path = fixture_tree
        _patch_mock_transport(monkeypatch)
        assert main(["--config", str(config_path), "--out", str(out), "run"]) == EXIT_OK
        lines = [
            json.loads(line) for line in (out / stagefiles.RATES).read_text().splitlines()
        ]
        for row in lines:
            if row["grouping"] == "alpha":
                row["rates"]["relaxed"] = 0.99
        (out / stagefiles.RATES).write_text(
            "\n".join(json.dumps(row) for row in lines) + "\n"
        )
        code = main(["--config", str(config_path), "--out", str(out), "report"])
        assert code == EXIT_CONSISTENCY
        assert json.loads(capsys.readouterr().err)["kind"] == "consistency"

    def test_missing_dataset_file_is_config_error(self, tmp_path, capsys):
        manifests = fixtures.materialize_corpus(tmp_path / "corpus")
        payload = fixtures.fixture_config_payload(manifests)
        payload["manifests"][0]["path"] = "corpus/never-written.jsonl"
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(payload))
        assert main(["--config", str(config_path), "--out", str(tmp_path), "run"]) == EXIT_USAGE


class TestRunLogAndModes:
    def test_failed_stage_marks_run_incomplete(self, fixture_tree, monkeypatch, capsys):
        out, config_path = fixture_tree
        _patch_mock_transport(monkeypatch)
        # evaluate without its inputs fails; the run log must say so.
        assert main(["--config", str(config_path), "--out", str(out), "evaluate"]) == EXIT_STAGE
        capsys.readouterr()
        log = json.loads((out / stagefiles.RUN_LOG).read_text())
        assert log["status"] == "incomplete"
        assert log["stages_completed"] == []

    def test_samples_ks_mode_from_config(self, tmp_path, monkeypatch):
        manifests = fixtures.materialize_corpus(tmp_path / "corpus")
        payload = fixtures.fixture_config_payload(manifests)
        payload["ks_mode"] = "samples"
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(payload))
        _patch_mock_transport(monkeypatch)
        assert main(["--config", str(config_path), "--out", str(tmp_path), "run"]) == EXIT_OK
        analysis_payload = json.loads((tmp_path / stagefiles.ANALYSIS).read_text())
        assert analysis_payload["ks_mode"] == "samples"

    def test_unknown_ks_mode_rejected(self, tmp_path):
        manifests = fixtures.materialize_corpus(tmp_path / "corpus")
        payload = fixtures.fixture_config_payload(manifests)
        payload["ks_mode"] = "kde"
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(payload))
        assert main(["--config", str(config_path), "--out", str(tmp_path), "run"]) == EXIT_USAGE


class TestDryRun:
    def test_dry_run_validates_without_side_effects(self, fixture_tree, capsys):
        out, config_path = fixture_tree
        code = main(["--config", str(config_path), "--out", str(out), "--dry-run", "run"])
        assert code == EXIT_OK  # no endpoints configured -> nothing unreachable
        payload = json.loads(capsys.readouterr().out)
        assert payload["datasets"] == ["alpha", "beta"]
        assert not (out / stagefiles.RECORDS).exists()

    def test_dry_run_reports_unreachable_backend(self, fixture_tree, capsys):
        out, config_path = fixture_tree
        code = main(
            [
                "--config", str(config_path),
                "--out", str(out),
                "--backend-url", "nli=http://127.0.0.1:1",
                "--dry-run", "run",
            ]
        )
        assert code == EXIT_STAGE
        payload = json.loads(capsys.readouterr().out)
        assert payload["reachable"] is False


class TestSeedOverride:
    def test_seed_flag_changes_digest(self, fixture_tree, monkeypatch):
        out, config_path = fixture_tree
        config_a = pipeline.load_config(config_path)
        config_b = pipeline.load_config(config_path, overrides={"seed": 999})
        assert config_a.seed != config_b.seed

    def test_env_mirror_for_out(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SEMSENS_OUT", str(tmp_path))
        assert main(["selftest"]) == EXIT_OK


class TestAnnotateCommands:
    def test_export_and_kappa_round_trip(self, fixture_tree, monkeypatch, capsys):
        out, config_path = fixture_tree
        _patch_mock_transport(monkeypatch)
        assert main(["--config", str(config_path), "--out", str(out), "run"]) == EXIT_OK

        from semsens.annotation import JudgmentJournal, cohens_kappa
        from semsens.cli import ANNOTATION_JOURNAL

        journal = JudgmentJournal(out / ANNOTATION_JOURNAL)
        for i in range(20):
            journal.record(f"task-{i}", "ann1", True)
            journal.record(f"task-{i}", "ann2", i % 5 != 0)

        assert main(["--out", str(out), "annotate", "export"]) == EXIT_OK
        export = capsys.readouterr().out
        assert len(export.strip().splitlines()) == 41

        assert main(["--out", str(out), "annotate", "kappa"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        expected = cohens_kappa([True] * 20, [i % 5 != 0 for i in range(20)])
        assert payload["kappa"] == pytest.approx(expected, abs=1e-12)
        assert payload["n"] == 20

    def test_kappa_without_judgments_is_stage_error(self, tmp_path, capsys):
        (tmp_path / "judgments.jsonl").write_text("")
        assert main(["--out", str(tmp_path), "annotate", "kappa"]) == EXIT_STAGE
