"""Command-line entry points: serve config handling, exports, simulate, psm."""

import json

import pytest

from peerlearn import cli
from peerlearn.config import ServiceConfig
from peerlearn.errors import ConfigError
from peerlearn.simulate import main as simulate_main
from peerlearn.psm import main as psm_main
from peerlearn.store import EventStore

from conftest import META, T0, iso, mcq
from simdata import confounded_subjects, subjects_to_csv


def seeded_store(tmp_path):
    store = EventStore(tmp_path / "data", durable=False)
    engine = store.load()
    instructor = engine.register_user("I", at=T0)
    offering = engine.create_offering(instructor.id, META, ["SQL"], at=T0)
    student = engine.register_user("S", at=T0)
    engine.add_member(instructor.id, offering.id, student.id, at=T0)
    r = engine.author_resource(
        student.id, offering.id, "mcq", "q", [offering.topics[0].id], mcq(), at=iso(3)
    )
    engine.attempt_resource(student.id, r.id, 0, at=iso(4))
    store.close()
    return offering.id


class TestPeerlearnCli:
    def test_export_attempts(self, tmp_path, capsys):
        offering_id = seeded_store(tmp_path)
        code = cli.main(
            ["export", "--offering", offering_id, "--report", "attempts",
             "--store", str(tmp_path / "data")]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == (
            "attempt_id,student_id,resource_id,chosen_index,correct,timestamp"
        )
        assert len(out.splitlines()) == 2

    def test_export_to_file(self, tmp_path):
        offering_id = seeded_store(tmp_path)
        target = tmp_path / "report.csv"
        cli.main(
            ["export", "--offering", offering_id, "--report", "knowledge_state",
             "--store", str(tmp_path / "data"), "--out", str(target)]
        )
        assert target.read_text().startswith("student_id,topic,rating,band,cohort_mean")

    def test_unknown_offering_fails_cleanly(self, tmp_path, capsys):
        seeded_store(tmp_path)
        code = cli.main(
            ["export", "--offering", "nope", "--report", "students",
             "--store", str(tmp_path / "data")]
        )
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestConfig:
    def test_env_overrides(self, tmp_path, monkeypatch):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"port": 9000, "storage_path": "/tmp/a"}))
        monkeypatch.setenv("PEERLEARN_PORT", "7777")
        monkeypatch.setenv("PEERLEARN_STORAGE", str(tmp_path / "store"))
        config = ServiceConfig.load(str(path))
        assert config.port == 7777
        assert config.storage_path == str(tmp_path / "store")

    def test_bad_weights_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"defaults": {"fit_weights": [0.9, 0.9, 0.9]}}))
        with pytest.raises(Exception):
            ServiceConfig.load(str(path))

    def test_missing_file_is_config_error(self):
        with pytest.raises(ConfigError):
            ServiceConfig.load("/does/not/exist.json")


class TestSimulateCli:
    def test_writes_report_csv(self, tmp_path, capsys):
        out = tmp_path / "report.csv"
        code = simulate_main(
            ["--students", "10", "--questions", "8", "--topics", "2",
             "--attempts", "4", "--policy", "random", "--seed", "5",
             "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "topic,spearman"
        assert lines[-1].startswith("mean,")


class TestPsmCli:
    def test_run_pipeline_writes_json_and_hist(self, tmp_path, capsys):
        subjects = confounded_subjects(400, seed=55)
        csv_path = tmp_path / "subjects.csv"
        csv_path.write_text(subjects_to_csv(subjects))
        report_path = tmp_path / "report.json"
        hist_path = tmp_path / "hist.csv"
        code = psm_main(
            ["run", "--input", str(csv_path), "--caliper", "0.05",
             "--out", str(report_path), "--hist-csv", str(hist_path)]
        )
        assert code == 0
        report = json.loads(report_path.read_text())
        assert {"non_matched", "matched", "balance", "caliper"} <= set(report)
        assert hist_path.read_text().splitlines()[0] == (
            "dimension,bin_low,bin_high,series,count"
        )

    def test_bad_input_fails_cleanly(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("id,treated\n1,1\n")
        assert psm_main(["run", "--input", str(bad)]) == 2
        assert "error:" in capsys.readouterr().err
