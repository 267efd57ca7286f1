import json

import pytest

from endslab.cli import main
from endslab.config import load_config, shipped_configs


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_list_shows_models_and_solitons(capsys):
    code, out, _ = run(["list"], capsys)
    assert code == 0
    assert "gaussian" in out and "cylinder" in out
    assert len(shipped_configs()) >= 5


def test_run_two_end_path(tmp_path, capsys):
    code, out, _ = run(["run", "two_end_path", "--out", str(tmp_path)], capsys)
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["pass"] and report["ends"]["rank"] == 2
    for name in ("report.md", "metadata.json", "series/volume.csv", "series/end_function_0.csv"):
        assert (tmp_path / name).is_file()


def test_run_soliton(tmp_path, capsys):
    code, _, _ = run(["run", "--config", "gaussian", "--out", str(tmp_path)], capsys)
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert abs(report["soliton"]["entropy"]["mu"]) <= 1e-8


def test_missing_config_is_a_usage_error(tmp_path, capsys):
    code, _, err = run(["run", str(tmp_path / "nope.json")], capsys)
    assert code == 1 and "error" in err


def test_missing_argument_is_a_usage_error(capsys):
    assert run(["run"], capsys)[0] == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_malformed_json_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "name": "x",\n  "model": {,}\n}\n')
    code, _, err = run(["run", str(bad)], capsys)
    assert code == 1
    assert "bad.json:3:" in err


def test_unknown_config_key_is_rejected(tmp_path, capsys):
    d = json.loads(shipped_configs()["two_end_path"])
    d["colour"] = "red"
    path = tmp_path / "c.json"
    path.write_text(json.dumps(d))
    code, _, err = run(["run", str(path)], capsys)
    assert code == 1 and "colour" in err


def test_failed_check_exits_two_with_advisory(tmp_path, capsys):
    code, out, err = run(["run", "tiny_rmax", "--out", str(tmp_path)], capsys)
    assert code == 2
    assert "ends.converged" in out
    assert "NotConverged" in err
    assert not json.loads((tmp_path / "report.json").read_text())["pass"]


def test_reports_are_byte_identical_across_runs_and_jobs(tmp_path, capsys):
    outs = []
    for i, extra in enumerate([[], [], ["--jobs", "3"]]):
        d = tmp_path / str(i)
        assert main(["run", "three_end_mixed", "--out", str(d), *extra]) == 0
        outs.append((d / "report.json").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_jobs_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ENDSLAB_JOBS", "2")
    assert main(["run", "two_end_cone", "--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("ENDSLAB_JOBS", "many")
    assert main(["run", "two_end_cone", "--out", str(tmp_path / "b")]) == 1


def test_seed_override_is_recorded(tmp_path, capsys):
    assert main(["run", "two_end_cone", "--seed", "7", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["config"]["seed"] == 7
    assert main(["run", "two_end_cone", "--seed", "-1", "--out", str(tmp_path)]) == 1


def test_report_subcommand_rerenders(tmp_path, capsys):
    main(["run", "two_end_cone", "--out", str(tmp_path)])
    (tmp_path / "report.md").unlink()
    capsys.readouterr()
    code, out, _ = run(["report", str(tmp_path)], capsys)
    assert code == 0
    assert (tmp_path / "report.md").read_text().strip() == out.strip()
    assert run(["report", str(tmp_path / "missing")], capsys)[0] == 1


def test_load_config_accepts_names_and_paths(tmp_path):
    assert load_config("cylinder").name == "cylinder"
    path = tmp_path / "mine.json"
    path.write_text(shipped_configs()["cylinder"])
    assert load_config(str(path)).soliton is not None
