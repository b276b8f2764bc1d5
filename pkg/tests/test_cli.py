import json

import pytest

from transitlabel.cli import EXIT_INVALID, EXIT_OK, EXIT_USAGE, main


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["simulate", "--seed", "3", "--n-traces", "12", "--out", str(root / "sim")]) == EXIT_OK
    assert main(["process", str(root / "sim" / "traces"), "--out", str(root / "out" / "m.map")]) == EXIT_OK
    assert main(["evaluate", str(root / "out" / "m.map"), str(root / "sim" / "traces"),
                 "--out", str(root / "out" / "report.txt")]) == EXIT_OK
    return root


def test_simulate_layout(run_dir):
    sim = run_dir / "sim"
    manifest = json.loads((sim / "manifest.json").read_text())
    assert manifest["seed"] == 3 and len(manifest["traces"]) == 12
    assert manifest["config"]["simulator.n_traces"] == 12
    for entry in manifest["traces"]:
        assert (sim / entry["file"]).is_file()
    assert (sim / "station.txt").read_text().startswith("#transitlabel-station v1")


def test_process_and_evaluate_outputs(run_dir, capsys):
    out = run_dir / "out"
    assert (out / "m.map").is_file() and (out / "m.map.detections").is_file()
    report = json.loads((out / "report.txt.json").read_text())
    assert report["n_traces"] == 12
    assert "microphone duty cycle" in (out / "report.txt").read_text()


def test_deterministic(run_dir, tmp_path):
    assert main(["simulate", "--seed", "3", "--n-traces", "12", "--out", str(tmp_path / "sim")]) == EXIT_OK
    for p in (run_dir / "sim").rglob("*"):
        if p.is_file():
            assert (tmp_path / "sim" / p.relative_to(run_dir / "sim")).read_bytes() == p.read_bytes()
    assert main(["process", str(tmp_path / "sim" / "traces"), "--jobs", "2",
                 "--out", str(tmp_path / "m.map")]) == EXIT_OK
    assert (tmp_path / "m.map").read_bytes() == (run_dir / "out" / "m.map").read_bytes()
    assert (tmp_path / "m.map.detections").read_bytes() == (run_dir / "out" / "m.map.detections").read_bytes()


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--seed", "-1", "--out", str(tmp_path)])
    assert exc.value.code == EXIT_USAGE
    (tmp_path / "empty").mkdir()
    assert main(["process", str(tmp_path / "empty"), "--out", str(tmp_path / "m.map")]) == EXIT_USAGE
    assert main(["process", str(tmp_path / "missing"), "--out", str(tmp_path / "m.map")]) == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text('{"classifier.unknown": 1}')
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "s")]) == EXIT_USAGE
    assert main(["evaluate", str(tmp_path / "nomap.map"), str(tmp_path / "empty")]) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_invalid_trace_data(tmp_path, capsys):
    d = tmp_path / "traces"
    d.mkdir()
    (d / "x.trace").write_text("#transitlabel-trace v1\nS 0 1 2\n")
    assert main(["process", str(d), "--out", str(tmp_path / "m.map")]) == EXIT_INVALID
    assert "x.trace" in capsys.readouterr().err


def test_evaluate_needs_sidecar(run_dir, tmp_path):
    lone = tmp_path / "m.map"
    lone.write_bytes((run_dir / "out" / "m.map").read_bytes())
    assert main(["evaluate", str(lone), str(run_dir / "sim" / "traces")]) == EXIT_USAGE
