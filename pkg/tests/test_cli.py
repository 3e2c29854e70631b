import json

import pytest

from novikov.cli import EXIT_ERROR, EXIT_OK, EXIT_UNRESOLVED, main
from novikov.homology import ZoneLabel
from novikov.scanner import read_scan, write_scan

from .test_areas import synthetic


@pytest.fixture(scope="module")
def scan1(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "s1.jsonl"
    assert main(["scan", "--N", "1", "--out", str(out), "--workers", "1"]) == EXIT_OK
    return out


def test_classify_zone(capsys):
    assert main(["classify", "--dir", "0,0,1"]) == EXIT_OK
    rec = json.loads(capsys.readouterr().out)
    assert rec["label"] == {"zone": [0, 0, 1]}


def test_classify_null(capsys):
    assert main(["classify", "--dir", "0,0,1", "--energy", "2.5"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["label"] == "null"


def test_classify_unresolved_exit_code(capsys):
    # an impossibly short arc budget leaves every trace unfinished
    code = main(["classify", "--dir", "1,2,5", "--tol", "max_len_factor=1e-6"])
    assert code == EXIT_UNRESOLVED
    assert json.loads(capsys.readouterr().out)["label"].keys() == {"unresolved"}


@pytest.mark.parametrize("argv", [
    ["classify", "--dir", "0,0,0"],
    ["classify", "--dir", "1,2"],
    ["classify", "--dir", "0,0,1", "--tol", "bogus=1"],
    ["classify", "--dir", "0,0,1", "--tol", "newton_tol=-1"],
    ["classify"],
    ["scan", "--N", "0", "--out", "x.jsonl"],
    ["nonsense"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == EXIT_ERROR
    assert capsys.readouterr().err


def test_scan_n1(scan1):
    lines = scan1.read_text().splitlines()
    assert len(lines) == 4
    assert json.loads(lines[0])["N"] == 1


def test_report_areas(scan1, capsys, tmp_path):
    assert main(["report", "areas", "--in", str(scan1)]) == EXIT_OK
    cap = capsys.readouterr()
    rows = cap.out.splitlines()
    assert rows[0] == "label,area,error"
    # N=1 cells carry the three corner labels
    assert {r.rsplit(",", 2)[0] for r in rows[1:]} == {'"0,0,1"', '"0,1,1"', '"1,1,1"'}
    areas = [float(r.rsplit(",", 2)[1]) for r in rows[1:]]
    assert areas == sorted(areas, reverse=True) and abs(sum(areas) - 1) < 1e-12
    assert "residual" in cap.err
    csv_path = tmp_path / "a.csv"
    assert main(["report", "areas", "--in", str(scan1), "--normalization", "chart", "--csv", str(csv_path)]) == 0
    assert csv_path.read_text().splitlines()[0] == "label,area,error"


def test_report_truncated_input(scan1, tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text(scan1.read_text()[:-20])
    assert main(["report", "areas", "--in", str(bad)]) == EXIT_ERROR
    assert "line 4" in capsys.readouterr().err


def test_report_schema_mismatch(scan1, tmp_path, capsys):
    lines = scan1.read_text().splitlines()
    header = json.loads(lines[0])
    header["schema_version"] = 99
    bad = tmp_path / "v99.jsonl"
    bad.write_text("\n".join([json.dumps(header)] + lines[1:]) + "\n")
    assert main(["report", "areas", "--in", str(bad)]) == EXIT_ERROR
    assert "schema_version" in capsys.readouterr().err


def test_report_missing_file(tmp_path):
    assert main(["report", "areas", "--in", str(tmp_path / "nope.jsonl")]) == EXIT_ERROR


def test_report_fracdim(tmp_path, capsys):
    s = synthetic(60, lambda m, n: ZoneLabel.unresolved("RankOne") if n - m == 20 else ZoneLabel.zone((0, 0, 1)))
    path = tmp_path / "strip.jsonl"
    write_scan(s, path)
    csv_path = tmp_path / "fd.csv"
    assert main(["report", "fracdim", "--in", str(path), "--csv", str(csv_path)]) == EXIT_OK
    assert "dimension" in capsys.readouterr().out
    assert csv_path.read_text().startswith("scale,count_or_measure")
    assert main(["report", "fracdim", "--in", str(path), "--method", "sausage"]) == EXIT_OK


def test_report_fracdim_degenerate(scan1, capsys):
    # no Unresolved cells: nothing to measure
    assert main(["report", "fracdim", "--in", str(scan1)]) == EXIT_ERROR
    assert "error" in capsys.readouterr().err


def test_render(scan1, tmp_path):
    svg, ppm = tmp_path / "m.svg", tmp_path / "m.ppm"
    assert main(["render", "--in", str(scan1), "--svg", str(svg), "--ppm", str(ppm), "--ppm-size", "32"]) == 0
    assert svg.read_text().lstrip().startswith("<")
    assert ppm.read_bytes().startswith(b"P6\n32 32\n255\n")
    assert main(["render", "--in", str(scan1)]) == EXIT_ERROR


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# classify defaults\ndir = 0,0,1\nenergy = 2.5\n")
    assert main(["--config", str(cfg), "classify"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["label"] == "null"
    assert main(["--config", str(cfg), "classify", "--energy", "0"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["label"] == {"zone": [0, 0, 1]}


def test_config_tolerances(tmp_path, capsys):
    cfg = tmp_path / "tol.cfg"
    cfg.write_text("tol.max_len_factor = 1e-6\n")
    assert main(["--config", str(cfg), "classify", "--dir", "1,2,5"]) == EXIT_UNRESOLVED
    capsys.readouterr()
    # a flag overrides the config tolerance
    assert main(["--config", str(cfg), "classify", "--dir", "1,2,5", "--tol", "max_len_factor=1000"]) != EXIT_ERROR


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    assert main(["--config", str(bad), "classify", "--dir", "0,0,1"]) == EXIT_ERROR
    bad.write_text("no equals sign\n")
    assert main(["--config", str(bad), "classify", "--dir", "0,0,1"]) == EXIT_ERROR
    assert main(["--config", str(tmp_path / "missing.cfg"), "classify", "--dir", "0,0,1"]) == EXIT_ERROR


def test_workers_env(tmp_path, monkeypatch):
    monkeypatch.setenv("NOVIKOV_WORKERS", "2")
    out = tmp_path / "w.jsonl"
    assert main(["scan", "--N", "2", "--out", str(out)]) == EXIT_OK
    assert len(read_scan(out).records) == 6


def test_scan_resume_flag(scan1, tmp_path):
    out = tmp_path / "r.jsonl"
    out.write_bytes(scan1.read_bytes())
    assert main(["scan", "--N", "1", "--out", str(out), "--resume", "--workers", "1"]) == EXIT_OK
    assert out.read_bytes() == scan1.read_bytes()
