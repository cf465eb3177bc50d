import json
import math

import pytest

from npsl.cli import parse_surface, run_command


def test_parse_surface_kinds():
    assert parse_surface("sphere:2").kind == "sphere"
    assert parse_surface("ellipsoid:1,1,2").kind == "ellipsoid"
    assert parse_surface("ellipse:2,1").ambient_dim == 2
    with pytest.raises(Exception):
        parse_surface("torus:1,2")


def test_surface_info(capsys):
    assert run_command(["surface-info", "--surface", "sphere:1",
                        "--resolution", "8"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert math.isclose(info["area"], 4.0 * math.pi, rel_tol=1e-10)
    assert info["node_count"] == 128


def test_falpha_prints_value(capsys):
    assert run_command(["falpha", "--kappas", "1,1", "--alpha", "0"]) == 0
    first = capsys.readouterr().out.splitlines()[0]
    assert math.isclose(float(first), 2.0 * math.pi, rel_tol=1e-12)


def test_variety_volume(capsys):
    assert run_command(["variety", "--surface", "sphere:1",
                        "--point", "pole", "--alpha", "-0.5"]) == 0
    first = capsys.readouterr().out.splitlines()[0]
    assert math.isclose(float(first), 2.0 * math.pi, rel_tol=1e-12)


def test_unknown_surface_is_validation_error(capsys):
    assert run_command(["surface-info", "--surface", "moebius:1"]) == 2
    assert "error" in capsys.readouterr().err


def test_numerical_failure_exit_code(capsys):
    # A vanishing covector makes the Hamiltonian flow undefined.
    assert run_command(["flow", "--surface", "sphere:1", "--xi", "0,0",
                        "--out", "/dev/null"]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_config_merge_and_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"resolution": 8, "surface": "sphere:1"}))
    assert run_command(["--config", str(cfg), "surface-info"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["node_count"] == 128

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"resolutio": 8}))
    assert run_command(["--config", str(bad), "surface-info"]) == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_spectrum_output_deterministic_and_digested(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (out1, out2):
        assert run_command(["spectrum", "--surface", "sphere:1",
                            "--resolution", "8", "--out", str(out)]) == 0
    b1, b2 = out1.read_bytes(), out2.read_bytes()
    assert b1 == b2
    assert b1.startswith(b"# config_sha256=")
