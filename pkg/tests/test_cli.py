import json
from pathlib import Path

import pytest

from siga.cli import main, validate_config, ConfigError


def test_schema_rejects_unknown_field():
    with pytest.raises(ConfigError) as err:
        validate_config({"command": "sparsity", "bogus": 1})
    assert "bogus" in str(err.value)


def test_schema_rejects_bad_value():
    with pytest.raises(ConfigError) as err:
        validate_config({"command": "infsup", "k": 0})
    assert "k" in str(err.value)


def test_missing_command_is_schema_violation():
    with pytest.raises(ConfigError):
        validate_config({})


def test_exit_code_on_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"k": -1}))
    code = main(["sparsity", "--config", str(cfg)])
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_exit_code_on_compute_failure(tmp_path, capsys):
    # unknown case id passes the schema but fails in compute
    code = main(["solve", "--case", "not_a_case", "--k", "2",
                 "--out", str(tmp_path)])
    assert code == 1


def test_sparsity_artifacts(tmp_path):
    code = main(["sparsity", "--k", "3", "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "sparsity_bandwidth.csv").read_text().splitlines()
    assert "spline,3,2,4" in lines
    assert "lagrange,3,0,6" in lines
    manifest = json.loads((tmp_path / "run_manifest.json").read_text())
    assert manifest["config"]["command"] == "sparsity"
    assert "version" in manifest


def test_convergence_artifact_shape(tmp_path):
    code = main(["convergence", "--case", "square_stokes", "--k", "1",
                 "--levels", "2", "--meshes", "4,8", "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "convergence_square_stokes_k1.csv").read_text().splitlines()
    assert lines[0].startswith("case,k,alpha,gamma,h,ndof")
    assert len(lines) == 3


def test_infsup_artifact(tmp_path):
    code = main(["infsup", "--k", "2", "--gamma", "5e-2",
                 "--meshes", "4,8", "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "infsup_k2.csv").read_text().splitlines()
    assert len(lines) == 3
    betas = [float(line.split(",")[-1]) for line in lines[1:]]
    assert all(b > 0 for b in betas)


def test_reproducibility_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["convergence", "--case", "square_stokes", "--k", "1",
                     "--meshes", "4,8", "--out", str(out)]) == 0
    f1 = (out1 / "convergence_square_stokes_k1.csv").read_bytes()
    f2 = (out2 / "convergence_square_stokes_k1.csv").read_bytes()
    assert f1 == f2


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "infsup", "k": 2,
                               "meshes": [4], "out": str(tmp_path / "x")}))
    code = main(["infsup", "--config", str(cfg), "--k", "1",
                 "--out", str(tmp_path / "y")])
    assert code == 0
    assert (tmp_path / "y" / "infsup_k1.csv").exists()
