import json
import subprocess
import sys

import pytest

from btq.cli import COMMANDS, main, parse_config, parse_function, run
from btq.errors import ConfigurationError
from btq.sphere import ONE, U, V, W


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def read_json(path):
    return json.loads(path.read_text())


# -- parsing -------------------------------------------------------------------------------


def test_parse_function():
    assert parse_function("u*v + w") == U * V + W
    assert parse_function("2*u^2 - 1/3") == 2 * U * U - ONE / 3
    assert parse_function("-v") == -V
    assert parse_function("4") == 4 * ONE
    for bad in ("x", "u^-1", "u/v", "exp(u)", "u +"):
        with pytest.raises(ConfigurationError):
            parse_function(bad)


def test_parse_config_defaults():
    cfg = parse_config("{}", "theta")
    assert cfg.command == "theta"
    assert cfg.levels == (8, 16, 32, 64)
    assert cfg.tolerances["index"] == 1e-6
    cfg = parse_config('{"command": "theta", "k0": 2}')
    assert (cfg.command, cfg.k0, cfg.K, cfg.levels) == ("theta", 2, 6, (8, 16, 32, 64))


def test_parse_config_errors():
    with pytest.raises(ConfigurationError, match="levels not increasing"):
        parse_config('{"command": "index-check", "levels": [16, 8]}')
    with pytest.raises(ConfigurationError, match="unknown key"):
        parse_config('{"command": "gram", "colour": 1}')
    with pytest.raises(ConfigurationError, match="unknown command"):
        parse_config('{"command": "frobnicate"}')
    with pytest.raises(ConfigurationError):
        parse_config('{"command": "gram", "k0": "one"}')
    with pytest.raises(ConfigurationError):
        parse_config('{"command": "index-check", "idempotents": ["klein"]}')
    with pytest.raises(ConfigurationError):
        parse_config('{"command": "phi1-probe", "points": [[1, 1, 0]]}')
    with pytest.raises(ConfigurationError):
        parse_config("[1, 2]")


# -- commands ---------------------------------------------------------------------------------


def test_theta(tmp_path, capsys):
    assert main(["theta", "--out", str(tmp_path)]) == 0
    data = read_json(tmp_path / "theta.json")
    assert data["theta_deg2"] == {"1": 1, "hbar^-1": 1}
    assert data["schema_version"] == 1
    assert "PASS" in capsys.readouterr().out


def test_theta_shifted(tmp_path):
    cfg = write_config(tmp_path, {"k0": 2})
    assert main(["theta", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert read_json(tmp_path / "o" / "theta.json")["theta_deg2"] == {"1": 3, "hbar^-1": 1}


def test_index_check_trivial(tmp_path):
    cfg = write_config(tmp_path, {"levels": [16], "idempotents": ["trivial1"]})
    assert main(["index-check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    report = read_json(tmp_path / "o" / "index_report.json")
    assert report["reports"][0]["predicted"] == 17
    assert report["pass"] is True


def test_moyal_check(tmp_path):
    cfg = write_config(tmp_path, {"trials": 10, "K": 4})
    assert main(["moyal-check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    report = read_json(tmp_path / "o" / "moyal_report.json")
    assert report["associator"] == "max |coeff| = 0"


@pytest.mark.parametrize("command", COMMANDS)
def test_every_command_runs(tmp_path, command):
    cfg = parse_config(json.dumps({"trials": 3}), command)
    assert run(cfg, tmp_path) == 0
    assert any(tmp_path.iterdir())


def test_outputs_byte_identical(tmp_path):
    cfg = parse_config(json.dumps({"levels": [4, 8, 16], "functions": {"f": "u*v", "g": "w"}}), "commutator-scan")
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_toeplitz_outputs(tmp_path):
    cfg = parse_config(json.dumps({"levels": [3], "functions": {"f": "u"}}), "toeplitz")
    assert run(cfg, tmp_path) == 0
    header = (tmp_path / "toeplitz_N3.csv").read_text().splitlines()[0]
    assert header.startswith("# ")
    assert json.loads(header[2:])["basis"] == "ortho-monomial-asc"


# -- exit codes ---------------------------------------------------------------------------------


def test_exit_code_configuration_error(tmp_path, capsys):
    cfg = write_config(tmp_path, {"levels": [8, 8]})
    assert main(["gram", "--config", str(cfg)]) == 1
    assert "levels" in capsys.readouterr().err
    assert main(["no-such-command"]) == 1
    assert main(["gram", "--config", str(tmp_path / "missing.json")]) == 1
    assert main([]) == 1


def test_exit_code_failed_check(tmp_path):
    # a wrong first-order term keeps the defect from decaying monotonically
    cfg = write_config(tmp_path, {"levels": [8, 16, 32], "order": 1,
                                  "functions": {"f": "u", "g": "v", "phi1": "w"},
                                  "tolerances": {"jitter": 0}})
    code = main(["star-defect", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 2
    assert read_json(tmp_path / "o" / "star_defect_report.json")["pass"] is False


def test_exit_code_lift_failure(tmp_path):
    cfg = write_config(tmp_path, {"levels": [1], "k0": -1, "idempotents": ["bott+1"]})
    assert main(["index-check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "error" in read_json(tmp_path / "o" / "index_report.json")["reports"][0]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "btq", "theta", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "theta.json").exists()
