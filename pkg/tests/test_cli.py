import json
import shutil
import subprocess
import sys

from renormproof import cli, pipeline


def test_missing_dependency_is_named(run, tmp_path, capsys):
    shutil.copy(run.dir / pipeline.FILES["bootstrap"], tmp_path / "bootstrap.json")
    assert cli.main(["prove-delta", "--output", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "prove-delta requires the fixed-point artifact" in err


def test_missing_bootstrap_is_named(tmp_path, capsys):
    assert cli.main(["prove-fixed-point", "--output", str(tmp_path)]) == 1
    assert "requires the bootstrap artifact" in capsys.readouterr().err


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"N": 40, "bogus": 1}))
    assert cli.main(["digits", "--config", str(bad)]) == 2
    assert "unknown config key 'bogus'" in capsys.readouterr().err
    bad.write_text("{")
    assert cli.main(["digits", "--config", str(bad)]) == 2
    assert cli.main(["digits", "--m", "50"]) == 2
    assert cli.main(["digits", "--domain", "3", "0.5"]) == 2


def test_digits_command_prints_each_constant(run, capsys):
    assert cli.main(["digits", "--output", str(run.dir)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert [line.split(":")[0] for line in out] == ["a", "alpha", "delta", "gamma"]


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "renormproof.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "prove-fixed-point" in r.stdout
