import json
import subprocess
import sys
from pathlib import Path

import pytest

from flagpara import __version__, cli
from flagpara.errors import ConsistencyError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def small_config(tmp_path, name, **kw):
    d = {"experiment": name, "grid": {"n": 32}, "trials": 2, "seed": 1, **kw}
    p = tmp_path / f"{name}.json"
    p.write_text(json.dumps(d))
    return str(p)


def test_csv_to_stdout(tmp_path, capsys):
    assert cli.main(["kato-ponce", "--config", small_config(tmp_path, "kato-ponce", alpha=1.0)]) == 0
    out, err = capsys.readouterr()
    assert out.splitlines()[0] == "trial,n,rung,lhs,rhs,ratio,exploratory"
    assert len(out.splitlines()) == 3
    assert err.startswith("kato-ponce: 2 rows max_ratio=")


def test_out_summary_and_quiet(tmp_path, capsys):
    cfg = small_config(tmp_path, "norm-sweep", rungs=[0, 1])
    out, summ = tmp_path / "r.csv", tmp_path / "s.json"
    assert cli.main(["norm-sweep", "--config", cfg, "--out", str(out), "--summary", str(summ), "--quiet"]) == 0
    assert capsys.readouterr() == ("", "")
    assert out.read_text().splitlines()[0] == "trial,scale,ratio,exploratory"
    s = json.loads(summ.read_text())
    assert s["version"] == __version__
    assert s["config"] == json.loads(Path(cfg).read_text())
    assert s["operator"] == "tab"


def test_seed_and_trials_override(tmp_path):
    cfg = small_config(tmp_path, "decompose")
    summ = tmp_path / "s.json"
    assert cli.main(["decompose", "--config", cfg, "--seed", "8", "--trials", "1", "--quiet",
                     "--out", str(tmp_path / "o.csv"), "--summary", str(summ)]) == 0
    s = json.loads(summ.read_text())
    assert s["rows"] == 3 and s["config"]["seed"] == 8


def test_output_field_in_config(tmp_path):
    target = tmp_path / "from_config.csv"
    cfg = small_config(tmp_path, "decompose", trials=1, output=str(target))
    assert cli.main(["decompose", "--config", cfg, "--quiet"]) == 0
    assert target.read_text().startswith("trial,kind,identity_error\n")


@pytest.mark.parametrize("name", ["kato-ponce", "grand-leibnitz", "norm-sweep", "model-bound", "decompose"])
def test_byte_identical_reruns(tmp_path, name):
    extra = {"model_depth": 2, "sizes": [4]} if name == "model-bound" else {}
    cfg = small_config(tmp_path, name, **extra)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main([name, "--config", cfg, "--out", str(a), "--quiet"]) == 0
    assert cli.main([name, "--config", cfg, "--out", str(b), "--quiet"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_self_test_without_config(capsys):
    assert cli.main(["self-test", "--quiet"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "check,value,tolerance,passed"
    assert all(line.endswith(",1") for line in lines[1:])


def test_missing_config_file(tmp_path, capsys):
    path = str(tmp_path / "nowhere.json")
    assert cli.main(["kato-ponce", "--config", path]) == 1
    assert path in capsys.readouterr().err


@pytest.mark.parametrize("argv", [[], ["bogus"], ["kato-ponce"], ["decompose", "--seed", "x"]])
def test_usage_errors_exit_one(argv, capsys):
    assert cli.main(argv) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_config_experiment_mismatch(tmp_path, capsys):
    assert cli.main(["kato-ponce", "--config", small_config(tmp_path, "decompose")]) == 1
    assert "'decompose'" in capsys.readouterr().err


def test_holder_failure_exit_one(tmp_path, capsys):
    cfg = small_config(tmp_path, "kato-ponce", exponents={"p": 1, "p_i": [2, 2], "q_i": [3, 3]})
    assert cli.main(["kato-ponce", "--config", cfg]) == 1
    assert "Hölder" in capsys.readouterr().err


def test_consistency_failure_exit_two(monkeypatch, capsys):
    def broken(cfg):
        raise ConsistencyError("forced")

    monkeypatch.setattr(cli, "run_experiment", broken)
    assert cli.main(["self-test"]) == 2
    assert "consistency failure: forced" in capsys.readouterr().err


def test_unwritable_output(tmp_path, capsys):
    cfg = small_config(tmp_path, "decompose", trials=1)
    assert cli.main(["decompose", "--config", cfg, "--out", str(tmp_path / "no" / "dir.csv")]) == 1
    assert "cannot write" in capsys.readouterr().err


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")))
def test_shipped_configs_parse(path):
    from flagpara.experiments import load_config

    assert load_config(str(path)).experiment == json.loads(path.read_text())["experiment"]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "flagpara", "self-test", "--quiet"], capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout.startswith("check,value,tolerance,passed")
