import json
from pathlib import Path

import pytest

from stagelab.cli import main

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_plan_da(capsys):
    code, out, _ = run(capsys, "plan", "--strategy", "DA", "--preset", "resnet50")
    assert code == 0
    assert "2,049" in out and "23,483,521" in out
    assert out == (GOLDEN / "plan_DA.txt").read_text()


def test_plan_transfusion_only(capsys):
    code, out, _ = run(capsys, "plan", "--strategy", "ImageNet_TF_F1B")
    assert code == 0 and "229,760" in out and "no phases" in out


def test_plan_json_and_all(capsys):
    code, out, _ = run(capsys, "plan", "--strategy", "DA_L1SB_PFT", "--json")
    assert [p["epochs"] for p in json.loads(out)["phases"]] == [1000, 100, 50]
    code, out, _ = run(capsys, "plan", "--strategy", "all", "--json", "--preset", "nano")
    assert code == 0 and len(json.loads(out)) == 10


def test_plan_unknown_strategy(capsys):
    code, _, err = run(capsys, "plan", "--strategy", "bogus")
    assert code == 2 and "DA_L2SB_PFT" in err


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["plan"])
    assert info.value.code == 2


def test_energy(capsys, tmp_path):
    code, out, _ = run(capsys, "energy", "--runtime", "215:56.988")
    assert code == 0 and "94.86" in out
    code, out, _ = run(capsys, "energy", "--runtime", "0:00")
    assert out.splitlines()[-1].split()[-1] == "0.00"
    csv_path = tmp_path / "e.csv"
    code, out, _ = run(capsys, "energy", "--from-fixtures", "--csv", str(csv_path))
    assert code == 0
    rows = csv_path.read_text().splitlines()[1:]
    published = {"DA": 94.86, "DA_L1SB": 67.93, "DA_L2SB": 70.12, "DA_L1SB_PFT": 76.90,
                 "DA_L2SB_PFT": 78.64, "DA_TF_F1B": 30.41, "DA_TF_F2B": 56.28}
    got = {r.split(",")[0]: float(r.split(",")[2]) for r in rows}
    assert all(abs(got[k] - v) <= 0.02 for k, v in published.items())


def test_energy_errors(capsys):
    assert run(capsys, "energy", "--runtime", "12")[0] == 2
    assert run(capsys, "energy")[0] == 2
    assert run(capsys, "energy", "--runtime", "1:00", "--pue", "0.5")[0] == 2


def test_energy_carbon(capsys):
    code, out, _ = run(capsys, "energy", "--runtime", "x=1:00", "--carbon-intensity", "100")
    assert code == 0 and "x" in out


def test_run_config_errors(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"strategy": "DA", "output_dir": "o", "pretrain_data": {"cache": "x"}, "typo": 1}))
    code, _, err = run(capsys, "run", str(cfg))
    assert code == 2 and "typo" in err
    assert run(capsys, "run")[0] == 2


def test_print_schema(capsys):
    code, out, _ = run(capsys, "run", "--print-schema")
    assert code == 0 and json.loads(out)["title"] == "stagelab run configuration"
