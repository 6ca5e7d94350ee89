"""End-to-end runs through the CLI on tiny synthetic configurations."""
import json

import numpy as np
import pytest

from stagelab.archkit import build, load_archive, preset, save_archive
from stagelab.cli import main
from stagelab.trainer import save_cache, synth_dataset


def config(out, **extra):
    doc = {
        "strategy": "DA_L2SB_PFT",
        "output_dir": str(out),
        "pretrain_data": {"synthetic": {"kind": "binary_blobs", "n": 40, "seed": 3}},
        "generic_data": {"synthetic": {"kind": "kclass_textures", "n": 16, "classes": 4, "seed": 1}},
        "overrides": {"epochs": [2, 1, 1], "batch_size": 8},
        "downstream": {
            "data": {"synthetic": {"kind": "binary_blobs", "n": 40, "seed": 41}},
            "external": {"synthetic": {"kind": "binary_blobs", "n": 20, "seed": 42, "shift": 0.5}},
            "epochs": 4,
        },
        "seed": 5,
    }
    doc.update(extra)
    return doc


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_smoke_all_artifacts_parse(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", write(tmp_path, config(out))]) == 0
    for name in ("run_record.json", "downstream_record.json", "runtime.json", "summary.json"):
        json.loads((out / name).read_text())
    archive = load_archive(out / "weights.stgw")
    assert "head.dense.weight" in archive.names() and archive.meta["strategy"] == "DA_L2SB_PFT"
    assert (out / "curves.csv").read_text().startswith("strategy,eval_set,epoch,auc")
    assert (out / "curves.svg").read_text().rstrip().endswith("</svg>")
    assert (out / "reports" / "DA_L2SB_PFT__external.csv").exists()
    assert (out / "energy.csv").read_text().startswith("strategy,total_hours,kwh")
    record = json.loads((out / "run_record.json").read_text())
    assert len(record["epochs"]) == 4 and "phase_seconds" not in record
    assert len(json.loads((out / "runtime.json").read_text())["phase_seconds"]) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert {"median_dip", "box_development", "box_external"} <= set(summary)


def test_rerun_is_byte_identical_in_f64(tmp_path, capsys):
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}"
        assert main(["run", write(tmp_path, config(out, precision="f64"), f"c{i}.json")]) == 0
        outs.append(out)
    for name in ("run_record.json", "downstream_record.json", "curves.csv", "curves.svg", "weights.stgw"):
        a, b = ((o / name).read_bytes() for o in outs)
        if name == "run_record.json":
            a, b = (json.loads(x)["epochs"] for x in (a, b))
        assert a == b, name


def test_failure_leaves_nothing_behind(tmp_path, capsys):
    out = tmp_path / "run"
    doc = config(out, archive=str(tmp_path / "missing.stgw"))
    assert main(["run", write(tmp_path, doc)]) == 1
    assert not out.exists() and not (tmp_path / "run.partial").exists()
    assert "missing.stgw" in capsys.readouterr().err


def test_archive_and_cache_sources(tmp_path, capsys):
    _, params = build(preset("nano"), seed=2)
    save_archive(params, tmp_path / "base.stgw")
    save_cache(synth_dataset("binary_blobs", 30, seed=8), tmp_path / "data.stgw")
    doc = config(
        tmp_path / "run", strategy="DA_TF_F1B", archive=str(tmp_path / "base.stgw"),
        pretrain_data={"cache": str(tmp_path / "data.stgw")}, overrides={"epochs": [1, 1]},
    )
    del doc["downstream"]
    assert main(["run", write(tmp_path, doc)]) == 0
    weights = load_archive(tmp_path / "run" / "weights.stgw")
    assert not any(n.startswith("stage2") for n in weights.names())
    np.testing.assert_array_equal(weights.array("stem.bn.moving_mean"), params["stem.bn.moving_mean"].value)


def test_imagenet_strategy_runs_without_training(tmp_path, capsys):
    doc = config(tmp_path / "run", strategy="ImageNet_TF_F2B")
    del doc["overrides"]
    assert main(["run", write(tmp_path, doc)]) == 0
    energy = (tmp_path / "run" / "energy.csv").read_text().splitlines()
    assert energy[1] == "ImageNet_TF_F2B,0.000000,0.0000"


def test_thread_cap_and_report(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("STAGELAB_THREADS", "1")
    out = tmp_path / "run"
    assert main(["run", write(tmp_path, config(out))]) == 0
    rep = tmp_path / "rep"
    assert main(["report", "--records", str(out), "--out", str(rep)]) == 0
    assert (rep / "curves.svg").exists() and (rep / "DA_L2SB_PFT__development.csv").exists()
    assert main(["report", "--records", str(tmp_path), "--out", str(rep)]) == 2
    assert main(["energy", "--runtime-json", str(out / "runtime.json")]) == 0
    assert "DA_L2SB_PFT" in capsys.readouterr().out


def test_custom_preset(tmp_path, capsys):
    doc = config(tmp_path / "run", preset={"stages": [[2, 8, 1, 1]], "input_shape": [3, 32, 32], "stem_width": 4},
                 strategy="DA")
    doc["overrides"] = {"epochs": [1, 1]}
    del doc["downstream"]
    assert main(["run", write(tmp_path, doc)]) == 0
    assert load_archive(tmp_path / "run" / "weights.stgw").array("stem.conv.weight").shape == (4, 3, 7, 7)
