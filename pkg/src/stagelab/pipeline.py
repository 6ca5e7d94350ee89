"""End-to-end run: weights -> pre-training -> features -> downstream -> reports."""
from __future__ import annotations

import json
import logging
import os
import shutil


from . import energykit
from .archkit import ArchSpec, StageSpec, WeightArchive, load_archive, preset, save_archive, surrogate_weights
from .evalkit import AucCurve, dip_report, emit, emit_per_curve, threshold_epoch
from .numcore import DTYPES
from .schedule import catalog
from .trainer import (
    DownstreamModelSpec,
    extract_features,
    load_cache,
    load_directory,
    pretrain,
    split,
    synth_dataset,
    train_downstream,
)

log = logging.getLogger(__name__)

ARTIFACTS = (
    "weights.stgw", "run_record.json", "runtime.json", "curves.csv", "curves.svg",
    "energy.csv", "energy.txt",
)


def base_arch(cfg):
    if isinstance(cfg.preset, str):
        return preset(cfg.preset)
    p = cfg.preset
    return ArchSpec(
        stages=tuple(StageSpec(*s) for s in p["stages"]),
        input_shape=tuple(p.get("input_shape", (3, 64, 64))),
        stem_width=p.get("stem_width", 64),
        stem_kernel=p.get("stem_kernel", 7),
        preset="custom",
    )


def load_dataset(spec, image_shape, default_seed=0):
    storage = spec.get("storage", "f16")
    if "synthetic" in spec:
        s = dict(spec["synthetic"])
        s.setdefault("seed", default_seed)
        return synth_dataset(image_shape=image_shape, storage=storage, **s)
    if "directory" in spec:
        return load_directory(spec["directory"], image_shape, storage)
    ds = load_cache(spec["cache"])
    if ds.image_shape != tuple(image_shape):
        raise ValueError(f"cached images have shape {ds.image_shape}, network expects {tuple(image_shape)}")
    return ds


def _curves(name, record):
    curves = []
    for which, label in (("dev", "development"), ("ext", "external")):
        pts = record.curve(which)
        if pts:
            curves.append(AucCurve(name, label, pts))
    return curves


def run(cfg):
    """Execute ``cfg``; returns the output directory.

    Everything is written to a staging directory first and moved into
    place only on success, so a failed run leaves no partial outputs.
    """
    out = os.path.abspath(cfg.output_dir)
    staging = out + ".partial"
    shutil.rmtree(staging, ignore_errors=True)
    os.makedirs(staging)
    try:
        _run_into(cfg, staging)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    if os.path.exists(out):
        shutil.rmtree(out)
    os.replace(staging, out)
    return out


def _run_into(cfg, outdir):
    strategy = catalog(cfg.strategy)
    ov = cfg.overrides or {}
    if "epochs" in ov or "learning_rates" in ov:
        strategy = strategy.with_overrides(ov.get("epochs"), ov.get("learning_rates"))
    base = base_arch(cfg)
    dtype = DTYPES[cfg.precision]
    shape = base.input_shape

    if cfg.archive:
        archive = load_archive(cfg.archive)
    else:
        generic_spec = cfg.generic_data or {
            "synthetic": {"kind": "kclass_textures", "n": 64, "classes": 4, "difficulty": 0.3}
        }
        generic = load_dataset(generic_spec, shape, default_seed=cfg.seed + 1)
        _, weights = surrogate_weights(base, generic.images.astype(dtype), seed=cfg.seed, dtype=dtype)
        archive = WeightArchive.from_arrays((p.name, p.value) for p in weights)

    data = load_dataset(cfg.pretrain_data, shape, default_seed=cfg.seed + 2)
    if cfg.holdout > 0 and strategy.phases:
        train_set, dev_set = split(data, 1.0 - cfg.holdout, seed=cfg.seed)
    else:
        train_set, dev_set = data, None
    result = pretrain(
        strategy, train_set, archive, preset=base, seed=cfg.seed,
        batch_size=ov.get("batch_size", 16), precision=cfg.precision, dev_set=dev_set,
        class_weighting=cfg.class_weighting,
    )
    record = result.record
    record.config = {"run": cfg.to_dict(), **record.config}
    save_archive(result.params, os.path.join(outdir, "weights.stgw"), meta={"strategy": strategy.name})

    curves = [AucCurve(f"{strategy.name}:pretrain", "development", record.curve("dev"))] if record.curve("dev") else []
    summary = {"strategy": strategy.name, "pretrain_final_dev_auc": record.curve("dev")[-1][1] if record.curve("dev") else None}

    if cfg.downstream:
        ds_cfg = cfg.downstream
        dsdata = load_dataset(ds_cfg["data"], shape, default_seed=cfg.seed + 3)
        d_train, d_dev = split(dsdata, ds_cfg.get("split", 0.8), seed=cfg.seed)
        eval_sets = {}
        feats = lambda d: extract_features(result.params, result.graph, d, cfg.precision)
        f_train = feats(d_train)
        eval_sets["development"] = (feats(d_dev), d_dev.labels)
        if ds_cfg.get("external"):
            ext = load_dataset(ds_cfg["external"], shape, default_seed=cfg.seed + 4)
            eval_sets["external"] = (feats(ext), ext.labels)
        spec = DownstreamModelSpec(ds_cfg.get("model", "model1"), f_train.shape[1], dsdata.num_classes)
        drec, _ = train_downstream(
            spec, (f_train, d_train.labels), eval_sets,
            epochs=ds_cfg.get("epochs", 500), learning_rate=ds_cfg.get("learning_rate", 5e-5),
            batch_size=ds_cfg.get("batch_size", 32), seed=cfg.seed, precision=cfg.precision,
            strategy=strategy.name,
        )
        with open(os.path.join(outdir, "downstream_record.json"), "w") as fh:
            fh.write(drec.to_json())
        dcurves = _curves(strategy.name, drec)
        curves += dcurves
        emit_per_curve(dcurves, os.path.join(outdir, "reports"))
        dev = next((c for c in dcurves if c.eval_set == "development"), None)
        ext_c = next((c for c in dcurves if c.eval_set == "external"), None)
        if dev is not None:
            summary["downstream_threshold_epoch"] = threshold_epoch(dev)
            summary["downstream_final_dev_auc"] = dev.values[-1]
        if dev is not None and ext_c is not None:
            dip = dip_report(dev, ext_c)
            summary["median_dip"] = dip.median_dip
            summary["box_development"] = vars(dip.development)
            summary["box_external"] = vars(dip.external)

    with open(os.path.join(outdir, "run_record.json"), "w") as fh:
        fh.write(record.to_json())
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    emit(curves, "csv", os.path.join(outdir, "curves.csv"))
    emit(curves, "svg", os.path.join(outdir, "curves.svg"))

    runtime = energykit.RuntimeLog(list(result.phase_hours))
    with open(os.path.join(outdir, "runtime.json"), "w") as fh:
        json.dump({"strategy": strategy.name, "phase_seconds": record.phase_seconds, "total_hours": runtime.total}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    ecfg = energykit.EnergyConfig(**(cfg.energy or {}))
    rows = energykit.energy_table({strategy.name: runtime}, ecfg)
    with open(os.path.join(outdir, "energy.csv"), "w") as fh:
        fh.write(energykit.rows_to_csv(rows))
    with open(os.path.join(outdir, "energy.txt"), "w") as fh:
        fh.write(energykit.render_table(rows))
    return outdir
