"""Feature extraction and the dense downstream classifiers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DatasetError
from ..evalkit import auc_multiclass
from ..numcore import AdamState, DTYPES, Dense, LayerGraph, adam_step, backward
from .pretrain import predict
from .record import EpochEntry, RunRecord

HIDDEN = {
    "model1": (64, 32),
    "model2": (512, 256, 256, 128),
}


@dataclass(frozen=True)
class DownstreamModelSpec:
    variant: str
    input_dim: int
    classes: int

    def __post_init__(self):
        if self.variant not in HIDDEN:
            raise ValueError(f"unknown downstream model {self.variant!r}; choose from {sorted(HIDDEN)}")
        if self.classes < 2 or self.input_dim < 1:
            raise ValueError("need input_dim >= 1 and at least 2 classes")

    def build(self):
        nodes, din = [], self.input_dim
        for i, units in enumerate(HIDDEN[self.variant], start=1):
            nodes.append(Dense(f"dense{i}", din, units, activation="relu"))
            din = units
        nodes.append(Dense("head.dense", din, self.classes, is_head=True))
        return LayerGraph((self.input_dim,), nodes, output="softmax", name=self.variant)


def extract_features(params, graph, dataset, precision="f32", chunk=64):
    """Globally pooled backbone features (N, D); the head is not applied."""
    dtype = DTYPES[precision]
    out = []
    for i in range(0, len(dataset), chunk):
        x = dataset.images[i:i + chunk].astype(dtype)
        h, _ = graph.run(params, x, stop_after="pool")
        out.append(h.data)
    if not out:
        return np.empty((0, graph.shapes["pool"][0]), dtype=dtype)
    return np.concatenate(out)


def train_downstream(spec, train, eval_sets=None, epochs=500, learning_rate=5e-5,
                     batch_size=32, seed=0, precision="f32", strategy="downstream"):
    """Train a dense classifier on features; AUC per epoch on each eval set.

    ``train`` and each value of ``eval_sets`` are ``(features, labels)``;
    recognised eval set names are ``"development"`` and ``"external"``.
    Returns ``(RunRecord, params)``.
    """
    dtype = DTYPES[precision]
    eval_sets = dict(eval_sets or {})
    unknown = set(eval_sets) - {"development", "external"}
    if unknown:
        raise ValueError(f"unknown eval sets {sorted(unknown)}")
    x_train, y_train = np.asarray(train[0], dtype=dtype), np.asarray(train[1], dtype=np.int64)
    for name, (x, y) in [("train", (x_train, y_train))] + list(eval_sets.items()):
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != spec.input_dim:
            raise DatasetError(f"{name} features have shape {x.shape}, model expects (N, {spec.input_dim})")
        y = np.asarray(y)
        if y.size and (y.min() < 0 or y.max() >= spec.classes):
            raise DatasetError(f"{name} labels fall outside the model's {spec.classes} classes")
    graph = spec.build()
    params = graph.init_params(seed=seed, dtype=dtype)
    params.set_trainable(n for n, _, _ in graph.param_specs())
    state = AdamState(learning_rate)
    onehot = np.eye(spec.classes, dtype=dtype)
    record = RunRecord(strategy, seed, {
        "model": spec.variant, "input_dim": spec.input_dim, "classes": spec.classes,
        "epochs": epochs, "learning_rate": learning_rate, "batch_size": batch_size,
        "precision": precision,
    })
    n = len(y_train)
    for epoch in range(1, epochs + 1):
        order = np.random.default_rng([seed, epoch]).permutation(n)
        losses, sizes = [], []
        for b in range(0, n, batch_size):
            idx = order[b:b + batch_size]
            losses.append(backward(graph, params, x_train[idx], onehot[y_train[idx]], "cce"))
            sizes.append(len(idx))
            adam_step(state, params)
        aucs = {}
        for name, (x, y) in eval_sets.items():
            probs = predict(graph, params, np.asarray(x, dtype=dtype))
            aucs[name] = auc_multiclass(probs, y)
        record.add_epoch(EpochEntry(
            epoch, 1, float(np.average(losses, weights=sizes)),
            aucs.get("development"), aucs.get("external"),
        ))
    params.set_trainable(())
    return record, params
