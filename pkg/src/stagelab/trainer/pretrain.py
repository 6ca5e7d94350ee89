"""Phased domain-adaptive pre-training on a binary surrogate task."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..archkit import build, transfuse
from ..errors import DatasetError, NonFiniteError
from ..evalkit import auc_binary
from ..numcore import AdamState, DTYPES, adam_step, backward
from ..numcore import tensor as T
from ..schedule import resolve
from .record import EpochEntry, RunRecord

log = logging.getLogger(__name__)

DEFAULT_BATCH = 16


@dataclass
class PretrainResult:
    record: RunRecord
    graph: object
    params: object
    initial: dict  # parameter values right after transfusion
    transfusion: object = None
    phase_hours: list = field(default_factory=list)

    def changed(self):
        return self.params.changed_since(self.initial)


def frozen_prefix(graph, trainable):
    """Last node that precedes every trainable parameter, or None."""
    last = None
    for node in graph.nodes:
        if any(name in trainable for name, _, _ in node.param_specs()):
            return last
        last = node.name
    return last


def activations(graph, params, images, stop_after, dtype, chunk=64):
    """Eval-mode outputs of the prefix ending at ``stop_after``, in chunks."""
    out = []
    for i in range(0, len(images), chunk):
        x = np.asarray(images[i:i + chunk], dtype=dtype)
        h, _ = graph.run(params, x, stop_after=stop_after)
        out.append(h.data)
    return np.concatenate(out) if out else np.empty((0,) + graph.shapes[stop_after], dtype=dtype)


def predict(graph, params, inputs, start_after=None, chunk=64):
    """Head probabilities for ``inputs`` (images, or cached activations)."""
    out = []
    for i in range(0, len(inputs), chunk):
        logits, _ = graph.run(params, inputs[i:i + chunk], start_after=start_after)
        probs = T.sigmoid(logits) if graph.output == "sigmoid" else T.softmax(logits)
        out.append(probs.data)
    return np.concatenate(out)


def _safe_auc(probs, labels):
    labels = np.asarray(labels)
    if len(np.unique(labels)) < 2:
        return None
    return auc_binary(probs.reshape(-1), labels)


def class_weights_for(labels, classes):
    counts = np.bincount(labels, minlength=classes).astype(np.float64)
    return len(labels) / (classes * np.maximum(counts, 1))


def pretrain(strategy, dataset, archive=None, preset="nano", seed=0, batch_size=DEFAULT_BATCH,
             precision="f32", dev_set=None, ext_set=None, class_weighting=False,
             graph=None, params=None):
    """Run every phase of ``strategy`` on ``dataset`` (binary labels).

    Builds the strategy's architecture (unless ``graph``/``params`` are
    given), transfuses ``archive`` into it, then trains each phase's
    resolved parameter set with fresh Adam state. Parameters outside every
    phase's set are never written.
    """
    if dataset.num_classes != 2:
        raise DatasetError(f"pre-training needs a binary dataset, got {dataset.num_classes} classes")
    dtype = DTYPES[precision]
    if graph is None:
        graph, params = build(strategy.arch(preset), seed=seed, dtype=dtype)
    report = transfuse(archive, graph, params) if archive is not None else None
    initial = params.snapshot()
    record = RunRecord(strategy.name, seed, {
        "preset": preset if isinstance(preset, str) else preset.to_dict(), "batch_size": batch_size, "precision": precision,
        "phases": [
            {"selector": p.selector.label, "epochs": p.epochs, "learning_rate": p.learning_rate}
            for p in strategy.phases
        ],
    })
    result = PretrainResult(record, graph, params, initial, report)
    weights_by_class = class_weights_for(dataset.labels, 2) if class_weighting else None
    epoch = 0
    for phase_idx, phase in enumerate(strategy.phases, start=1):
        start = time.perf_counter()
        trainable = resolve(phase.selector, graph)
        params.set_trainable(trainable)
        state = AdamState(phase.learning_rate)
        cut = frozen_prefix(graph, trainable)
        # The prefix before the first trainable node is fixed for the whole
        # phase (batch norm uses stored statistics), so compute it once.
        if cut is not None:
            train_in = activations(graph, params, dataset.images, cut, dtype)
            dev_in = activations(graph, params, dev_set.images, cut, dtype) if dev_set else None
            ext_in = activations(graph, params, ext_set.images, cut, dtype) if ext_set else None
        else:
            train_in = dataset.images
            dev_in = dev_set.images.astype(dtype) if dev_set else None
            ext_in = ext_set.images.astype(dtype) if ext_set else None
        n = len(dataset)
        for _ in range(phase.epochs):
            epoch += 1
            order = np.random.default_rng([seed, phase_idx, epoch]).permutation(n)
            losses, sizes = [], []
            for b in range(0, n, batch_size):
                idx = order[b:b + batch_size]
                x = np.asarray(train_in[idx], dtype=dtype)
                y = dataset.labels[idx]
                w = weights_by_class[y] if weights_by_class is not None else None
                try:
                    loss = backward(graph, params, x, y, "bce", weights=w, start_after=cut)
                except NonFiniteError as exc:
                    raise NonFiniteError(exc.where, f"strategy {strategy.name}, phase {phase_idx}, epoch {epoch}") from exc
                adam_step(state, params)
                losses.append(loss)
                sizes.append(len(idx))
            train_loss = float(np.average(losses, weights=sizes))
            dev_auc = _safe_auc(predict(graph, params, dev_in, cut), dev_set.labels) if dev_set else None
            ext_auc = _safe_auc(predict(graph, params, ext_in, cut), ext_set.labels) if ext_set else None
            record.add_epoch(EpochEntry(epoch, phase_idx, train_loss, dev_auc, ext_auc))
            log.debug("%s phase %d epoch %d loss %.5f dev_auc %s", strategy.name, phase_idx, epoch, train_loss, dev_auc)
        seconds = time.perf_counter() - start
        record.phase_seconds.append(seconds)
        result.phase_hours.append(seconds / 3600.0)
    params.set_trainable(())
    return result
