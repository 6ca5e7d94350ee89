"""Pre-training, feature extraction, downstream classifiers and datasets."""
from .data import (
    DatasetHandle,
    distribution_params,
    load_cache,
    load_directory,
    save_cache,
    split,
    split_counts,
    synth_dataset,
)
from .downstream import HIDDEN, DownstreamModelSpec, extract_features, train_downstream
from .pretrain import PretrainResult, activations, frozen_prefix, predict, pretrain
from .record import EpochEntry, RunRecord

__all__ = [
    "DatasetHandle", "DownstreamModelSpec", "EpochEntry", "HIDDEN", "PretrainResult",
    "RunRecord", "activations", "distribution_params", "extract_features", "frozen_prefix",
    "load_cache", "load_directory", "predict", "pretrain", "save_cache", "split",
    "split_counts", "synth_dataset", "train_downstream",
]
