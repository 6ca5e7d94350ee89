"""Architecture construction, parameter accounting and weight archives."""
from .archive import (
    ArchiveEntry,
    WeightArchive,
    load_archive,
    read_archive,
    save_archive,
    write_archive,
)
from .build import (
    SubBlockId,
    build,
    build_graph,
    calibrate_batchnorm,
    enumerate_subblocks,
    stage_cut,
    surrogate_weights,
)
from .counting import ParamCountReport, closed_form_sizes, count_params
from .spec import NANO_STAGES, PRESETS, RESNET50_STAGES, ArchSpec, HeadSpec, StageSpec, preset
from .transfuse import TransfusionReport, transfuse

__all__ = [
    "ArchSpec", "ArchiveEntry", "HeadSpec", "NANO_STAGES", "PRESETS", "ParamCountReport",
    "RESNET50_STAGES", "StageSpec", "SubBlockId", "TransfusionReport", "WeightArchive",
    "build", "build_graph", "calibrate_batchnorm", "closed_form_sizes", "count_params",
    "enumerate_subblocks", "load_archive", "preset", "read_archive", "save_archive",
    "stage_cut", "surrogate_weights", "transfuse", "write_archive",
]
