"""Declarative ResNet-v1 bottleneck architectures and the named presets."""
from __future__ import annotations

from dataclasses import dataclass, field, replace


@dataclass(frozen=True)
class StageSpec:
    width: int
    out_width: int
    blocks: int
    stride: int = 1


@dataclass(frozen=True)
class HeadSpec:
    kind: str = "none"  # "sigmoid" | "softmax" | "none"
    units: int = 0

    def __post_init__(self):
        if self.kind not in ("sigmoid", "softmax", "none"):
            raise ValueError(f"unknown head kind {self.kind!r}")
        if self.kind == "sigmoid" and self.units != 1:
            raise ValueError("a sigmoid head has exactly 1 unit")
        if self.kind == "softmax" and self.units < 2:
            raise ValueError("a softmax head needs at least 2 units")


@dataclass(frozen=True)
class ArchSpec:
    stages: tuple
    input_shape: tuple = (3, 224, 224)
    stem_width: int = 64
    stem_kernel: int = 7
    head: HeadSpec = field(default_factory=HeadSpec)
    preset: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        self.validate()

    def validate(self):
        if not self.stages:
            raise ValueError("an architecture needs at least one stage")
        if len(self.input_shape) != 3 or min(self.input_shape) <= 0:
            raise ValueError(f"input shape must be (C, H, W), got {self.input_shape}")
        if self.stem_width <= 0 or self.stem_kernel <= 0 or self.stem_kernel % 2 == 0:
            raise ValueError("stem width must be positive and its kernel odd")
        for i, s in enumerate(self.stages, start=1):
            if min(s.width, s.out_width, s.blocks, s.stride) <= 0:
                raise ValueError(f"stage {i}: all fields must be positive, got {s}")

    @property
    def depth(self):
        return len(self.stages)

    @property
    def feature_dim(self):
        return self.stages[-1].out_width

    def truncate(self, n):
        """Stem plus the first ``n`` stages."""
        if not 1 <= n <= len(self.stages):
            raise ValueError(f"truncation depth must be in 1..{len(self.stages)}, got {n}")
        return replace(self, stages=self.stages[:n])

    def with_head(self, kind="none", units=0):
        if kind == "sigmoid" and not units:
            units = 1
        return replace(self, head=HeadSpec(kind, units))

    def to_dict(self):
        return {
            "preset": self.preset,
            "input_shape": list(self.input_shape),
            "stem_width": self.stem_width,
            "stem_kernel": self.stem_kernel,
            "stages": [[s.width, s.out_width, s.blocks, s.stride] for s in self.stages],
            "head": {"kind": self.head.kind, "units": self.head.units},
        }

    @classmethod
    def from_dict(cls, d):
        head = d.get("head", {"kind": "none", "units": 0})
        return cls(
            stages=tuple(StageSpec(*s) for s in d["stages"]),
            input_shape=tuple(d.get("input_shape", (3, 224, 224))),
            stem_width=d.get("stem_width", 64),
            stem_kernel=d.get("stem_kernel", 7),
            head=HeadSpec(head["kind"], head.get("units", 0)),
            preset=d.get("preset", "custom"),
        )


RESNET50_STAGES = (
    StageSpec(64, 256, 3, 1),
    StageSpec(128, 512, 4, 2),
    StageSpec(256, 1024, 6, 2),
    StageSpec(512, 2048, 3, 2),
)

# Same topology at 1/8 width for desk-scale runs.
NANO_STAGES = tuple(
    StageSpec(s.width // 8, s.out_width // 8, s.blocks, s.stride) for s in RESNET50_STAGES
)

PRESETS = {
    "resnet50": dict(stages=RESNET50_STAGES, input_shape=(3, 224, 224), stem_width=64),
    "nano": dict(stages=NANO_STAGES, input_shape=(3, 64, 64), stem_width=8),
}


def preset(name, depth=None, head="none", units=0):
    """Named architecture, optionally truncated to ``depth`` stages."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    spec = ArchSpec(preset=name, **PRESETS[name])
    if depth is not None:
        spec = spec.truncate(depth)
    return spec.with_head(head, units)
