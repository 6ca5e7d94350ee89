"""Per-run training records."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field


@dataclass
class EpochEntry:
    epoch: int
    phase: int
    train_loss: float
    dev_auc: float | None = None
    ext_auc: float | None = None


@dataclass
class RunRecord:
    strategy: str
    seed: int
    config: dict = field(default_factory=dict)
    phase_seconds: list = field(default_factory=list)
    epochs: list = field(default_factory=list)

    def add_epoch(self, entry):
        if self.epochs and entry.epoch <= self.epochs[-1].epoch:
            raise ValueError("epochs must be strictly increasing")
        self.epochs.append(entry)

    def curve(self, which="dev"):
        key = f"{which}_auc"
        return [(e.epoch, getattr(e, key)) for e in self.epochs if getattr(e, key) is not None]

    def to_dict(self, include_timing=True):
        """Plain dict; wall times are left out unless ``include_timing``."""
        d = {
            "strategy": self.strategy,
            "seed": self.seed,
            "config": self.config,
            "epochs": [asdict(e) for e in self.epochs],
        }
        if include_timing:
            d["phase_seconds"] = list(self.phase_seconds)
        return d

    def to_json(self, include_timing=False):
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        return cls(
            strategy=d["strategy"],
            seed=d["seed"],
            config=d.get("config", {}),
            phase_seconds=list(d.get("phase_seconds", [])),
            epochs=[EpochEntry(**e) for e in d.get("epochs", [])],
        )
