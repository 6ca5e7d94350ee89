"""Strategy catalog: named DAPT schedules as ordered phases of trainable sets."""
from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .archkit import build_graph, count_params, preset
from .errors import SelectorError, UnknownStrategyError
from .numcore.params import BN_KINDS

PHASE1_EPOCHS = 1000
PHASE1_LR = 1e-4
LATER_LR = 1e-5


# -- selectors ---------------------------------------------------------------

def _head_names(graph):
    return {name for node in graph.head_nodes for name, _, _ in node.param_specs()}


@dataclass(frozen=True)
class HeadOnly:
    label = "HeadOnly"

    def resolve(self, graph):
        return frozenset(_head_names(graph))


@dataclass(frozen=True)
class AllNonBN:
    label = "AllNonBN"

    def resolve(self, graph):
        return frozenset(n for n, _, kind in graph.param_specs() if kind not in BN_KINDS)


@dataclass(frozen=True)
class LastSubBlocks:
    """Conv weights and biases of the final ``k`` sub-blocks, plus the head."""
    k: int

    @property
    def label(self):
        return f"LastSubBlocks({self.k})"

    def resolve(self, graph):
        blocks = graph.blocks
        if not 1 <= self.k <= len(blocks):
            raise SelectorError(
                f"LastSubBlocks({self.k}) needs 1..{len(blocks)} sub-blocks in this graph"
            )
        names = set(_head_names(graph))
        for block in blocks[-self.k:]:
            names.update(n for n, _, kind in block.param_specs() if kind not in BN_KINDS)
        return frozenset(names)


@dataclass(frozen=True)
class NoTraining:
    label = "None"

    def resolve(self, graph):
        return frozenset()


def parse_selector(text):
    """Inverse of ``selector.label``."""
    simple = {"HeadOnly": HeadOnly(), "AllNonBN": AllNonBN(), "None": NoTraining()}
    if text in simple:
        return simple[text]
    m = re.fullmatch(r"LastSubBlocks\((\d+)\)", text)
    if m:
        return LastSubBlocks(int(m.group(1)))
    raise SelectorError(f"unknown selector {text!r}")


def resolve(selector, graph):
    return selector.resolve(graph)


# -- phases and strategies ---------------------------------------------------

@dataclass(frozen=True)
class Phase:
    selector: object
    epochs: int
    learning_rate: float

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs <= 0:
            raise ValueError(f"phase epochs must be a positive integer, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")


@dataclass(frozen=True)
class Strategy:
    name: str
    depth: int | None  # None = full architecture, else number of stages kept
    phases: tuple
    requires_transfusion: bool = True

    @property
    def total_epochs(self):
        return sum(p.epochs for p in self.phases)

    def arch(self, base="resnet50"):
        """Architecture for this strategy from a preset name or an ArchSpec."""
        head = "sigmoid" if self.phases else "none"
        if isinstance(base, str):
            return preset(base, depth=self.depth, head=head)
        spec = base.truncate(self.depth) if self.depth is not None else base
        return spec.with_head(head)

    def with_overrides(self, epochs=None, learning_rates=None):
        """Copy with per-phase epoch counts and/or learning rates replaced."""
        phases = list(self.phases)
        for values, fld in ((epochs, "epochs"), (learning_rates, "learning_rate")):
            if values is None:
                continue
            if len(values) != len(phases):
                raise ValueError(f"{self.name} has {len(phases)} phases, got {len(values)} {fld} values")
            phases = [replace(p, **{fld: v}) for p, v in zip(phases, values)]
        return replace(self, phases=tuple(phases))


def _dapt(name, depth, *later):
    phases = [Phase(HeadOnly(), PHASE1_EPOCHS, PHASE1_LR)]
    phases += [Phase(sel, epochs, LATER_LR) for sel, epochs in later]
    return Strategy(name, depth, tuple(phases))


CATALOG = {
    s.name: s for s in (
        Strategy("ImageNet", None, ()),
        _dapt("DA", None, (AllNonBN(), 150)),
        _dapt("DA_L1SB", None, (LastSubBlocks(1), 150)),
        _dapt("DA_L2SB", None, (LastSubBlocks(2), 150)),
        _dapt("DA_L1SB_PFT", None, (LastSubBlocks(1), 100), (AllNonBN(), 50)),
        _dapt("DA_L2SB_PFT", None, (LastSubBlocks(2), 100), (AllNonBN(), 50)),
        _dapt("DA_TF_F1B", 1, (AllNonBN(), 150)),
        _dapt("DA_TF_F2B", 2, (AllNonBN(), 150)),
        Strategy("ImageNet_TF_F1B", 1, ()),
        Strategy("ImageNet_TF_F2B", 2, ()),
    )
}
STRATEGY_NAMES = tuple(CATALOG)
DAPT_NAMES = tuple(n for n, s in CATALOG.items() if s.phases)


def catalog(name):
    try:
        return CATALOG[name]
    except KeyError:
        raise UnknownStrategyError(name, STRATEGY_NAMES) from None


# -- plans -------------------------------------------------------------------

@dataclass(frozen=True)
class PlanRow:
    phase: int
    selector: str
    epochs: int
    learning_rate: float
    trainable: int
    cumulative_epochs: int


@dataclass(frozen=True)
class Plan:
    strategy: str
    architecture: str
    total_params: int
    rows: tuple
    note: str = ""

    def to_dict(self):
        return {
            "strategy": self.strategy,
            "architecture": self.architecture,
            "total_params": self.total_params,
            "phases": [vars(r) for r in self.rows],
            "total_epochs": self.rows[-1].cumulative_epochs if self.rows else 0,
            "note": self.note,
        }

    def render(self):
        lines = [
            f"strategy      {self.strategy}",
            f"architecture  {self.architecture}",
            f"total params  {self.total_params:,}",
            "",
        ]
        if not self.rows:
            lines.append(f"no phases: {self.note}")
            return "\n".join(lines) + "\n"
        header = f"{'phase':<6} {'selector':<17} {'epochs':>6}  {'lr':<8} {'trainable':>11}  {'cumulative':>10}"
        lines += [header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r.phase:<6} {r.selector:<17} {r.epochs:>6}  {r.learning_rate:<8.0e} "
                f"{r.trainable:>11,}  {r.cumulative_epochs:>10}"
            )
        lines.append(f"total epochs  {self.rows[-1].cumulative_epochs}")
        return "\n".join(lines) + "\n"


def describe_arch(spec):
    stages = "full" if spec.preset in ("resnet50", "nano") and spec.depth == 4 else f"{spec.depth} stage(s)"
    return f"{spec.preset} ({stages}), head={spec.head.kind}" + (
        f"({spec.head.units})" if spec.head.kind != "none" else ""
    )


def plan(strategy, graph=None, preset_name="resnet50"):
    """Per-phase trainable counts and cumulative epoch budget for ``strategy``."""
    if graph is None:
        graph = build_graph(strategy.arch(preset_name))
    total = count_params(graph).total
    rows, cumulative = [], 0
    for i, phase in enumerate(strategy.phases, start=1):
        cumulative += phase.epochs
        rows.append(PlanRow(
            i, phase.selector.label, phase.epochs, phase.learning_rate,
            count_params(graph, phase.selector).trainable, cumulative,
        ))
    spec = getattr(graph, "spec", None)
    arch = describe_arch(spec) if spec is not None else graph.name
    note = "" if rows else "transfusion only"
    return Plan(strategy.name, arch, total, tuple(rows), note)
