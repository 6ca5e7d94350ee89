"""Runtime-based energy model and the reference runtime table.

Energy is ``hours * (devices*power*usage + memory_gb*W_per_GB) * PUE * PSF``
in kWh. The default coefficients reproduce the published kWh column from
its runtime column (0.43927 kW effective draw).
"""
from __future__ import annotations

import csv
import io
import re
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

_DURATION = re.compile(r"^\s*(\d+):(\d+(?:\.\d*)?)\s*$")


@dataclass(frozen=True)
class EnergyConfig:
    device_count: int = 1
    device_power: float = 250.0  # W per device
    usage_factor: float = 1.0
    memory_gb: float = 35.0
    memory_power_per_gb: float = 0.3725  # W/GB
    pue: float = 1.67
    psf: float = 1.0
    carbon_intensity: float | None = None  # gCO2e/kWh; None disables carbon output

    def __post_init__(self):
        if self.device_count < 1 or self.device_power <= 0 or self.memory_gb < 0:
            raise ValueError("device count/power must be positive and memory non-negative")
        if self.memory_power_per_gb < 0:
            raise ValueError("memory power coefficient must be non-negative")
        if not 0 < self.usage_factor <= 1:
            raise ValueError("usage factor must lie in (0, 1]")
        if self.pue < 1 or self.psf < 1:
            raise ValueError("PUE and PSF must be >= 1")

    @property
    def draw_kw(self):
        """Effective power draw in kW, including PUE and PSF."""
        watts = (self.device_count * self.device_power * self.usage_factor
                 + self.memory_gb * self.memory_power_per_gb)
        return watts * self.pue * self.psf / 1000.0


def estimate_kwh(hours, cfg=EnergyConfig()):
    if hours < 0:
        raise ValueError(f"duration must be non-negative, got {hours}")
    return hours * cfg.draw_kw


def carbon_grams(kwh, cfg):
    if cfg.carbon_intensity is None:
        return None
    return kwh * cfg.carbon_intensity


def parse_duration(text):
    """``"H:M.mmm"`` (hours, decimal minutes) to hours."""
    m = _DURATION.match(str(text))
    if not m:
        raise ValueError(f"malformed duration {text!r}; expected hours:minutes, e.g. 132:12.163")
    minutes = float(m.group(2))
    if minutes >= 60:
        raise ValueError(f"minutes must be < 60 in {text!r}")
    return int(m.group(1)) + minutes / 60.0


def format_duration(hours):
    whole = int(hours)
    minutes = (hours - whole) * 60.0
    if round(minutes, 3) >= 60.0:
        whole, minutes = whole + 1, 0.0
    return f"{whole}:{minutes:06.3f}"


@dataclass
class RuntimeLog:
    phases: list = field(default_factory=list)  # hours per phase

    @property
    def total(self):
        return float(sum(self.phases))

    def add(self, hours):
        if hours < 0:
            raise ValueError("phase duration must be non-negative")
        self.phases.append(float(hours))

    @contextmanager
    def phase(self):
        """Time a block and append it as a phase."""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.add((time.perf_counter() - start) / 3600.0)


# (strategy, phase runtimes, published total, published kWh)
TABLE_B1 = (
    ("ImageNet", (), "0:00", 0.0),
    ("ImageNet_TF_F1B", (), "0:00", 0.0),
    ("ImageNet_TF_F2B", (), "0:00", 0.0),
    ("DA_L1SB", ("132:12.163", "22:25.804"), "154:37.967", 67.93),
    ("DA_L2SB", ("132:12.163", "27:27.366"), "159:39.529", 70.12),
    ("DA", ("132:12.163", "83:44.825"), "215:56.988", 94.86),
    ("DA_TF_F1B", ("40:14.181", "29:00"), "69:14.181", 30.41),
    ("DA_TF_F2B", ("68:17.844", "59:49.728"), "128:7.572", 56.28),
    ("DA_L1SB_PFT", ("132:12.163", "14:56.916", "27:54.942"), "175:4.021", 76.90),
    ("DA_L2SB_PFT", ("132:12.163", "18:54.731", "27:54.942"), "179:1.836", 78.64),
)


def fixture_runtimes():
    return {name: RuntimeLog([parse_duration(t) for t in phases]) for name, phases, _, _ in TABLE_B1}


def fixture_kwh():
    return {name: kwh for name, _, _, kwh in TABLE_B1}


def fit_kw(hours, kwh):
    """Least-squares slope through the origin of kWh against hours."""
    h = np.asarray(hours, dtype=np.float64)
    k = np.asarray(kwh, dtype=np.float64)
    return float((h * k).sum() / (h * h).sum())


@dataclass(frozen=True)
class EnergyRow:
    strategy: str
    phase_hours: tuple
    total_hours: float
    kwh: float
    carbon_g: float | None = None


def energy_table(runtimes, cfg=EnergyConfig()):
    """Rows for ``{strategy: RuntimeLog}``; strategies without phases report 0."""
    rows = []
    for name, log in runtimes.items():
        kwh = estimate_kwh(log.total, cfg)
        rows.append(EnergyRow(name, tuple(log.phases), log.total, kwh, carbon_grams(kwh, cfg)))
    return rows


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    with_carbon = any(r.carbon_g is not None for r in rows)
    writer.writerow(("strategy", "total_hours", "kwh") + (("carbon_g",) if with_carbon else ()))
    for r in rows:
        row = (r.strategy, f"{r.total_hours:.6f}", f"{r.kwh:.4f}")
        if with_carbon:
            row += (f"{r.carbon_g:.1f}",)
        writer.writerow(row)
    return buf.getvalue()


def render_table(rows):
    """Aligned text table: one line per phase, totals on each strategy's first line.

    A ``kgCO2e`` column is added when any row carries a carbon estimate.
    """
    with_carbon = any(r.carbon_g is not None for r in rows)
    head = f"{'Strategy':<16} {'Phase':>5} {'Phase time (H:M)':>17} {'Total time (H:M)':>17} {'kWh':>8}"
    if with_carbon:
        head += f" {'kgCO2e':>9}"
    lines = [head, "-" * len(head)]
    for r in rows:
        total = format_duration(r.total_hours)
        co2 = f" {r.carbon_g / 1000:>9.2f}" if with_carbon else ""
        if not r.phase_hours:
            lines.append(f"{r.strategy:<16} {'-':>5} {'0':>17} {total:>17} {r.kwh:>8.2f}{co2}")
            continue
        for i, h in enumerate(r.phase_hours, start=1):
            if i == 1:
                lines.append(f"{r.strategy:<16} {i:>5} {format_duration(h):>17} {total:>17} {r.kwh:>8.2f}{co2}")
            else:
                lines.append(f"{'':<16} {i:>5} {format_duration(h):>17}")
    return "\n".join(lines) + "\n"
