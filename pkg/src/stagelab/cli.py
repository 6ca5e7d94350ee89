"""Command-line entry point: ``stagelab plan|run|energy|report``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys

from . import __version__, energykit
from .errors import ConfigError, StagelabError, UnknownStrategyError
from .schedule import STRATEGY_NAMES, catalog, plan

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("stagelab")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _threads():
    """Limit BLAS threads when STAGELAB_THREADS is set."""
    value = os.environ.get("STAGELAB_THREADS")
    if not value:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=int(value))


# -- plan --------------------------------------------------------------------

def cmd_plan(args):
    names = STRATEGY_NAMES if args.strategy == "all" else [args.strategy]
    plans = [plan(catalog(n), preset_name=args.preset) for n in names]
    if args.json:
        doc = plans[0].to_dict() if len(plans) == 1 else [p.to_dict() for p in plans]
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print("\n".join(p.render() for p in plans), end="")
    return EXIT_OK


# -- run ---------------------------------------------------------------------

def cmd_run(args):
    from .config import SCHEMA, load_config
    if args.print_schema:
        print(json.dumps(SCHEMA, indent=2))
        return EXIT_OK
    if not args.config:
        raise ConfigError("", "a config file is required")
    cfg = load_config(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    from .pipeline import run
    with _threads():
        out = run(cfg)
    print(out)
    return EXIT_OK


# -- energy ------------------------------------------------------------------

def _parse_runtime(text, index):
    """``NAME=H:M[,H:M...]`` or bare ``H:M[,H:M...]`` (named ``runtimeN``)."""
    name, sep, phases = text.rpartition("=")
    if not sep:
        name = f"runtime{index}"
    elif not name:
        raise ConfigError("--runtime", f"empty strategy name in {text!r}")
    try:
        hours = [energykit.parse_duration(p) for p in phases.split(",")]
    except ValueError as exc:
        raise ConfigError("--runtime", str(exc)) from None
    return name, energykit.RuntimeLog(hours)


def cmd_energy(args):
    runtimes = {}
    if args.from_fixtures:
        runtimes.update(energykit.fixture_runtimes())
    for i, item in enumerate(args.runtime or (), start=1):
        name, rt = _parse_runtime(item, i)
        runtimes[name] = rt
    for path in args.runtime_json or ():
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        name = doc.get("strategy") or os.path.basename(os.path.dirname(os.path.abspath(path)))
        runtimes[name] = energykit.RuntimeLog([s / 3600.0 for s in doc["phase_seconds"]])
    if not runtimes:
        raise ConfigError("", "give --runtime, --runtime-json or --from-fixtures")
    try:
        cfg = energykit.EnergyConfig(
            device_count=args.device_count, device_power=args.device_power,
            usage_factor=args.usage_factor, memory_gb=args.memory_gb,
            memory_power_per_gb=args.memory_power, pue=args.pue, psf=args.psf,
            carbon_intensity=args.carbon_intensity,
        )
    except ValueError as exc:
        raise ConfigError("energy", str(exc)) from None
    rows = energykit.energy_table(runtimes, cfg)
    print(energykit.render_table(rows), end="")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(energykit.rows_to_csv(rows))
    return EXIT_OK


# -- report ------------------------------------------------------------------

def _record_paths(items):
    for item in items:
        if os.path.isdir(item):
            for fname in ("downstream_record.json", "run_record.json"):
                path = os.path.join(item, fname)
                if os.path.exists(path):
                    yield path
                    break
            else:
                raise ConfigError("--records", f"{item} holds no run record")
        else:
            yield item


def cmd_report(args):
    from .evalkit import AucCurve, emit, emit_per_curve
    from .trainer import RunRecord
    curves = []
    for path in _record_paths(args.records):
        with open(path, encoding="utf-8") as fh:
            record = RunRecord.from_dict(json.load(fh))
        for which, label in (("dev", "development"), ("ext", "external")):
            pts = record.curve(which)
            if pts:
                curves.append(AucCurve(record.strategy, label, pts))
    if not curves:
        raise ConfigError("--records", "no AUC curves found in the given records")
    os.makedirs(args.out, exist_ok=True)
    emit(curves, "csv", os.path.join(args.out, "curves.csv"))
    emit(curves, "svg", os.path.join(args.out, "curves.svg"))
    emit_per_curve(curves, args.out)
    print(args.out)
    return EXIT_OK


# -- wiring ------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="stagelab", description="Staged domain-adaptive pre-training toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("plan", help="show the phases and trainable counts of a strategy")
    sp.add_argument("--strategy", required=True, help="strategy name or 'all'")
    sp.add_argument("--preset", default="resnet50", choices=("resnet50", "nano"))
    sp.add_argument("--json", action="store_true", help="machine-readable output")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("run", help="run a configuration end to end")
    sp.add_argument("config", nargs="?", help="JSON run configuration")
    sp.add_argument("--output-dir", help="override output_dir from the config")
    sp.add_argument("--print-schema", action="store_true", help="print the config JSON schema")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("energy", help="estimate energy use from phase runtimes")
    sp.add_argument("--runtime", action="append", metavar="[NAME=]H:M[,H:M...]",
                    help="phase runtimes as hours:decimal-minutes")
    sp.add_argument("--runtime-json", action="append", metavar="PATH", help="runtime.json from a run")
    sp.add_argument("--from-fixtures", action="store_true", help="use the bundled reference runtimes")
    d = energykit.EnergyConfig()
    sp.add_argument("--device-count", type=int, default=d.device_count)
    sp.add_argument("--device-power", type=float, default=d.device_power, help="W per device")
    sp.add_argument("--usage-factor", type=float, default=d.usage_factor)
    sp.add_argument("--memory-gb", type=float, default=d.memory_gb)
    sp.add_argument("--memory-power", type=float, default=d.memory_power_per_gb, help="W per GB")
    sp.add_argument("--pue", type=float, default=d.pue)
    sp.add_argument("--psf", type=float, default=d.psf)
    sp.add_argument("--carbon-intensity", type=float, default=None, help="gCO2e per kWh")
    sp.add_argument("--csv", help="also write the table as CSV")
    sp.set_defaults(func=cmd_energy)

    sp = sub.add_parser("report", help="render AUC curves from run records")
    sp.add_argument("--records", nargs="+", required=True, help="record JSON files or run directories")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UnknownStrategyError as exc:
        print(f"stagelab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"stagelab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StagelabError, ValueError, OSError) as exc:
        print(f"stagelab: failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
