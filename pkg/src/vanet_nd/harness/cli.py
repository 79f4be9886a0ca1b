"""Command-line front end.

    vanet-nd analyze              model curves and slot bounds
    vanet-nd simulate             trials of the configured algorithm
    vanet-nd sweep                trials over a sweep axis, with aggregates
    vanet-nd preset fig9          figure reproduction
    vanet-nd validate fast|full   oracle suites
    vanet-nd scenario gen         node and RSU positions

Exit status: 0 success, 1 validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from ..errors import ConfigError
from . import experiments as ex
from .config import ExperimentConfig, load_config
from .output import write_table
from .presets import PRESETS, run_preset
from .validate import LEVELS, run_validation

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("vanet_nd")


GLOBAL_DEFAULTS = {"config": None, "seed": None, "out": None, "format": None, "jobs": 1,
                   "set": None, "verbose": False}


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand; SUPPRESS keeps
    # the subparser from resetting a value given before it
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="INI experiment file")
    common.add_argument("--seed", type=int, help="base seed (overrides sim.seed)")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--format", choices=("csv", "json"), help="table format")
    common.add_argument("--jobs", type=int, help="worker processes for trials (default 1)")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config entry; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="vanet-nd", parents=[common],
                                description="Directional neighbor discovery on a road.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="analytic curves and bounds")
    a.add_argument("--t-max", type=int, default=500)
    a.add_argument("--variant", choices=("DistinctOrdered", "PaperEq1"),
                   default="PaperEq1", help="collision-free reception model")

    sub.add_parser("simulate", parents=[common], help="run sim.trials trials")
    sub.add_parser("sweep", parents=[common], help="run trials over the [sweep] axis")

    pr = sub.add_parser("preset", parents=[common], help="figure reproduction")
    pr.add_argument("name", choices=sorted(PRESETS))
    pr.add_argument("--trials", type=int, help="trials per point (preset default otherwise)")
    pr.add_argument("--t-max", type=int, help="slots on time axes")
    pr.add_argument("--max-slots", type=int, help="slot budget for timing runs")

    v = sub.add_parser("validate", parents=[common], help="oracle suites")
    v.add_argument("level", choices=LEVELS)

    s = sub.add_parser("scenario", parents=[common], help="scenario tools")
    s.add_argument("action", choices=("gen",))
    return p


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config, args.set).with_seed(args.seed)
    changes = {}
    if args.out:
        changes["out_dir"] = args.out
    if args.format:
        changes["format"] = args.format
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
    if args.jobs < 1:
        raise ConfigError(["--jobs must be >= 1"])
    return cfg


def _check_writable(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise ConfigError([f"output directory {path!r} is not writable: {e}"])
    if not os.access(path, os.W_OK):
        raise ConfigError([f"output directory {path!r} is not writable"])


def _write(tables, cfg, out_dir, extra=None):
    meta = {"config_hash": cfg.digest(extra), "seed": cfg.sim.seed}
    paths = []
    for item in tables:
        sub, table = item if isinstance(item, tuple) else ("", item)
        paths.append(write_table(table, os.path.join(out_dir, sub) if sub else out_dir,
                                 meta, cfg.format))
    return paths


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for key, value in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        out = cfg.out_dir
        if args.command == "sweep" and cfg.sweep is None:
            raise ConfigError(["sweep needs a [sweep] section (parameter, values)"])
        _check_writable(out)
    except ConfigError as e:
        for prob in e.problems:
            print(f"config error: {prob}", file=sys.stderr)
        return EXIT_CONFIG

    cmd = args.command
    if cmd == "analyze":
        tables = ex.analyze_tables(cfg.scenario, cfg.sim, args.t_max, args.variant)
        paths = _write(tables, cfg, out, {"t_max": args.t_max, "variant": args.variant})
    elif cmd == "simulate":
        tables, results = ex.simulate_tables(cfg.scenario, cfg.sim, args.jobs)
        paths = _write(tables, cfg, out)
        unfinished = sum(not r.finished for r in results)
        if unfinished:
            log.warning("%d of %d trials hit the %d-slot budget", unfinished, len(results),
                        cfg.sim.max_slots)
    elif cmd == "sweep":
        paths = _write(ex.sweep_tables(cfg, args.jobs), cfg, out)
    elif cmd == "preset":
        try:
            tables, settings = run_preset(args.name, cfg.scenario, cfg.sim, cfg.sim.seed,
                                          trials=args.trials, jobs=args.jobs,
                                          t_max=args.t_max, max_slots=args.max_slots)
        except ConfigError as e:
            for prob in e.problems:
                print(f"config error: {prob}", file=sys.stderr)
            return EXIT_CONFIG
        paths = _write(tables, cfg, os.path.join(out, args.name), settings)
    elif cmd == "validate":
        ok, checks, tables = run_validation(args.level)
        paths = _write(tables, cfg, out, {"level": args.level})
        for c in checks:
            print(f"{'PASS' if c.passed else 'FAIL'} [{c.suite}] {c.name}: "
                  f"{c.measured:.3g} (tolerance {c.tolerance:.3g})")
        if not ok:
            return EXIT_FAILED
    elif cmd == "scenario":
        paths = _write(ex.scenario_tables(cfg.scenario, cfg.sim.seed), cfg, out)
    else:  # pragma: no cover - argparse enforces the choices
        parser.error(f"unknown command {cmd}")
    for path in paths[:20]:
        print(path)
    if len(paths) > 20:
        print(f"... and {len(paths) - 20} more")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
