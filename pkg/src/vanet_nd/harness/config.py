"""Experiment configuration files.

An experiment file is INI text with four sections::

    [scenario]   L, d, r, s_x, M, rsu_comm_radius, completeness
    [sim]        algorithm, B, k, p_t, max_slots, trials, seed, warmup_slots,
                 mode, stop_fraction, incomplete_beams
    [sweep]      parameter (p_t | k | M | algorithm), values (comma separated)
    [output]     dir, format (csv | json)

Every key is optional.  Unknown sections or keys are errors, since a typo in
a sweep axis would silently run the wrong experiment.  The same keys can be
overridden as ``section.key=value`` strings.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

from ..errors import ConfigError
from ..scenario import ScenarioConfig
from ..simulator.config import ALGORITHMS, SimConfig

FORMATS = ("csv", "json")
SWEEP_AXES = ("p_t", "k", "M", "algorithm")


def _opt_float(s):
    return None if s.strip().lower() in ("", "none") else float(s)


SCENARIO_KEYS = {"L": float, "d": float, "r": float, "s_x": float, "M": int,
                 "rsu_comm_radius": _opt_float, "completeness": str}
SIM_KEYS = {"algorithm": str, "B": int, "k": int, "p_t": float, "max_slots": int,
            "trials": int, "seed": int, "warmup_slots": int, "mode": str,
            "stop_fraction": float, "incomplete_beams": str}
SWEEP_KEYS = {"parameter": str, "values": str}
OUTPUT_KEYS = {"dir": str, "format": str}
SECTIONS = {"scenario": SCENARIO_KEYS, "sim": SIM_KEYS, "sweep": SWEEP_KEYS,
            "output": OUTPUT_KEYS}


@dataclass(frozen=True)
class Sweep:
    parameter: str
    values: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    sweep: Optional[Sweep] = None
    out_dir: str = "out"
    format: str = "csv"

    def with_seed(self, seed: Optional[int]) -> "ExperimentConfig":
        if seed is None:
            return self
        return dataclasses.replace(self, sim=self.sim.with_(seed=int(seed)))

    def to_dict(self) -> dict:
        return {
            "scenario": dataclasses.asdict(self.scenario),
            "sim": dataclasses.asdict(self.sim),
            "sweep": None if self.sweep is None else
            {"parameter": self.sweep.parameter, "values": list(self.sweep.values)},
            "output": {"format": self.format},
        }

    def digest(self, extra=None) -> str:
        """Short hash of everything that affects results (not the out dir)."""
        blob = json.dumps([self.to_dict(), extra], sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _sweep_value(parameter, raw):
    if parameter == "p_t":
        return float(raw)
    if parameter in ("k", "M"):
        return int(raw)
    return raw.strip()


def apply_sweep_value(cfg: ExperimentConfig, parameter: str, value) -> ExperimentConfig:
    if parameter == "M":
        return dataclasses.replace(cfg, scenario=dataclasses.replace(cfg.scenario, M=value))
    return dataclasses.replace(cfg, sim=cfg.sim.with_(**{parameter: value}))


def _collect(fn, problems):
    try:
        fn()
    except ConfigError as e:
        problems.extend(e.problems)


def build_config(values: dict) -> ExperimentConfig:
    """Typed ExperimentConfig from {section: {key: raw string}}.

    Raises ConfigError listing every problem found, not just the first.
    """
    problems = []
    typed = {name: {} for name in SECTIONS}
    for section, entries in values.items():
        if section not in SECTIONS:
            problems.append(f"unknown section [{section}]")
            continue
        keys = SECTIONS[section]
        for key, raw in entries.items():
            if key not in keys:
                problems.append(f"unknown key {section}.{key}")
                continue
            try:
                typed[section][key] = keys[key](raw) if isinstance(raw, str) else raw
            except ValueError:
                problems.append(f"{section}.{key}: cannot parse {raw!r}")

    sim_vals = typed["sim"]
    scenario = ScenarioConfig(B=sim_vals.get("B", SimConfig.B), **typed["scenario"])
    sim = SimConfig(**sim_vals)
    _collect(scenario.validate, problems)
    _collect(sim.validate, problems)

    out = typed["output"]
    fmt = out.get("format", "csv")
    if fmt not in FORMATS:
        problems.append(f"output.format must be one of {FORMATS}, got {fmt!r}")
    out_dir = out.get("dir", "out")

    sweep = None
    sw = typed["sweep"]
    if sw:
        param = sw.get("parameter")
        raw_values = sw.get("values", "")
        if param not in SWEEP_AXES:
            problems.append(f"sweep.parameter must be one of {SWEEP_AXES}, got {param!r}")
        items = [v for v in (x.strip() for x in raw_values.split(",")) if v]
        if not items:
            problems.append("sweep.values is empty")
        elif param in SWEEP_AXES:
            vals = []
            base = ExperimentConfig(scenario, sim, None, out_dir, fmt)
            for raw in items:
                try:
                    v = _sweep_value(param, raw)
                except ValueError:
                    problems.append(f"sweep value {raw!r} is not valid for {param}")
                    continue
                if param == "algorithm" and v not in ALGORITHMS:
                    problems.append(f"sweep value {v!r} is not an algorithm")
                    continue
                trial_cfg = apply_sweep_value(base, param, v)
                before = len(problems)
                _collect(trial_cfg.scenario.validate, problems)
                _collect(trial_cfg.sim.validate, problems)
                if len(problems) > before:
                    problems.insert(before, f"sweep value {raw!r} for {param}:")
                vals.append(v)
            sweep = Sweep(param, tuple(vals))
    if problems:
        raise ConfigError(_dedupe(problems))
    return ExperimentConfig(scenario, sim, sweep, out_dir, fmt)


def _dedupe(items):
    seen, out = set(), []
    for x in items:
        if x not in seen:
            seen.add(x)
            out.append(x)
    return out


def parse_overrides(pairs) -> dict:
    """{'sim': {'k': '3'}} from ['sim.k=3', ...]."""
    out, problems = {}, []
    for item in pairs or ():
        key, sep, val = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot or not name:
            problems.append(f"override {item!r} is not section.key=value")
            continue
        out.setdefault(section, {})[name] = val.strip()
    if problems:
        raise ConfigError(problems)
    return out


def read_config_file(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError([f"config file {path!r} does not exist"])
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (L, M, B)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as e:
        raise ConfigError([f"{path}: {e}"])
    return {s: dict(cp.items(s)) for s in cp.sections()}


def merge(*layers) -> dict:
    out = {}
    for layer in layers:
        for section, entries in (layer or {}).items():
            out.setdefault(section, {}).update(entries)
    return out


def load_config(path: Optional[str] = None, overrides=None) -> ExperimentConfig:
    base = read_config_file(path) if path else {}
    return build_config(merge(base, parse_overrides(overrides)))
