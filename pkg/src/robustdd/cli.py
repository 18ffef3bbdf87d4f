"""Batch front-end: ``robustdd {map,decay,sweep,catalog}``.

Resolution order for every setting is command-line flag, then the JSON file
given by ``--config``, then the built-in default.  All resolved values are
written to a ``<command>.meta.json`` sidecar next to the data file.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import numpy as np

from robustdd import __version__
from robustdd.analysis import (
    DECAY_HORIZON,
    DECAY_STOP,
    MAP_T_P,
    MAP_TAU_OVER_TP,
    duty_cycle_sweep,
    fidelity_map,
)
from robustdd.noise import DEFAULT_DT, DEFAULT_SEED, DEFAULT_SIGMA_B, DEFAULT_TAU_E, GaussianEnsemble, NoiseProcess
from robustdd.output import write
from robustdd.sequences import Family, SequenceSpec, expand_sequence
from robustdd.simulator import AXES, SAMPLING, InitialState, ensemble_average

EXIT_CONFIG = 2
EXIT_IO = 3

COMMANDS = ("map", "decay", "sweep", "catalog")

CATALOG = {
    "cpmg": {"modifiers": ["knill"], "parameters": {"pulse_count": "int >= 1", "tau_d": "us", "t_p": "us"}},
    "udd": {"modifiers": ["knill"], "parameters": {"pulse_count": "int >= 1", "tau_d": "us", "t_p": "us"}},
    "xy4": {"modifiers": ["symmetric", "knill"], "parameters": {"tau_d": "us", "t_p": "us"}},
    "xy8": {"modifiers": ["symmetric", "knill"], "parameters": {"tau_d": "us", "t_p": "us"}},
    "xy16": {"modifiers": ["symmetric", "knill"], "parameters": {"tau_d": "us", "t_p": "us"}},
    "cdd": {"modifiers": ["symmetric", "knill"], "parameters": {"level": "int >= 1", "tau_d": "us", "t_p": "us"}},
    "kdd": {"modifiers": [], "parameters": {"tau_d": "us", "t_p": "us", "phase": "rad"}},
}


class ConfigError(ValueError):
    """Invalid run configuration; ``field`` names the offending setting."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    command: str = "catalog"
    sequence: str = "xy4"
    sequences: List[str] = field(default_factory=lambda: ["xy4", "xy4:symmetric", "kdd"])
    symmetric: bool = False
    knill: bool = False
    level: int = 1
    pulse_count: int = 1
    tau_d: Optional[float] = None
    tau_d_list: List[float] = field(default_factory=lambda: [5.0, 10.0, 20.0, 40.0, 80.0, 150.0])
    t_p: float = MAP_T_P
    delta_pulses: bool = False
    init: str = "x"
    sigma: float = 0.0
    ensemble_size: Optional[int] = None
    offset: float = 0.0
    cycles: int = 100
    pulses: int = 100
    grid: int = 81
    grid_range: float = 0.2
    tau_e: float = DEFAULT_TAU_E
    sigma_b: Optional[float] = None
    dt: float = DEFAULT_DT
    trajectories: int = 1
    horizon: int = DECAY_HORIZON
    stop_below: Optional[float] = DECAY_STOP
    sample: str = "cycle"
    seed: int = DEFAULT_SEED
    out: str = "."
    format: str = "csv"
    workers: int = 1

    def resolved(self) -> "RunConfig":
        """Fill command-dependent defaults."""
        c = RunConfig(**asdict(self))
        if c.tau_d is None:
            c.tau_d = MAP_TAU_OVER_TP * c.t_p
        if c.ensemble_size is None:
            c.ensemble_size = 10000 if c.command == "decay" else (32 if c.command == "sweep" else 1)
        if c.sigma_b is None:
            c.sigma_b = DEFAULT_SIGMA_B if c.command == "sweep" else 0.0
        return c

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError("command", f"must be one of {COMMANDS}")
        if self.format not in ("csv", "json"):
            raise ConfigError("format", "must be csv or json")
        if self.init not in AXES:
            raise ConfigError("init", f"must be one of {sorted(AXES)}")
        if self.sample not in SAMPLING:
            raise ConfigError("sample", f"must be one of {SAMPLING}")
        for name in ("cycles", "pulses", "grid", "trajectories", "horizon", "workers", "level", "pulse_count"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.ensemble_size is not None and self.ensemble_size < 1:
            raise ConfigError("ensemble_size", "must be >= 1")
        for name in ("sigma", "grid_range", "dt", "tau_e"):
            if not getattr(self, name) >= 0:
                raise ConfigError(name, "must be non-negative")
        if not self.t_p > 0:
            raise ConfigError("t_p", "must be positive")
        if self.tau_d is not None and self.tau_d < 0:
            raise ConfigError("tau_d", "must be non-negative")
        if any(t < 0 for t in self.tau_d_list) or not self.tau_d_list:
            raise ConfigError("tau_d_list", "must be a non-empty list of non-negative delays")
        if self.sigma_b is not None and self.sigma_b < 0:
            raise ConfigError("sigma_b", "must be non-negative")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        if self.command in ("map", "decay"):
            parse_sequence(self.sequence, self, "sequence")
        if self.command == "sweep":
            for tok in self.sequences:
                parse_sequence(tok, self, "sequences")
        if self.command in ("decay", "sweep") and (self.sigma_b or 0) > 0:
            try:
                NoiseProcess(self.tau_e, self.sigma_b, self.dt, self.seed)
            except ValueError as exc:
                raise ConfigError("dt", str(exc)) from exc


_LEVEL = re.compile(r"^cdd(\d+)$")


def parse_sequence(token: str, cfg: RunConfig, field_name: str = "sequence") -> SequenceSpec:
    """``name[:modifier...]`` with modifiers ``symmetric``/``sym``, ``knill``, ``n=<level>``, ``N=<pulses>``."""
    parts = [p.strip() for p in token.split(":") if p.strip()]
    if not parts:
        raise ConfigError(field_name, "empty sequence name")
    name = parts[0].lower()
    level = cfg.level
    m = _LEVEL.match(name)
    if m:
        name, level = "cdd", int(m.group(1))
    if name not in CATALOG:
        raise ConfigError(field_name, f"unknown sequence {parts[0]!r}; choose from {sorted(CATALOG)}")
    symmetric, knill, count = cfg.symmetric, cfg.knill, cfg.pulse_count
    for mod in parts[1:]:
        low = mod.lower()
        if low in ("symmetric", "sym"):
            symmetric = True
        elif low == "knill":
            knill = True
        elif low.startswith("n="):
            level = int(low[2:])
        elif mod.startswith("N="):
            count = int(mod[2:])
        else:
            raise ConfigError(field_name, f"unknown modifier {mod!r}")
    allowed = CATALOG[name]["modifiers"]
    if symmetric and "symmetric" not in allowed:
        raise ConfigError(field_name, f"{name} has no symmetric variant")
    if knill and "knill" not in allowed:
        raise ConfigError(field_name, f"{name} has no knill variant")
    try:
        spec = SequenceSpec(Family(name), float(cfg.tau_d if cfg.tau_d is not None else MAP_TAU_OVER_TP * cfg.t_p),
                            float(cfg.t_p), symmetric, level, count, knill)
        expand_sequence(spec)
    except ValueError as exc:
        raise ConfigError(field_name, str(exc)) from exc
    return spec


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robustdd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=str, default=None, help="JSON file of settings")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--out", type=str, default=None, help="output directory")
        sp.add_argument("--format", choices=("csv", "json"), default=None)

    def sequence(sp):
        sp.add_argument("--symmetric", action="store_const", const=True, default=None)
        sp.add_argument("--knill", action="store_const", const=True, default=None)
        sp.add_argument("--level", type=int, default=None)
        sp.add_argument("--pulse-count", type=int, default=None)
        sp.add_argument("--t-p", type=float, default=None)
        sp.add_argument("--delta-pulses", action="store_const", const=True, default=None)

    def bath(sp):
        sp.add_argument("--tau-e", type=float, default=None)
        sp.add_argument("--sigma-b", type=float, default=None)
        sp.add_argument("--dt", type=float, default=None)
        sp.add_argument("--trajectories", type=int, default=None)
        sp.add_argument("--sigma", type=float, default=None, help="std of the flip-angle fraction")
        sp.add_argument("--ensemble-size", type=int, default=None)
        sp.add_argument("--offset", type=float, default=None)
        sp.add_argument("--init", choices=sorted(AXES), default=None)
        sp.add_argument("--sample", choices=SAMPLING, default=None)

    m = sub.add_parser("map", help="fidelity map over flip-angle and offset errors")
    common(m)
    sequence(m)
    m.add_argument("--sequence", type=str, default=None)
    m.add_argument("--tau-d", type=float, default=None)
    m.add_argument("--pulses", type=int, default=None)
    m.add_argument("--grid", type=int, default=None)
    m.add_argument("--grid-range", type=float, default=None)

    d = sub.add_parser("decay", help="ensemble-averaged magnetization trace")
    common(d)
    sequence(d)
    bath(d)
    d.add_argument("--sequence", type=str, default=None)
    d.add_argument("--tau-d", type=float, default=None)
    d.add_argument("--cycles", type=int, default=None)

    s = sub.add_parser("sweep", help="1/e decay time versus duty cycle")
    common(s)
    sequence(s)
    bath(s)
    s.add_argument("--sequences", type=lambda v: [t for t in v.split(",") if t], default=None)
    s.add_argument("--tau-d", dest="tau_d_list", type=lambda v: [float(t) for t in v.split(",") if t],
                   default=None)
    s.add_argument("--horizon", type=int, default=None)
    s.add_argument("--stop-below", type=float, default=None)

    c = sub.add_parser("catalog", help="list sequence families")
    common(c)
    return p


def load_config(argv: Optional[List[str]] = None) -> RunConfig:
    args = _parser().parse_args(argv)
    values = {}
    if args.config:
        try:
            values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    for key in values:
        if key not in known:
            raise ConfigError(key, "unknown setting")
    for key, val in vars(args).items():
        if key in known and val is not None:
            values[key] = val
    values["command"] = args.command
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from exc
    cfg = cfg.resolved()
    cfg.validate()
    return cfg


def _meta(cfg: RunConfig, wall: float, files: list) -> dict:
    return {
        "command": cfg.command,
        "config": asdict(cfg),
        "seed": cfg.seed,
        "version": __version__,
        "wall_time_s": wall,
        "files": files,
    }


def execute(cfg: RunConfig):
    """Compute the result object for ``cfg`` (no file output)."""
    if cfg.command == "catalog":
        return CATALOG
    if cfg.command == "map":
        spec = parse_sequence(cfg.sequence, cfg)
        axis = np.linspace(-cfg.grid_range, cfg.grid_range, cfg.grid)
        return fidelity_map(spec, axis, axis, cfg.pulses, cfg.delta_pulses, cfg.workers)
    ensemble = GaussianEnsemble(cfg.sigma, cfg.ensemble_size, cfg.seed, cfg.offset)
    bath = NoiseProcess(cfg.tau_e, cfg.sigma_b, cfg.dt, cfg.seed) if cfg.sigma_b > 0 else None
    if cfg.command == "decay":
        spec = parse_sequence(cfg.sequence, cfg)
        return ensemble_average(expand_sequence(spec), cfg.cycles, InitialState(cfg.init), ensemble, bath,
                                cfg.trajectories, cfg.delta_pulses, sample=cfg.sample)
    specs = [parse_sequence(tok, cfg, "sequences") for tok in cfg.sequences]
    return duty_cycle_sweep(specs, cfg.tau_d_list, bath, ensemble, cfg.trajectories, cfg.init, cfg.horizon,
                            cfg.stop_below, cfg.delta_pulses, cfg.workers)


def run(cfg: RunConfig) -> int:
    """Execute ``cfg`` and write the data file plus its metadata sidecar."""
    start = time.perf_counter()
    result = execute(cfg)
    if cfg.command == "catalog":
        text = json.dumps({"families": result}, indent=1, sort_keys=True)
        print(text)
        if cfg.out != ".":
            try:
                Path(cfg.out).mkdir(parents=True, exist_ok=True)
                (Path(cfg.out) / "catalog.json").write_text(text + "\n", encoding="utf-8")
            except OSError as exc:
                print(f"error: cannot write output: {exc}", file=sys.stderr)
                return EXIT_IO
        return 0
    out = Path(cfg.out)
    name = f"{cfg.command}.{cfg.format}"
    try:
        out.mkdir(parents=True, exist_ok=True)
        # worker count and output location never enter the data file
        inputs = {k: v for k, v in asdict(cfg).items() if k not in ("workers", "out")}
        meta = {"command": cfg.command, "config": inputs, "seed": cfg.seed, "version": __version__}
        write(result, out / name, cfg.format, meta)
        wall = time.perf_counter() - start
        (out / f"{cfg.command}.meta.json").write_text(
            json.dumps(_meta(cfg, wall, [name]), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    print(out / name)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    try:
        cfg = load_config(argv)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
