"""Experiment configuration: parsing, defaults and echo."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigParse

COMMANDS = ("orbits", "close", "obstruction", "solve", "flowsolve", "diffsolve", "distortion", "conformal", "proptest")

NAMED_SYSTEMS = {
    "cat": [[2, 1], [1, 1]],
    "diag4": [[2, 1, 0, 0], [1, 1, 0, 0], [0, 0, 3, 1], [0, 0, 2, 1]],
}

DEFAULT_GENERATOR = {
    "group": "SL2",
    "alpha": 1.0,
    "kind": "coboundary",
    "potential": {
        "kind": "trig",
        "coeffs": [
            {"freq": [1, 0], "basis": "E", "amp": 0.3},
            {"freq": [0, 1], "basis": "H", "amp": 0.2, "phase": 0.5},
            {"freq": [1, 1], "basis": "F", "amp": 0.25},
        ],
    },
}


@dataclass
class ExperimentConfig:
    command: str
    system: object = "cat"
    generator: dict | None = None
    params: dict = field(default_factory=dict)
    seed: int = 0
    precision_bits: int | None = None
    threads: int | None = None

    def as_dict(self) -> dict:
        return copy.deepcopy(asdict(self))

    def validate(self) -> "ExperimentConfig":
        if self.command not in COMMANDS:
            raise ConfigParse(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        if isinstance(self.system, str) and self.system not in NAMED_SYSTEMS and self.system != "conformal4":
            raise ConfigParse(f"unknown named system {self.system!r}")
        if not isinstance(self.params, dict):
            raise ConfigParse("params must be a mapping")
        if self.generator is not None and "group" not in self.generator:
            raise ConfigParse("generator spec needs a 'group' entry")
        return self


def read_config_file(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParse(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix in (".yaml", ".yml"):
            import yaml

            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except Exception as exc:
        raise ConfigParse(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigParse("config root must be a mapping")
    return data


def make_config(command: str, data: dict | None = None, **overrides) -> ExperimentConfig:
    data = dict(data or {})
    data.pop("command", None)
    known = {"system", "generator", "params", "seed", "precision_bits", "threads"}
    unknown = set(data) - known
    if unknown:
        raise ConfigParse(f"unknown config keys: {', '.join(sorted(unknown))}")
    for k, v in overrides.items():
        if v is not None:
            data[k] = v
    try:
        cfg = ExperimentConfig(command=command, **data)
    except TypeError as exc:
        raise ConfigParse(str(exc)) from exc
    return cfg.validate()
