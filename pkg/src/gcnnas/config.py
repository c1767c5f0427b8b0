"""Run configuration: flat INI sections with typed access and defaults.

Every command resolves its configuration (defaults, then file, then
command-line overrides) and writes the result next to its outputs.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .errors import ConfigError

DEFAULTS: dict[str, dict[str, str]] = {
    "run": {"seed": "7", "out": "runs/out", "threads": "1"},
    "data": {
        "path": "",
        "classes": "3",
        "samples_per_class": "100",
        "joints": "5",
        "frames": "32",
        "channels": "2",
        "noise": "0.08",
    },
    "net": {"preset": "desk", "complementary": "true"},
    "search": {
        "epochs": "30",
        "warmup": "8",
        "population": "16",
        "epsilon": "0.001",
        "mode": "continuous",
        "fitness": "accuracy",
        "lr": "0.1",
        "weight_decay": "0.0001",
        "batch_size": "16",
    },
    "train": {
        "epochs": "30",
        "lr": "0.1",
        "momentum": "0.9",
        "weight_decay": "0.0006",
        "batch_size": "16",
        "stream": "joint",
    },
}


class RunConfig:
    def __init__(self, values: dict[str, dict[str, str]]):
        self.values = values

    @staticmethod
    def load(path: str | None = None, overrides=()) -> "RunConfig":
        values = {section: dict(items) for section, items in DEFAULTS.items()}
        if path:
            parser = configparser.ConfigParser()
            read = parser.read(path)
            if not read:
                raise ConfigError(f"config file {path!r} not found")
            for section in parser.sections():
                if section not in values:
                    raise ConfigError(f"unknown config section [{section}]")
                for key, val in parser.items(section):
                    if key not in values[section]:
                        raise ConfigError(f"unknown config key {section}.{key}")
                    values[section][key] = val
        cfg = RunConfig(values)
        for item in overrides:
            cfg.set_override(item)
        return cfg

    def set_override(self, item: str) -> None:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        dotted, value = item.split("=", 1)
        section, key = dotted.split(".", 1)
        if section not in self.values or key not in self.values[section]:
            raise ConfigError(f"unknown config key {section}.{key}")
        self.values[section][key] = value

    # typed getters

    def get(self, section: str, key: str) -> str:
        try:
            return self.values[section][key]
        except KeyError as exc:
            raise ConfigError(f"unknown config key {section}.{key}") from exc

    def get_int(self, section: str, key: str) -> int:
        raw = self.get(section, key)
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key} must be an integer, got {raw!r}") from exc

    def get_float(self, section: str, key: str) -> float:
        raw = self.get(section, key)
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key} must be a number, got {raw!r}") from exc

    def get_bool(self, section: str, key: str) -> bool:
        raw = self.get(section, key).strip().lower()
        if raw in ("true", "yes", "1", "on"):
            return True
        if raw in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{section}.{key} must be a boolean, got {raw!r}")

    def write_resolved(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = []
        for section in sorted(self.values):
            lines.append(f"[{section}]")
            for key in sorted(self.values[section]):
                lines.append(f"{key} = {self.values[section][key]}")
            lines.append("")
        path.write_text("\n".join(lines), encoding="utf-8")
