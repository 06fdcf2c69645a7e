"""Run configuration files.

Files are TOML or JSON with optional ``[scenario]``, ``[inversion]`` and
``[statespace]`` tables plus top-level ``method`` and ``plots`` keys.
Dotted keys such as ``inversion.lambda_o = 10`` work in both formats.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import tomli

from .inversion import InversionConfig
from .simulator import ScenarioSpec
from .statespace import StateSpaceConfig

METHODS = ("invert", "joint", "both")
SECTIONS = {"scenario": ScenarioSpec, "inversion": InversionConfig, "statespace": StateSpaceConfig}
TOP_LEVEL = ("method", "plots")


class ConfigError(ValueError):
    """A configuration file or value could not be parsed; the message names the line/column or field."""


@dataclass(frozen=True)
class RunConfig:
    method: str = "both"
    inversion: InversionConfig = field(default_factory=InversionConfig)
    statespace: StateSpaceConfig = field(default_factory=StateSpaceConfig)
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    output_dir: Optional[Path] = None
    emit_plots: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method: expected one of {', '.join(METHODS)}, got {self.method!r}")

    @property
    def runs_invert(self) -> bool:
        return self.method in ("invert", "both")

    @property
    def runs_joint(self) -> bool:
        return self.method in ("joint", "both")


def parse_text(text: str, source: str = "<config>") -> dict:
    """Parse TOML, or JSON when the text starts with ``{``."""
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{source}: top level must be an object")
    else:
        try:
            raw = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{source}: {exc}") from None
    return _nest(raw)


def _nest(raw: dict) -> dict:
    """Expand flat dotted keys (``"inversion.lambda_o"``) into nested tables."""
    out: dict = {}
    for key, value in raw.items():
        parts = key.split(".") if isinstance(key, str) else [key]
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"{key}: conflicts with a scalar value")
        if isinstance(value, dict):
            value = _nest(value)
            existing = node.get(parts[-1])
            if isinstance(existing, dict):
                existing.update(value)
                continue
        node[parts[-1]] = value
    return out


def load_file(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{p}: {exc.strerror}") from None
    return parse_text(text, str(p))


def _check_value(section: str, name: str, value: Any, default: Any) -> Any:
    where = f"{section}.{name}"
    if isinstance(default, bool) or name == "two_profile":
        if value is None and name == "two_profile":
            return None
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false, got {value!r}")
        return value
    if isinstance(default, (int, float)) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return type(default)(value) if isinstance(default, int) and float(value).is_integer() else value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, tuple) or default is None:
        if value is None:
            return None
        if isinstance(value, (list, tuple)):
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
                raise ConfigError(f"{where}: expected a list of numbers, got {value!r}")
            return tuple(float(v) for v in value)
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return value
        raise ConfigError(f"{where}: unsupported value {value!r}")
    return value


def build_section(section: str, values: dict, base=None):
    """Instantiate the dataclass of ``section`` from ``values``, naming the offending field on error."""
    cls = SECTIONS[section]
    base = cls() if base is None else base
    if not isinstance(values, dict):
        raise ConfigError(f"{section}: expected a table")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    changes = {}
    for name, value in values.items():
        if name not in fields:
            raise ConfigError(f"{section}.{name}: unknown field")
        changes[name] = _check_value(section, name, value, getattr(base, name))
    try:
        return dataclasses.replace(base, **changes)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{section}: {exc}") from None


def run_config_from(mapping: dict, base: RunConfig = RunConfig()) -> RunConfig:
    for key in mapping:
        if key not in SECTIONS and key not in TOP_LEVEL and key not in ("sweep",):
            raise ConfigError(f"{key}: unknown field")
    kwargs = {}
    for section in SECTIONS:
        kwargs[section] = build_section(section, mapping.get(section, {}), getattr(base, section))
    method = mapping.get("method", base.method)
    if not isinstance(method, str):
        raise ConfigError(f"method: expected a string, got {method!r}")
    plots = mapping.get("plots", base.emit_plots)
    if not isinstance(plots, bool):
        raise ConfigError(f"plots: expected true or false, got {plots!r}")
    return RunConfig(method=method, emit_plots=plots, output_dir=base.output_dir, **kwargs)


def scenario_from(mapping: dict) -> ScenarioSpec:
    """Scenario from a ``[scenario]`` table or, failing that, from top-level keys."""
    values = mapping.get("scenario", None)
    if values is None:
        values = {k: v for k, v in mapping.items() if k not in SECTIONS and k not in TOP_LEVEL and k != "sweep"}
    return build_section("scenario", values)


def apply_override(config: RunConfig, dotted: str, value) -> RunConfig:
    """Copy of ``config`` with one ``section.field`` (or top-level) value replaced."""
    if "." not in dotted:
        return run_config_from({dotted: value}, config)
    section, name = dotted.split(".", 1)
    if section not in SECTIONS:
        raise ConfigError(f"{dotted}: unknown section {section!r}")
    return dataclasses.replace(config, **{section: build_section(section, {name: value}, getattr(config, section))})
