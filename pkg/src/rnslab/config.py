"""INI configuration: [solver], [model] and [experiment] sections of key = value."""

from __future__ import annotations

import configparser
import dataclasses
import math
import types
import typing

from .experiments import ExperimentPlan
from .model import ModelParams
from .rns.state import SolverConfig


class ConfigError(ValueError):
    pass


_PLAN_KEYS = {"kind", "values", "amplitudes", "seed", "out_dir", "workers", "bisection_steps"}


def _field_types(cls) -> dict:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def _convert(text: str, kind, key: str):
    text = text.strip()
    if typing.get_origin(kind) in (typing.Union, types.UnionType):
        if text.lower() in ("none", ""):
            return None
        kind = next(a for a in typing.get_args(kind) if a is not type(None))
    try:
        if kind is bool:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            (value,) = parse_values(text)
            return value
        if kind is str:
            return text
    except (ValueError, ConfigError):
        raise ConfigError(f"{key}: cannot read {text!r} as {kind.__name__}") from None
    raise ConfigError(f"{key}: unsupported type {kind}")


def parse_values(text: str) -> tuple:
    """Comma-separated floats; entries like 1/128 are allowed."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            num, _, den = item.partition("/")
            out.append(float(num) / float(den) if den else float(num))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"cannot read {item!r} as a number") from None
    if not out or not all(math.isfinite(v) for v in out):
        raise ConfigError(f"empty or non-finite range {text!r}")
    return tuple(out)


def parse_assignment(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"expected key=value, got {text!r}")
    return key.strip(), value.strip()


def solver_overrides(items: dict) -> dict:
    hints = _field_types(SolverConfig)
    out = {}
    for key, text in items.items():
        if key not in hints:
            raise ConfigError(f"unknown solver key {key!r}")
        out[key] = _convert(text, hints[key], key)
    return out


def model_overrides(items: dict) -> dict:
    hints = _field_types(ModelParams)
    out = {}
    for key, text in items.items():
        if key not in hints:
            raise ConfigError(f"unknown model key {key!r}")
        out[key] = _convert(text, hints[key], key)
    return out


def read_config(path) -> dict:
    """Returns {'solver': {...}, 'model': {...}, 'experiment': {...}} of raw strings."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    sections = {"solver": {}, "model": {}, "experiment": {}}
    for name in parser.sections():
        if name not in sections:
            raise ConfigError(f"unknown section [{name}]")
        sections[name] = dict(parser.items(name))
    for key in sections["experiment"]:
        if key not in _PLAN_KEYS:
            raise ConfigError(f"unknown experiment key {key!r}")
    return sections


def build_plan(kind: str, sections: dict, cli: dict) -> ExperimentPlan:
    """Merge config-file sections with command-line values (command line wins)."""
    exp = dict(sections.get("experiment", {}))
    overrides = solver_overrides(sections.get("solver", {}))
    if kind == "model-phase":
        overrides = model_overrides(sections.get("model", {}))
    sets = cli.get("set") or []
    for text in sets:
        key, value = parse_assignment(text)
        if kind == "model-phase":
            overrides.update(model_overrides({key: value}))
        else:
            overrides.update(solver_overrides({key: value}))
    kw = {"kind": kind, "overrides": overrides}
    for key in ("values", "amplitudes"):
        text = cli.get(key) or exp.get(key)
        if text:
            kw[key] = parse_values(text)
    for key, conv in (("seed", int), ("workers", int), ("bisection_steps", int), ("out_dir", str)):
        val = cli.get(key)
        if val is None and key in exp:
            try:
                val = conv(exp[key])
            except ValueError:
                raise ConfigError(f"{key}: cannot read {exp[key]!r}") from None
        if val is not None:
            kw[key] = val
    try:
        plan = ExperimentPlan(**kw)
        if kind != "model-phase":
            plan.solver_config()
        else:
            ModelParams(**overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return plan


def reference_page() -> str:
    """Every configurable key with its default, as an INI file."""
    lines = ["# rnslab configuration reference (defaults)", "", "[solver]"]
    for f in dataclasses.fields(SolverConfig):
        lines.append(f"{f.name} = {f.default}")
    lines += ["", "[model]"]
    for f in dataclasses.fields(ModelParams):
        lines.append(f"{f.name} = {f.default}")
    lines += ["", "[experiment]"]
    for f in dataclasses.fields(ExperimentPlan):
        if f.name in _PLAN_KEYS - {"kind"}:
            default = f.default if f.default is not dataclasses.MISSING else ""
            if isinstance(default, tuple):
                default = ", ".join(repr(x) for x in default)
            lines.append(f"{f.name} = {default}")
    return "\n".join(lines) + "\n"
