"""Scenario files: YAML mappings whose keys are ScenarioConfig field names.

The canonical scenarios ship as package data next to this module.
"""

from __future__ import annotations

import dataclasses
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import yaml

from coherence.errors import InvalidConfig, ParseError
from coherence.sim import ScenarioConfig

REQUIRED = ("name", "n", "m", "artifact_tokens", "S", "V", "strategy", "seed")
CANONICAL = ("scenario_a", "scenario_b", "scenario_c", "scenario_d")
POINTER = "pointer"

_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
_INT_FIELDS = {"n", "m", "artifact_tokens", "S", "K", "ttl_steps", "k",
               "invalidation_overhead_tokens", "lease_ttl_ticks", "runs", "seed"}
_FLOAT_FIELDS = {"V", "p", "duplicate_probability"}
_BOOL_FIELDS = {"charge_version_updates", "reorder"}
_STR_FIELDS = {"name", "strategy", "access_model"}


def _key_lines(text: str, path) -> dict:
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise ParseError(f"invalid YAML: {problem}", path, line) from None
    if node is None:
        raise ParseError("empty scenario file", path, 1)
    if not isinstance(node, yaml.MappingNode):
        raise ParseError("top level must be a mapping of field: value", path,
                         node.start_mark.line + 1)
    lines = {}
    for key, _ in node.value:
        if key.value in lines:
            raise ParseError("duplicate field", path, key.start_mark.line + 1, key.value)
        lines[key.value] = key.start_mark.line + 1
    return lines


def _check_type(name: str, value, path, line):
    def bad(kind):
        return ParseError(f"expected {kind}, got {value!r}", path, line, name)

    if name in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad("an integer")
    elif name in _FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad("a number")
        return float(value)
    elif name in _BOOL_FIELDS:
        if not isinstance(value, bool):
            raise bad("true or false")
    elif name in _STR_FIELDS:
        if not isinstance(value, str):
            raise bad("a string")
    return value


def parse_scenario(text: str, path: Optional[Union[str, Path]] = None) -> ScenarioConfig:
    lines = _key_lines(text, path)
    data = yaml.safe_load(text)
    for name in data:
        if name not in _FIELDS:
            raise ParseError("unknown field", path, lines.get(name), name)
    for name in REQUIRED:
        if name not in data:
            raise ParseError("missing required field", path, None, name)
    values = {name: _check_type(name, value, path, lines.get(name))
              for name, value in data.items()}
    try:
        return ScenarioConfig(**values)
    except InvalidConfig as exc:
        field = next((f for f in _FIELDS if f" {f} " in f" {exc} ".replace(":", " ")), None)
        raise ParseError(str(exc), path, lines.get(field), field) from None


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read scenario file: {exc.strerror}", path) from None
    return parse_scenario(text, path)


def builtin_path(name: str) -> Path:
    return Path(str(resources.files(__name__).joinpath(f"{name}.yaml")))


def load_builtin(name: str) -> ScenarioConfig:
    return load_scenario(builtin_path(name))


def load_directory(directory: Union[str, Path, None] = None) -> dict:
    """Canonical scenarios plus the pointer scenario, from ``directory`` or the package."""
    names = CANONICAL + (POINTER,)
    if directory is None:
        return {name: load_builtin(name) for name in names}
    directory = Path(directory)
    return {name: load_scenario(directory / f"{name}.yaml") for name in names}
