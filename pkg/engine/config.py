"""
Scenario configuration files.

A config file is a flat YAML mapping with namespaced keys::

    budget.tau_db: -5
    channel.shadowing: true
    procedure.kind: iterative
    procedure.ue_beams: 4
    run.trials: 50000
    run.distances: [35, 95]

Missing keys take the simulation defaults (1 GHz, 30/23 dBm, NF 5 dB,
28 GHz, tau -5 dB, BS 8x8, 10 us minimum PSS, 5 % overhead). Parse
problems report the line; validation problems name the key.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml
from pydantic import ValidationError

from engine.models import ScenarioConfig

logger = logging.getLogger(__name__)

NAMESPACES = ("budget", "channel", "procedure", "run")


class ConfigError(ValueError):
    """Config file could not be parsed or failed validation."""

    def __init__(
        self, message: str, *, key: Optional[str] = None, line: Optional[int] = None
    ) -> None:
        self.key = key
        self.line = line
        prefix = ""
        if line is not None:
            prefix = f"line {line}: "
        if key is not None:
            prefix += f"{key}: "
        super().__init__(prefix + message)


# ------------------------------------------------------------------
# Flat <-> nested
# ------------------------------------------------------------------


def _unflatten(flat: Mapping[str, Any]) -> dict[str, dict[str, Any]]:
    nested: dict[str, dict[str, Any]] = {ns: {} for ns in NAMESPACES}
    for key, value in flat.items():
        if not isinstance(key, str) or "." not in key:
            raise ConfigError(
                f"expected a namespaced key ({', '.join(n + '.*' for n in NAMESPACES)})",
                key=str(key),
            )
        namespace, name = key.split(".", 1)
        if namespace not in NAMESPACES:
            raise ConfigError(f"unknown namespace '{namespace}'", key=key)
        if isinstance(value, dict):
            raise ConfigError("expected a scalar or a list, got a mapping", key=key)
        nested[namespace][name] = value
    return nested


def flatten(scn: ScenarioConfig) -> dict[str, Any]:
    """Every resolved setting under its ``namespace.name`` key."""
    dumped = scn.model_dump(mode="json")
    return {
        f"{namespace}.{name}": value
        for namespace in NAMESPACES
        for name, value in dumped[namespace].items()
    }


def _validate(flat: Mapping[str, Any]) -> ScenarioConfig:
    nested = _unflatten(flat)
    try:
        return ScenarioConfig.model_validate(nested)
    except ValidationError as e:
        err = e.errors()[0]
        key = ".".join(str(part) for part in err["loc"]) or None
        message = err["msg"].removeprefix("Value error, ")
        raise ConfigError(message, key=key) from e


# ------------------------------------------------------------------
# Public API
# ------------------------------------------------------------------


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a config document."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None) or getattr(e, "context_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigError(f"parse error: {problem}", line=line) from e

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of namespaced keys", line=1)
    return _validate(data)


def load_config(path: str | Path) -> ScenarioConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    scn = parse_config(p.read_text(encoding="utf-8"))
    logger.debug("Loaded config from %s", p)
    return scn


def emit_config(scn: ScenarioConfig) -> str:
    """Flat YAML rendering; ``parse_config(emit_config(c)) == c``."""
    return yaml.safe_dump(flatten(scn), sort_keys=True, default_flow_style=None)


def apply_overrides(scn: ScenarioConfig, overrides: Mapping[str, Any]) -> ScenarioConfig:
    """Merge flat ``namespace.name`` overrides and re-validate."""
    if not overrides:
        return scn
    merged = flatten(scn)
    merged.update(overrides)
    return _validate(merged)
