"""TOML / JSON configuration.

Recognised tables: ``[risk]``, ``[weights]``, ``[planner]``, ``[service]``
and ``[braking]``; keys match the dataclass fields. Unknown keys are
rejected. Weight overrides must respect the participant ordering.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from .braking import BrakingConfig
from .edge_service import ServiceConfig
from .planner import PlannerConfig
from .risk_model import RiskConfig
from .scenario import ConfigError, default_weights

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SECTIONS = ("risk", "weights", "planner", "service", "braking")


@dataclass(frozen=True)
class Settings:
    risk: RiskConfig = field(default_factory=RiskConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    braking: BrakingConfig = field(default_factory=BrakingConfig)


def _apply(obj, section: str, values: Mapping[str, Any]):
    names = {f.name for f in fields(obj)} - {"weights"}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {', '.join(sorted(unknown))}")
    try:
        return replace(obj, **values)
    except TypeError as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def settings_from_mapping(doc: Mapping[str, Any]) -> Settings:
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
    weights = default_weights()
    if "weights" in doc:
        weights = weights.with_overrides(doc["weights"])
    risk = _apply(RiskConfig(weights=weights), "risk", doc.get("risk", {}))
    planner = _apply(PlannerConfig(), "planner", doc.get("planner", {}))
    service = _apply(ServiceConfig(), "service", doc.get("service", {}))
    braking = _apply(BrakingConfig(), "braking", doc.get("braking", {}))
    return Settings(risk, planner, service, braking)


def load_settings(path: str | Path | None) -> Settings:
    if path is None:
        return Settings()
    path = Path(path)
    raw = path.read_bytes()
    try:
        if path.suffix.lower() == ".toml":
            doc = tomllib.loads(raw.decode("utf-8"))
        else:
            doc = json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config: {exc}", source=str(path)) from None
    try:
        return settings_from_mapping(doc)
    except ConfigError as exc:
        raise ConfigError(exc.detail, source=str(path)) from None
