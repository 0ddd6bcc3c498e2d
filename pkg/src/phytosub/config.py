"""Global JSON configuration.

Example::

    {
      "gateway": {"endpoint": "https://.../v1/chat/completions", "batch_size": 100,
                  "rps_cap": 10, "max_retries": 3, "api_key_env": "PHYTOSUB_API_KEY"},
      "filter": {"model_id": "gpt-3.5-turbo-1106", "temperature": 0.5, "max_output_tokens": 10},
      "categorize": {"model_id": "gpt-4-0613", "max_output_tokens": 10},
      "enrich": {"model_id": "gpt-3.5-turbo-1106", "temperature": 0.5, "max_output_tokens": 10},
      "paths": {"clusters": "curated.csv", "phyto_table": "phyto.csv", "cache": "categories.json"}
    }

Unknown keys are rejected so that typos fail loudly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .gateway import GatewayConfig, GenerationParams


@dataclass(frozen=True)
class Paths:
    clusters: str | None = None
    phyto_table: str | None = None
    cache: str | None = None


@dataclass(frozen=True)
class GlobalConfig:
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    filter: GenerationParams = GenerationParams("gpt-3.5-turbo-1106", 0.5, 10)
    categorize: GenerationParams = GenerationParams("gpt-4-0613", 0.0, 10)
    enrich: GenerationParams = GenerationParams("gpt-3.5-turbo-1106", 0.5, 10)
    paths: Paths = field(default_factory=Paths)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


_GATEWAY_KEYS = {f.name for f in fields(GatewayConfig)}
_PARAM_KEYS = {"model_id", "temperature", "max_output_tokens"}


def _section(data: dict, name: str, allowed: set[str]) -> dict:
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return sec


def config_from_dict(data: dict[str, Any]) -> GlobalConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - {"gateway", "filter", "categorize", "enrich", "paths"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base = GlobalConfig()
    try:
        gateway = replace(base.gateway, **_section(data, "gateway", _GATEWAY_KEYS))
        filt = replace(base.filter, **_section(data, "filter", _PARAM_KEYS))
        cat_sec = _section(data, "categorize", _PARAM_KEYS)
        if cat_sec.get("temperature", 0) != 0:
            raise ConfigError("categorize temperature is fixed at 0")
        cat = replace(base.categorize, **cat_sec)
        enrich = replace(base.enrich, **_section(data, "enrich", _PARAM_KEYS))
        paths = Paths(**_section(data, "paths", {f.name for f in fields(Paths)}))
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return GlobalConfig(gateway, filt, cat, enrich, paths)


def load_config(path: str | Path | None) -> GlobalConfig:
    if path is None:
        return GlobalConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_dict(data)
