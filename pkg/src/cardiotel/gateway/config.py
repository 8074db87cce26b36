"""Gateway configuration: one JSON file, every key env-overridable.

Environment variables use the ``CARDIOTEL_`` prefix with the upper-cased
field name, e.g. ``CARDIOTEL_PORT=9200`` or ``CARDIOTEL_DATA_DIR=/var/lib``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

from ..errors import ConfigError

ENV_PREFIX = "CARDIOTEL_"


@dataclass
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 0                      # 0 = pick a free port
    data_dir: Path = Path("cardiotel-data")
    subscriber_buffer: int = 256       # queued events per subscriber before overflow
    session_ttl_ms: int = 24 * 3600 * 1000
    socket_sndbuf: int | None = None   # cap per-connection kernel buffering
    thresholds_path: Path | None = None
    static_dir: Path | None = None     # browser bundle served on plain GET
    token_store_path: Path | None = None

    def __post_init__(self):
        self.data_dir = Path(self.data_dir)
        if self.thresholds_path is not None:
            self.thresholds_path = Path(self.thresholds_path)
        if self.static_dir is not None:
            self.static_dir = Path(self.static_dir)
        self.token_store_path = Path(
            self.token_store_path if self.token_store_path is not None
            else self.data_dir / "tokens.json"
        )
        if self.subscriber_buffer < 1:
            raise ConfigError("subscriber_buffer must be >= 1")
        if self.session_ttl_ms <= 0:
            raise ConfigError("session_ttl_ms must be positive")

    @classmethod
    def from_file(cls, path: str | Path, environ: dict | None = None) -> "GatewayConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw, environ)

    @classmethod
    def from_dict(cls, raw: dict, environ: dict | None = None) -> "GatewayConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = set(raw) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values = dict(raw)
        environ = os.environ if environ is None else environ
        for name in known:
            env_key = ENV_PREFIX + name.upper()
            if env_key in environ:
                values[name] = environ[env_key]
        for name in ("port", "subscriber_buffer", "session_ttl_ms", "socket_sndbuf"):
            if values.get(name) is not None:
                try:
                    values[name] = int(values[name])
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"config key {name} must be an integer") from exc
        return cls(**values)
