"""Service configuration: one versioned JSON file plus env overrides.

Relative paths are resolved against the config file's directory.
Environment variables override paths and ports only:
TEXTMENTOR_DATA_DIR, TEXTMENTOR_HOST, TEXTMENTOR_PORT,
TEXTMENTOR_RELAY_PORT, TEXTMENTOR_BOT_PORT, TEXTMENTOR_ANALYSIS_PORT.
"""

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

CONFIG_VERSION = 1


@dataclass
class ServiceConfig:
    data_dir: Path
    host: str = "127.0.0.1"
    port: int = 8600
    relay_host: str = "127.0.0.1"
    relay_port: int = 0
    bot_listener_port: int = 0
    analysis_listener_port: int = 0
    issuer_public_key_file: Path = None
    issuer_private_key_file: Path = None
    queue_depth: int = 16
    pipeline_workers: int = 2
    route_retries: int = 3
    route_backoff_seconds: float = 0.05
    max_upload_bytes: int = 1_048_576
    default_assignment_id: str = ""
    transport: str = "tcp"  # "tcp" or "inprocess"

    def validate(self):
        if self.transport not in ("tcp", "inprocess"):
            raise ConfigError(f"unknown transport {self.transport!r}")
        if self.queue_depth < 1 or self.pipeline_workers < 1:
            raise ConfigError("queue_depth and pipeline_workers must be positive")
        if self.issuer_public_key_file is None:
            raise ConfigError("issuer_public_key_file is required")
        if not Path(self.issuer_public_key_file).exists():
            raise ConfigError(f"issuer public key file not found: {self.issuer_public_key_file}")
        return self


def _resolve(base: Path, value) -> Path:
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def load_config(path) -> ServiceConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict) or data.get("version") != CONFIG_VERSION:
        raise ConfigError(f"{path}: expected a config object with version {CONFIG_VERSION}")

    base = path.parent
    env = os.environ
    try:
        relay = data.get("relay", {})
        config = ServiceConfig(
            data_dir=_resolve(base, env.get("TEXTMENTOR_DATA_DIR", data.get("data_dir", "data"))),
            host=env.get("TEXTMENTOR_HOST", data.get("host", "127.0.0.1")),
            port=int(env.get("TEXTMENTOR_PORT", data.get("port", 8600))),
            relay_host=relay.get("host", "127.0.0.1"),
            relay_port=int(env.get("TEXTMENTOR_RELAY_PORT", relay.get("port", 0))),
            bot_listener_port=int(
                env.get("TEXTMENTOR_BOT_PORT", data.get("bot_listener", {}).get("port", 0))
            ),
            analysis_listener_port=int(
                env.get(
                    "TEXTMENTOR_ANALYSIS_PORT",
                    data.get("analysis_listener", {}).get("port", 0),
                )
            ),
            issuer_public_key_file=_resolve(base, data["issuer_public_key_file"]),
            issuer_private_key_file=(
                _resolve(base, data["issuer_private_key_file"])
                if data.get("issuer_private_key_file")
                else None
            ),
            queue_depth=int(data.get("queue_depth", 16)),
            pipeline_workers=int(data.get("pipeline_workers", 2)),
            route_retries=int(data.get("route_retries", 3)),
            route_backoff_seconds=float(data.get("route_backoff_seconds", 0.05)),
            max_upload_bytes=int(data.get("max_upload_bytes", 1_048_576)),
            default_assignment_id=data.get("default_assignment_id", ""),
            transport=data.get("transport", "tcp"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: invalid config: {exc}") from None
    return config.validate()


def write_config(path, data: dict):
    data = {"version": CONFIG_VERSION, **data}
    Path(path).write_text(
        json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
