"""Configuration module using Pydantic Settings and versioned YAML run files."""

from __future__ import annotations

import logging
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import yaml
from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings

from rlvr_lab.trainer.config import TrainConfig

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PRESETS = ("desk_addition", "desk_mixed", "full_scale")


class LabSettings(BaseSettings):
    """Process-level settings read from the environment."""

    run_root: str = Field("./runs", alias="RLVR_RUN_ROOT")
    log_level: str = Field("INFO", alias="RLVR_LOG_LEVEL")
    rollout_workers: int = Field(1, alias="RLVR_ROLLOUT_WORKERS")
    # defaults to a SQLite file inside the run root
    ledger_url: Optional[str] = Field(None, alias="RLVR_LEDGER_URL")

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "extra": "ignore",
        "populate_by_name": True,
    }

    def resolved_ledger_url(self, run_root: Optional[str] = None) -> str:
        if self.ledger_url:
            return self.ledger_url
        root = Path(run_root or self.run_root)
        return f"sqlite:///{(root / 'ledger.db').as_posix()}"


def load_settings() -> LabSettings:
    """Load and validate settings from environment variables."""
    return LabSettings()


# Global settings instance
try:
    settings = load_settings()
except Exception as e:
    import warnings
    warnings.warn(f"Settings loading failed: {e}. Using defaults.", UserWarning)
    settings = LabSettings.model_construct(
        run_root="./runs",
        log_level="INFO",
        rollout_workers=1,
        ledger_url=None,
    )


class ConfigError(ValueError):
    """Invalid run configuration, located to a file and line when possible."""

    def __init__(self, message: str, file: Optional[str] = None, line: Optional[int] = None):
        self.message = message
        self.file = file
        self.line = line
        where = file or "<config>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")


def _node_line(root: Optional[yaml.Node], loc: Sequence[Any]) -> Optional[int]:
    """1-based line of the deepest node along ``loc`` that exists in the document."""
    node = root
    line = None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            match = next(((k, v) for k, v in node.value if str(k.value) == str(key)), None)
            if match is None:
                break
            line = match[0].start_mark.line + 1
            node = match[1]
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


def _set_dotted(data: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    cursor = data
    for key in keys[:-1]:
        nxt = cursor.get(key)
        if not isinstance(nxt, dict):
            nxt = {}
            cursor[key] = nxt
        cursor = nxt
    cursor[keys[-1]] = value


def parse_override(item: str) -> tuple[str, Any]:
    """Split ``a.b=value``; the value is read as a YAML scalar or flow collection."""
    key, sep, raw = item.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {item!r} is not of the form key=value", file="--set")
    try:
        return key.strip(), yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"override {item!r} has an unreadable value ({e})", file="--set") from e


def resolve_config_source(source: str) -> tuple[str, str]:
    """Return (display name, YAML text) for a file path or preset name."""
    path = Path(source)
    if path.is_file():
        return str(path), path.read_text(encoding="utf-8")
    if source in PRESETS:
        text = resources.files("rlvr_lab").joinpath("presets", f"{source}.yaml").read_text(encoding="utf-8")
        return f"preset:{source}", text
    raise ConfigError(f"config not found (no such file or preset among {', '.join(PRESETS)})", file=source)


def load_run_config(
    source: Optional[str] = None,
    overrides: Sequence[str] = (),
    flags: Optional[Mapping[str, Any]] = None,
) -> TrainConfig:
    """Build a validated TrainConfig.

    Precedence, highest first: ``flags`` (dotted keys from CLI options),
    ``overrides`` (``key=value`` strings), the file, model defaults.

    Raises:
        ConfigError: unreadable file, YAML syntax error, wrong schema
            version, unknown key or invalid value, with the file and line
            of the offending entry.
    """
    name, text = ("<defaults>", "schema_version: 1\n") if source is None else resolve_config_source(source)

    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(e, 'problem', e)}", name,
                          mark.line + 1 if mark else None) from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", name, 1)

    version = data.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version must be {SCHEMA_VERSION}, got {version!r}", name,
            _node_line(root, ["schema_version"]) or 1,
        )

    overridden: list[str] = []
    for item in overrides:
        key, value = parse_override(item)
        _set_dotted(data, key, value)
        overridden.append(key)
    for key, value in (flags or {}).items():
        if value is not None:
            _set_dotted(data, key, value)
            overridden.append(key)

    try:
        cfg = TrainConfig.model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        loc = [k for k in err["loc"]]
        dotted = ".".join(str(k) for k in loc)
        message = f"{dotted or '<root>'}: {err['msg']}"
        if any(dotted == k or dotted.startswith(k + ".") for k in overridden):
            raise ConfigError(message, "--set") from e
        raise ConfigError(message, name, _node_line(root, loc)) from e

    logger.debug("Loaded run config from %s with %d override(s)", name, len(overridden))
    return cfg
