"""
Configuration Profile Model
Layered configuration for EDNN runs: defaults, YAML file, environment, command line
Every resolved value remembers where it came from so runs can echo their effective setup
"""
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Type, TypeVar
import os

import yaml
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ednn.shared.models.errors import ConfigError

ModelT = TypeVar("ModelT", bound=BaseModel)

ENV_PREFIX = "EDNN_"

# Sections a YAML config file may group keys under; they are flattened on load.
FILE_SECTIONS = ("model", "train", "dataset", "runtime")


class ConfigSource(Enum):
    """Sources of configuration data, lowest precedence first"""
    DEFAULT = "default"
    CONFIG_FILE = "file"
    ENVIRONMENT_VARIABLE = "env_var"
    COMMAND_LINE = "cli"


@dataclass
class ConfigValue:
    """A single resolved configuration value with its provenance"""

    key: str
    value: Any
    source: ConfigSource = ConfigSource.DEFAULT
    last_updated: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    audit_trail: list = field(default_factory=list)

    def record_update(self, new_value: Any, source: ConfigSource):
        """Override the value, keeping the replaced value in the audit trail"""
        self.audit_trail.append({"previous_value": self.value, "source": self.source.value})
        self.value = new_value
        self.source = source
        self.last_updated = datetime.now(timezone.utc)

    def to_dict(self) -> Dict[str, Any]:
        value = str(self.value) if isinstance(self.value, Path) else self.value
        return {"key": self.key, "value": value, "source": self.source.value}


class RuntimeSettings(BaseModel):
    """Process-level knobs that are not part of any experiment"""

    model_config = ConfigDict(extra="ignore")

    threads: int = Field(1, ge=1)
    log_level: str = "INFO"
    log_format: str = "console"

    @field_validator("log_format")
    @classmethod
    def _known_format(cls, value: str) -> str:
        if value not in ("console", "json"):
            raise ValueError("log_format must be 'console' or 'json'")
        return value


def validated(model_cls: Type[ModelT], data: Mapping[str, Any]) -> ModelT:
    """Build a pydantic model, converting validation failures to ConfigError"""
    try:
        return model_cls.model_validate(dict(data))
    except ValidationError as exc:
        fields = [".".join(str(part) for part in err["loc"]) for err in exc.errors()]
        raise ConfigError(
            f"Invalid {model_cls.__name__} configuration",
            {"fields": fields, "details": [err["msg"] for err in exc.errors()]},
        ) from exc


class ConfigLayers:
    """Resolves configuration keys across defaults, file, environment and flags"""

    def __init__(self, defaults: Optional[Mapping[str, Any]] = None):
        self.values: Dict[str, ConfigValue] = {}
        for key, value in (defaults or {}).items():
            self.values[key] = ConfigValue(key=key, value=value)

    def set(self, key: str, value: Any, source: ConfigSource):
        """Set a value from a source; None means the source did not provide it"""
        if value is None:
            return
        current = self.values.get(key)
        if current is None:
            self.values[key] = ConfigValue(key=key, value=value, source=source)
        else:
            current.record_update(value, source)

    def load_file(self, path: Path):
        """Load a YAML mapping; known sections are flattened into top-level keys"""
        try:
            with open(path, "r", encoding="utf-8") as handle:
                data = yaml.safe_load(handle) or {}
        except OSError as exc:
            raise ConfigError("Cannot read config file", {"path": str(path)}) from exc
        except yaml.YAMLError as exc:
            raise ConfigError("Config file is not valid YAML", {"path": str(path)}) from exc

        if not isinstance(data, dict):
            raise ConfigError("Config file must contain a key-value mapping",
                              {"path": str(path)})

        for key, value in data.items():
            if key in FILE_SECTIONS and isinstance(value, dict):
                for inner_key, inner_value in value.items():
                    self.set(_normalize_key(inner_key), inner_value, ConfigSource.CONFIG_FILE)
            else:
                self.set(_normalize_key(key), value, ConfigSource.CONFIG_FILE)

    def load_environment(self, env: Optional[Mapping[str, str]] = None,
                         dotenv_path: Optional[Path] = None):
        """Apply EDNN_* variables from a .env file and the process environment"""
        merged: Dict[str, Optional[str]] = {}
        dotenv_file = dotenv_path or Path(".env")
        if dotenv_file.is_file():
            merged.update(dotenv_values(dotenv_file))
        merged.update(os.environ if env is None else env)

        for name, raw in merged.items():
            if not name.startswith(ENV_PREFIX) or raw is None:
                continue
            key = _normalize_key(name[len(ENV_PREFIX):].lower())
            self.set(key, raw, ConfigSource.ENVIRONMENT_VARIABLE)

    def load_flags(self, flags: Mapping[str, Any]):
        for key, value in flags.items():
            self.set(key, value, ConfigSource.COMMAND_LINE)

    def get(self, key: str, default: Any = None) -> Any:
        config = self.values.get(key)
        return config.value if config else default

    def source_of(self, key: str) -> Optional[ConfigSource]:
        config = self.values.get(key)
        return config.source if config else None

    def as_dict(self) -> Dict[str, Any]:
        return {key: config.value for key, config in self.values.items()}

    def to_dict(self) -> Dict[str, Any]:
        return {key: config.to_dict() for key, config in sorted(self.values.items())}


def _normalize_key(key: str) -> str:
    return str(key).strip().replace("-", "_")
