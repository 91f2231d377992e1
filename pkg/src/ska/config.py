"""Workbench configuration, loadable from a flat TOML file."""
from __future__ import annotations

import sys
from dataclasses import dataclass, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ValidationError

DEFAULT_CONFIG_FILE = "ska.toml"


@dataclass
class WorkbenchConfig:
    participants: int = 3  # expected round size when participants are not listed
    qualification_threshold: float = 0.6
    min_section_chars: int = 200
    database: str = "ska.db"

    def __post_init__(self):
        if self.participants < 2:
            raise ValidationError("participants must be >= 2")
        if not 0 < self.qualification_threshold <= 1:
            raise ValidationError("qualification_threshold must be in (0, 1]")
        if self.min_section_chars < 0:
            raise ValidationError("min_section_chars must be >= 0")


def load_config(path: str | Path | None = None) -> WorkbenchConfig:
    """Read config from an explicit path, or ./ska.toml when present.

    Unknown keys are rejected to catch typos early.
    """
    if path is None:
        default = Path(DEFAULT_CONFIG_FILE)
        if not default.exists():
            return WorkbenchConfig()
        path = default
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ValidationError(f"cannot read config '{path}': {exc}") from exc
    known = {f.name for f in fields(WorkbenchConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValidationError(f"unknown config keys in '{path}': {', '.join(unknown)}")
    return WorkbenchConfig(**data)
