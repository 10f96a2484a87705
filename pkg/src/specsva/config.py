"""Pipeline configuration: a flat TOML key/value file plus CLI overrides."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .extraction import DEFAULT_K, DEFAULT_M
from .gateway import MODES


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    m: int = DEFAULT_M
    k: int = DEFAULT_K
    temperature: float = 0.7
    clock: Optional[str] = None
    reset: Optional[str] = None
    reset_active_low: Optional[bool] = None
    semantic_regularization: bool = True
    formalization: bool = True
    decomposition: bool = True
    llm_mode: str = "live"
    transcript: Optional[str] = None
    mapping: Optional[str] = None
    workers: int = 1
    unroll_depth_margin: int = 4
    unroll_depth: Optional[int] = None
    include_conditions: bool = True
    damping: float = 0.85
    tolerance: float = 1e-9
    top_n: int = 10
    syntax_checker: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.m < 1 or self.k < 1:
            raise ConfigError("m and k must be positive")
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigError("temperature must lie in [0, 2]")
        if self.llm_mode not in MODES:
            raise ConfigError(f"llm_mode must be one of {MODES}")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if not 0 < self.damping < 1:
            raise ConfigError("damping must lie in (0, 1)")
        if self.unroll_depth_margin < 0:
            raise ConfigError("unroll_depth_margin must be non-negative")

    @classmethod
    def from_file(cls, path, **overrides) -> "PipelineConfig":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        return cls.from_mapping({**data, **overrides}, base=Path(path).parent)

    @classmethod
    def from_mapping(cls, data: dict, base: Optional[Path] = None) -> "PipelineConfig":
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        data = {k: v for k, v in data.items() if v is not None}
        if base is not None:
            for key in ("transcript", "mapping"):
                if key in data and not Path(data[key]).is_absolute():
                    data[key] = str(base / data[key])
        return cls(**data)

    def snapshot(self) -> dict:
        """Config as recorded in artifacts; file paths reduced to base names
        so output does not depend on where the run happened."""
        snap = asdict(self)
        for key in ("transcript", "mapping"):
            if snap[key] is not None:
                snap[key] = Path(snap[key]).name
        return snap

    def digest(self) -> str:
        blob = json.dumps(self.snapshot(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()
