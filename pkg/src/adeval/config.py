"""Layered configuration: defaults, then a YAML file, then CLI overrides.

The YAML file carries one section per subsystem. Unknown sections or keys
raise instead of being silently dropped, since a typo in a tolerance would
otherwise pass unnoticed. Secrets stay out of the file: only the *names* of
environment variables appear here.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .gateway import ProviderConfig

DEFAULT_SWEEP = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


@dataclass(frozen=True)
class AlignmentConfig:
    dialogue_tag: str = "dialogue"
    ad_tag: str = "AD"
    batch_size: int = 40
    strong_match: float = 0.6
    skip_penalty: float = 0.45
    min_anchors: int = 5
    residual_tol_s: float = 5.0
    min_piece: int = 5
    buffer_s: float = 1.0
    threshold: float = 0.5


@dataclass(frozen=True)
class AnalysisConfig:
    max_n: int = 4
    sweep_thresholds: tuple[float, ...] = DEFAULT_SWEEP


@dataclass(frozen=True)
class AnsweringConfig:
    context_type: str = "DialogPlusAD"
    nu_style: str = "cmd"


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    rate_limit: int = 3
    journal_path: str = "submissions.jsonl"
    # Name of the env var holding comma-separated client tokens.
    tokens_env: str = "ADEVAL_API_TOKENS"


@dataclass(frozen=True)
class AppConfig:
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    alignment: AlignmentConfig = field(default_factory=AlignmentConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    answering: AnsweringConfig = field(default_factory=AnsweringConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)


_SECTIONS = {
    "provider": ProviderConfig,
    "alignment": AlignmentConfig,
    "analysis": AnalysisConfig,
    "answering": AnsweringConfig,
    "service": ServiceConfig,
}


def _build_section(cls: type, values: Mapping[str, Any], section: str) -> Any:
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ValueError(f"unknown keys in [{section}]: {', '.join(unknown)}")
    coerced = dict(values)
    if "sweep_thresholds" in coerced:
        coerced["sweep_thresholds"] = tuple(coerced["sweep_thresholds"])
    return cls(**coerced)


def load_config(path: str | Path | None = None) -> AppConfig:
    """Read the YAML file, or return pure defaults when path is None."""
    if path is None:
        return AppConfig()
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if raw is None:
        return AppConfig()
    if not isinstance(raw, dict):
        raise ValueError("config root must be a mapping of sections")
    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        raise ValueError(f"unknown config sections: {', '.join(unknown)}")
    kwargs = {}
    for section, cls in _SECTIONS.items():
        values = raw.get(section, {})
        if not isinstance(values, dict):
            raise ValueError(f"section [{section}] must be a mapping")
        kwargs[section] = _build_section(cls, values, section)
    return AppConfig(**kwargs)


def override(config: AppConfig, section: str, **changes: Any) -> AppConfig:
    """Return a copy of config with some fields of one section replaced."""
    if section not in _SECTIONS:
        raise ValueError(f"unknown config section {section!r}")
    present = {k: v for k, v in changes.items() if v is not None}
    if not present:
        return config
    updated = dataclasses.replace(getattr(config, section), **present)
    return dataclasses.replace(config, **{section: updated})
