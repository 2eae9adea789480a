"""Application configuration: flat key=value files with flag overrides.

Precedence is flag > file > default; the PODFORGE_CONFIG environment
variable supplies the file path when --config is not given.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import asdict, dataclass, fields

from .tokens import DEFAULT_SFT_TEMPLATE

ENV_CONFIG_VAR = "PODFORGE_CONFIG"


@dataclass
class AppConfig:
    sample_rate: int = 16000
    chunk_s: float = 60.0
    min_segment_s: float = 5.0
    max_segment_s: float = 60.0
    mos_threshold_pipeline: float = 3.8
    mos_threshold_decoder: float = 4.5
    codebook_size: int = 1024
    token_rate: int = 25
    ngram_order: int = 3
    backoff_alpha: float = 0.4
    workers: int = os.cpu_count() or 1
    generation_cap_tokens: int = 1500
    temperature: float = 1.0
    http_bind: str = "127.0.0.1:8080"
    backend: str = ""
    seed: int = 0
    sft_template: str = DEFAULT_SFT_TEMPLATE

    def __post_init__(self):
        for name in ("mos_threshold_pipeline", "mos_threshold_decoder"):
            value = getattr(self, name)
            if not 1.0 <= value <= 5.0:
                raise ValueError(f"{name} must lie in [1, 5], got {value}")
        for name in ("sample_rate", "codebook_size", "token_rate", "ngram_order",
                     "workers", "generation_cap_tokens"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def digest(self) -> str:
        payload = "\n".join(f"{k}={v!r}" for k, v in sorted(asdict(self).items()))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for f in fields(self):
                fh.write(f"{f.name}={getattr(self, f.name)}\n")


def _coerce(field_type, raw: str):
    if field_type is int:
        return int(raw)
    if field_type is float:
        return float(raw)
    return raw


def load_config(path=None, overrides: dict | None = None) -> AppConfig:
    """Build the effective config from defaults, an optional file, and overrides."""
    values: dict = {}
    if path is None:
        path = os.environ.get(ENV_CONFIG_VAR) or None
    field_types = {f.name: f.type for f in fields(AppConfig)}
    concrete = {"int": int, "float": float, "str": str}
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                # only the trailing newline is stripped from the value:
                # string fields (the SFT template) carry meaningful spaces
                key, _, raw = line.rstrip("\n").partition("=")
                key = key.strip()
                if key not in field_types:
                    raise ValueError(f"unknown config key {key!r}")
                values[key] = _coerce(concrete.get(field_types[key], str), raw)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return AppConfig(**values)
