"""Manifest records: one utterance's lifecycle through the pipeline.

Persisted as JSONL, one object per line, keys matching the field names.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import Optional

from ..errors import IoFailure

STAGES = ("chunked", "cleaned", "segmented", "scored", "speaker_filtered", "transcribed")
_STAGE_ORDER = {name: i for i, name in enumerate(STAGES)}


@dataclass
class ManifestRecord:
    id: str
    source_path: str
    start_s: float
    end_s: float
    duration_s: float
    sample_rate: int
    stage: str
    mos: Optional[float] = None
    speaker_count: Optional[int] = None
    speaker_id: Optional[str] = None
    text: Optional[str] = None

    def __post_init__(self):
        if self.stage not in _STAGE_ORDER:
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.end_s <= self.start_s:
            raise ValueError("end_s must be greater than start_s")
        if abs(self.duration_s - (self.end_s - self.start_s)) > 1e-6:
            raise ValueError("duration_s must equal end_s - start_s")
        if self.mos is not None and not 1.0 <= self.mos <= 5.0:
            raise ValueError(f"mos {self.mos} outside [1, 5]")

    def advance(self, stage: str) -> None:
        """Move to a later stage; transitions must be monotone."""
        if _STAGE_ORDER[stage] < _STAGE_ORDER[self.stage]:
            raise ValueError(f"cannot move from {self.stage!r} back to {stage!r}")
        self.stage = stage

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ManifestRecord":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


def write_manifest(records, path) -> int:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return len(records)


def read_manifest(path) -> list[ManifestRecord]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line for line in fh if line.strip()]
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return [ManifestRecord.from_dict(json.loads(line)) for line in lines]
