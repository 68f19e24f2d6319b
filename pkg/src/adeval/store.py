"""Question store: gold questions, segments, and fixed baseline toplines.

The store is the server-side dataset package. Toplines (dialog-only CC and
human-track CC per question kind) are computed once when the store is built
and then treated as constants, so every submission is scored against the
same baselines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .ingest import dump_json, mcqa_from_file_dict, mcqa_to_file_dict
from .model import MCQA, VideoSegment


@dataclass(frozen=True)
class Toplines:
    cc_dialog: float
    cc_h: float

    def to_dict(self) -> dict:
        return {"cc_dialog": self.cc_dialog, "cc_h": self.cc_h}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Toplines":
        return cls(cc_dialog=float(d["cc_dialog"]), cc_h=float(d["cc_h"]))


@dataclass(frozen=True)
class QuestionStore:
    dataset_id: str
    segments: tuple[VideoSegment, ...]
    questions: tuple[MCQA, ...]
    toplines: Mapping[str, Toplines] = field(default_factory=dict)
    movie_titles: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        seg_ids = [s.segment_id for s in self.segments]
        if len(set(seg_ids)) != len(seg_ids):
            raise ValueError("duplicate segment_id in store")
        known = set(seg_ids)
        for q in self.questions:
            if q.segment_id not in known:
                raise ValueError(f"question {q.qid} references unknown segment")

    def segment(self, segment_id: str) -> VideoSegment:
        for s in self.segments:
            if s.segment_id == segment_id:
                return s
        raise KeyError(segment_id)

    def segment_ids(self) -> tuple[str, ...]:
        return tuple(s.segment_id for s in self.segments)

    def questions_for(self, segment_id: str) -> tuple[MCQA, ...]:
        return tuple(q for q in self.questions if q.segment_id == segment_id)

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "store.json").write_text(
            dump_json(
                {
                    "dataset_id": self.dataset_id,
                    "toplines": {k: t.to_dict() for k, t in self.toplines.items()},
                    "movie_titles": dict(self.movie_titles),
                }
            ),
            encoding="utf-8",
        )
        (directory / "segments.json").write_text(
            dump_json([s.to_dict() for s in self.segments]), encoding="utf-8"
        )
        (directory / "questions.json").write_text(
            dump_json([mcqa_to_file_dict(q) for q in self.questions]),
            encoding="utf-8",
        )

    @classmethod
    def load(cls, directory: str | Path) -> "QuestionStore":
        directory = Path(directory)
        meta = json.loads((directory / "store.json").read_text(encoding="utf-8"))
        segments = tuple(
            VideoSegment.from_dict(rec)
            for rec in json.loads(
                (directory / "segments.json").read_text(encoding="utf-8")
            )
        )
        questions = tuple(
            mcqa_from_file_dict(rec)
            for rec in json.loads(
                (directory / "questions.json").read_text(encoding="utf-8")
            )
        )
        return cls(
            dataset_id=str(meta["dataset_id"]),
            segments=segments,
            questions=questions,
            toplines={
                k: Toplines.from_dict(v) for k, v in meta.get("toplines", {}).items()
            },
            movie_titles={
                str(k): str(v) for k, v in meta.get("movie_titles", {}).items()
            },
        )
