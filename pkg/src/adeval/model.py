"""Core domain types.

Every type is an immutable value: construction plus validation only, no
behavior. ``validate`` returns the list of violated invariants instead of
raising, so callers can report all problems at once.

Times are seconds in double precision throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Sequence

OPTION_LABELS = ("A", "B", "C", "D", "E")


class LineKind(str, Enum):
    AD = "AD"
    DIALOGUE = "Dialogue"
    UNCLASSIFIED = "Unclassified"


class QuestionKind(str, Enum):
    VA = "VA"
    NU = "NU"


class FromContext(str, Enum):
    """Whether an answer's rationale was grounded in the provided context."""

    TRUE = "True"
    FALSE = "False"
    UNPARSED = "Unparsed"
    NOT_APPLICABLE = "n/a"


@dataclass(frozen=True)
class TranscriptLine:
    """One timestamped sentence of a transcribed audio track."""

    index: int
    start_s: float
    end_s: float
    text: str
    kind: LineKind = LineKind.UNCLASSIFIED

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "text": self.text,
            "kind": self.kind.value,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TranscriptLine":
        return cls(
            index=int(d["index"]),
            start_s=float(d["start_s"]),
            end_s=float(d["end_s"]),
            text=str(d["text"]),
            kind=LineKind(d.get("kind", "Unclassified")),
        )


@dataclass(frozen=True)
class Track:
    """All transcribed lines of one audio source of one movie."""

    movie_id: str
    source_id: str
    lines: tuple[TranscriptLine, ...]

    def ad_lines(self) -> tuple[TranscriptLine, ...]:
        return tuple(ln for ln in self.lines if ln.kind is LineKind.AD)

    def dialogue_lines(self) -> tuple[TranscriptLine, ...]:
        return tuple(ln for ln in self.lines if ln.kind is LineKind.DIALOGUE)

    def line_by_index(self, index: int) -> TranscriptLine:
        for ln in self.lines:
            if ln.index == index:
                return ln
        raise KeyError(index)

    def to_dict(self) -> dict[str, Any]:
        return {
            "movie_id": self.movie_id,
            "source_id": self.source_id,
            "lines": [ln.to_dict() for ln in self.lines],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Track":
        return cls(
            movie_id=str(d["movie_id"]),
            source_id=str(d["source_id"]),
            lines=tuple(TranscriptLine.from_dict(x) for x in d["lines"]),
        )


@dataclass(frozen=True)
class TransformPiece:
    """One linear segment of a piecewise time mapping."""

    valid_from_s: float
    valid_to_s: float
    slope: float
    offset: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "valid_from_s": self.valid_from_s,
            "valid_to_s": None if math.isinf(self.valid_to_s) else self.valid_to_s,
            "slope": self.slope,
            "offset": self.offset,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TransformPiece":
        to_s = d["valid_to_s"]
        return cls(
            valid_from_s=float(d["valid_from_s"]),
            valid_to_s=math.inf if to_s is None else float(to_s),
            slope=float(d["slope"]),
            offset=float(d["offset"]),
        )


@dataclass(frozen=True)
class TimeTransform:
    """Piecewise-linear mapping from track-1 time to track-2 time.

    Pieces are keyed on track-1 time and must tile a contiguous range;
    the last piece may be open-ended (valid_to_s = inf).
    """

    pieces: tuple[TransformPiece, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"pieces": [p.to_dict() for p in self.pieces]}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TimeTransform":
        return cls(pieces=tuple(TransformPiece.from_dict(p) for p in d["pieces"]))


@dataclass(frozen=True)
class MappingPair:
    """A cross-track AD correspondence with its overlap score."""

    i: int
    j: int
    overlap: float

    def to_dict(self) -> dict[str, Any]:
        return {"i": self.i, "j": self.j, "overlap": self.overlap}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MappingPair":
        return cls(i=int(d["i"]), j=int(d["j"]), overlap=float(d["overlap"]))


@dataclass(frozen=True)
class ADMapping:
    """Cross-track AD correspondences plus the leftovers on either side.

    ``threshold`` and ``buffer_s`` record the parameters the mapping was
    built with so its pairs can be audited against raw intervals later.
    """

    pairs: tuple[MappingPair, ...]
    non_aligned_t1: frozenset[int]
    non_aligned_t2: frozenset[int]
    threshold: float = 0.5
    buffer_s: float = 1.0

    def mapped_t1(self) -> frozenset[int]:
        return frozenset(p.i for p in self.pairs)

    def mapped_t2(self) -> frozenset[int]:
        return frozenset(p.j for p in self.pairs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "pairs": [p.to_dict() for p in self.pairs],
            "non_aligned_t1": sorted(self.non_aligned_t1),
            "non_aligned_t2": sorted(self.non_aligned_t2),
            "threshold": self.threshold,
            "buffer_s": self.buffer_s,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ADMapping":
        return cls(
            pairs=tuple(MappingPair.from_dict(p) for p in d["pairs"]),
            non_aligned_t1=frozenset(int(i) for i in d["non_aligned_t1"]),
            non_aligned_t2=frozenset(int(j) for j in d["non_aligned_t2"]),
            threshold=float(d.get("threshold", 0.5)),
            buffer_s=float(d.get("buffer_s", 1.0)),
        )


@dataclass(frozen=True)
class VideoSegment:
    """A few-minute coherent story unit: dialog + AD lines, optional plot."""

    segment_id: str
    movie_id: str
    start_s: float
    end_s: float
    lines: tuple[TranscriptLine, ...]
    plot_sentences: tuple[str, ...] = ()

    def ad_lines(self) -> tuple[TranscriptLine, ...]:
        return tuple(ln for ln in self.lines if ln.kind is LineKind.AD)

    def dialogue_lines(self) -> tuple[TranscriptLine, ...]:
        return tuple(ln for ln in self.lines if ln.kind is LineKind.DIALOGUE)

    def to_dict(self) -> dict[str, Any]:
        return {
            "segment_id": self.segment_id,
            "movie_id": self.movie_id,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "lines": [ln.to_dict() for ln in self.lines],
            "plot_sentences": list(self.plot_sentences),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "VideoSegment":
        return cls(
            segment_id=str(d["segment_id"]),
            movie_id=str(d["movie_id"]),
            start_s=float(d["start_s"]),
            end_s=float(d["end_s"]),
            lines=tuple(TranscriptLine.from_dict(x) for x in d["lines"]),
            plot_sentences=tuple(str(s) for s in d.get("plot_sentences", [])),
        )


@dataclass(frozen=True)
class MCQA:
    """A five-option multiple-choice question with gold answer and rationale.

    Option texts never embed their label; labels are canonical "A".."E".
    """

    qid: str
    segment_id: str
    kind: QuestionKind
    question: str
    options: tuple[str, str, str, str, str]
    correct: str
    rationale: str

    def option_text(self, label: str) -> str:
        return self.options[OPTION_LABELS.index(label)]

    @property
    def correct_text(self) -> str:
        return self.option_text(self.correct)

    def to_dict(self) -> dict[str, Any]:
        return {
            "qid": self.qid,
            "segment_id": self.segment_id,
            "kind": self.kind.value,
            "question": self.question,
            "options": list(self.options),
            "correct": self.correct,
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MCQA":
        options = tuple(str(o) for o in d["options"])
        if len(options) != 5:
            raise ValueError(f"expected 5 options, got {len(options)}")
        return cls(
            qid=str(d["qid"]),
            segment_id=str(d["segment_id"]),
            kind=QuestionKind(d["kind"]),
            question=str(d["question"]),
            options=options,  # type: ignore[arg-type]
            correct=str(d["correct"]),
            rationale=str(d["rationale"]),
        )


@dataclass(frozen=True)
class AnswerRecord:
    """One model answer: chosen label, rationale, and context-use flag.

    ``chosen`` is None only when the answer could not be parsed even after
    the repair retry. ``from_context`` is NOT_APPLICABLE for runs whose
    context type carries no usable context (no-context / movie-name).
    """

    qid: str
    chosen: str | None
    rationale: str
    from_context: FromContext

    def to_dict(self) -> dict[str, Any]:
        return {
            "qid": self.qid,
            "chosen": self.chosen,
            "rationale": self.rationale,
            "from_context": self.from_context.value,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "AnswerRecord":
        chosen = d["chosen"]
        return cls(
            qid=str(d["qid"]),
            chosen=None if chosen is None else str(chosen),
            rationale=str(d.get("rationale", "")),
            from_context=FromContext(d["from_context"]),
        )


@dataclass(frozen=True)
class KindBreakdown:
    n_questions: int
    ca: float
    ac: float | None
    cc: float | None

    def to_dict(self) -> dict[str, Any]:
        return {"n_questions": self.n_questions, "ca": self.ca, "ac": self.ac, "cc": self.cc}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "KindBreakdown":
        return cls(
            n_questions=int(d["n_questions"]),
            ca=float(d["ca"]),
            ac=None if d["ac"] is None else float(d["ac"]),
            cc=None if d["cc"] is None else float(d["cc"]),
        )


@dataclass(frozen=True)
class MetricsReport:
    """Aggregated answering metrics for one run.

    ca/ac/cc are percentages; ac and cc are None for runs whose context
    type has no context-use flag (no-context / movie-name).
    """

    n_questions: int
    ca: float
    ac: float | None
    cc: float | None
    by_kind: tuple[tuple[str, KindBreakdown], ...]
    context_type: str

    def kind_breakdown(self, kind: str) -> KindBreakdown | None:
        for k, b in self.by_kind:
            if k == kind:
                return b
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_questions": self.n_questions,
            "ca": self.ca,
            "ac": self.ac,
            "cc": self.cc,
            "by_kind": {k: b.to_dict() for k, b in self.by_kind},
            "context_type": self.context_type,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MetricsReport":
        return cls(
            n_questions=int(d["n_questions"]),
            ca=float(d["ca"]),
            ac=None if d["ac"] is None else float(d["ac"]),
            cc=None if d["cc"] is None else float(d["cc"]),
            by_kind=tuple(
                sorted((k, KindBreakdown.from_dict(b)) for k, b in d["by_kind"].items())
            ),
            context_type=str(d["context_type"]),
        )


@dataclass(frozen=True)
class SubmittedAd:
    start_s: float
    end_s: float
    text: str

    def to_dict(self) -> dict[str, Any]:
        return {"start_s": self.start_s, "end_s": self.end_s, "text": self.text}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SubmittedAd":
        return cls(start_s=float(d["start_s"]), end_s=float(d["end_s"]), text=str(d["text"]))


@dataclass(frozen=True)
class SubmissionSegment:
    segment_id: str
    ads: tuple[SubmittedAd, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"segment_id": self.segment_id, "ads": [a.to_dict() for a in self.ads]}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SubmissionSegment":
        return cls(
            segment_id=str(d["segment_id"]),
            ads=tuple(SubmittedAd.from_dict(a) for a in d["ads"]),
        )


@dataclass(frozen=True)
class Submission:
    """Generated ADs uploaded for evaluation, grouped by video segment."""

    method_name: str
    segments: tuple[SubmissionSegment, ...]

    def ads_for(self, segment_id: str) -> tuple[SubmittedAd, ...] | None:
        for seg in self.segments:
            if seg.segment_id == segment_id:
                return seg.ads
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "method_name": self.method_name,
            "segments": [s.to_dict() for s in self.segments],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Submission":
        return cls(
            method_name=str(d["method_name"]),
            segments=tuple(SubmissionSegment.from_dict(s) for s in d["segments"]),
        )


# ---------------------------------------------------------------------------
# Validation


def _validate_line(ln: TranscriptLine) -> list[str]:
    out = []
    if ln.index < 0:
        out.append("index must be >= 0")
    if ln.start_s < 0:
        out.append("start_s must be >= 0")
    if not ln.end_s > ln.start_s:
        out.append("end_s > start_s")
    if not ln.text.strip():
        out.append("text is non-empty")
    return out


def _validate_track(tr: Track) -> list[str]:
    out = []
    for k, ln in enumerate(tr.lines):
        out.extend(f"lines[{k}]: {v}" for v in _validate_line(ln))
    starts = [ln.start_s for ln in tr.lines]
    if starts != sorted(starts):
        out.append("lines sorted by start_s")
    indices = [ln.index for ln in tr.lines]
    if any(b <= a for a, b in zip(indices, indices[1:])):
        out.append("line indices strictly increasing")
    return out


def _validate_transform(tt: TimeTransform) -> list[str]:
    out = []
    if not tt.pieces:
        out.append("at least one piece")
        return out
    for k, p in enumerate(tt.pieces):
        if not p.slope > 0:
            out.append(f"pieces[{k}]: slope > 0")
        if not p.valid_to_s > p.valid_from_s:
            out.append(f"pieces[{k}]: valid_to_s > valid_from_s")
    for k, (a, b) in enumerate(zip(tt.pieces, tt.pieces[1:])):
        if a.valid_to_s != b.valid_from_s:
            out.append(f"pieces[{k}]..[{k + 1}]: contiguous coverage")
    return out


def _validate_mapping(m: ADMapping) -> list[str]:
    out = []
    mapped1, mapped2 = m.mapped_t1(), m.mapped_t2()
    if m.non_aligned_t1 & mapped1:
        out.append("non_aligned_t1 disjoint from mapped T1 indices")
    if m.non_aligned_t2 & mapped2:
        out.append("non_aligned_t2 disjoint from mapped T2 indices")
    for p in m.pairs:
        if not p.overlap > m.threshold:
            out.append(f"pair ({p.i},{p.j}): overlap > threshold")
        if not 0.0 <= p.overlap <= 1.0:
            out.append(f"pair ({p.i},{p.j}): overlap in [0,1]")
    return out


def _validate_segment(seg: VideoSegment) -> list[str]:
    out = []
    if not seg.end_s - seg.start_s > 0:
        out.append("end_s - start_s > 0")
    eps = 1e-6
    for ln in seg.lines:
        if ln.start_s < seg.start_s - eps or ln.end_s > seg.end_s + eps:
            out.append(f"line {ln.index} falls within [start_s, end_s]")
    return out


def _validate_mcqa(q: MCQA) -> list[str]:
    out = []
    if len(q.options) != 5:
        out.append("exactly 5 options")
    if len(set(q.options)) != len(q.options):
        out.append("options are distinct")
    if q.correct not in OPTION_LABELS:
        out.append("correct label in A..E")
    if not q.rationale.strip():
        out.append("rationale non-empty")
    if not q.question.strip():
        out.append("question non-empty")
    return out


def _validate_answer(rec: AnswerRecord) -> list[str]:
    out = []
    if rec.chosen is not None and rec.chosen not in OPTION_LABELS:
        out.append("chosen label in A..E or unparsed")
    return out


def _validate_report(rep: MetricsReport) -> list[str]:
    out = []
    if not 0 <= rep.ca <= 100:
        out.append("CA in [0, 100]")
    if rep.ac is not None and not 0 <= rep.ac <= 100:
        out.append("AC in [0, 100]")
    if rep.cc is not None:
        bound = rep.ca if rep.ac is None else min(rep.ca, rep.ac)
        if rep.cc > bound + 1e-9 or rep.cc < 0:
            out.append("0 <= CC <= min(CA, AC)")
    return out


def _validate_submission(sub: Submission) -> list[str]:
    out = []
    if not sub.method_name.strip():
        out.append("method_name non-empty")
    seen = set()
    for seg in sub.segments:
        if seg.segment_id in seen:
            out.append(f"duplicate segment_id {seg.segment_id!r}")
        seen.add(seg.segment_id)
        starts = [a.start_s for a in seg.ads]
        if starts != sorted(starts):
            out.append(f"segment {seg.segment_id!r}: AD intervals sorted")
        for a in seg.ads:
            if not a.text.strip():
                out.append(f"segment {seg.segment_id!r}: AD texts non-empty")
    return out


_VALIDATORS = (
    (TranscriptLine, _validate_line),
    (Track, _validate_track),
    (TimeTransform, _validate_transform),
    (ADMapping, _validate_mapping),
    (VideoSegment, _validate_segment),
    (MCQA, _validate_mcqa),
    (AnswerRecord, _validate_answer),
    (MetricsReport, _validate_report),
    (Submission, _validate_submission),
)


def validate(entity: Any) -> list[str]:
    """Return every violated invariant of a core type; empty list when valid."""
    for typ, fn in _VALIDATORS:
        if isinstance(entity, typ):
            return fn(entity)
    raise TypeError(f"no validator for {type(entity).__name__}")
