"""Readers and writers for every on-disk format the toolkit touches.

All JSON written here is indent=2, sorted-keys, newline-terminated, so
repeated runs over identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .errors import (
    EmptyPlot,
    MalformedCue,
    MalformedLine,
    MalformedSubmission,
    NonMonotonicTimestamps,
    SchemaViolation,
    UnknownSegment,
)
from .model import (
    ADMapping,
    LineKind,
    MCQA,
    MetricsReport,
    OPTION_LABELS,
    QuestionKind,
    Submission,
    SubmissionSegment,
    SubmittedAd,
    TimeTransform,
    Track,
    TranscriptLine,
    VideoSegment,
)

logger = logging.getLogger(__name__)


def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dump_json(obj), encoding="utf-8")


# ---------------------------------------------------------------------------
# Transcripts (JSONL)

_KIND_ALIASES = {
    "ad": LineKind.AD,
    "dialogue": LineKind.DIALOGUE,
    "unclassified": LineKind.UNCLASSIFIED,
}


def parse_transcript_text(
    text: str, movie_id: str, source_id: str, strict: bool = False
) -> Track:
    """Parse a JSONL transcript into a Track.

    Lines out of start-time order are re-sorted with a warning; in strict
    mode they raise instead. Indices are kept when already strictly
    increasing after the sort, otherwise reassigned positionally.
    """
    lines: list[TranscriptLine] = []
    prev_start = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except ValueError as exc:
            raise MalformedLine(line_no, f"invalid JSON: {exc}")
        if not isinstance(rec, dict):
            raise MalformedLine(line_no, "expected a JSON object")
        for field in ("start_s", "end_s", "text"):
            if field not in rec:
                raise MalformedLine(line_no, f"missing field {field!r}")
        try:
            start_s = float(rec["start_s"])
            end_s = float(rec["end_s"])
        except (TypeError, ValueError):
            raise MalformedLine(line_no, "start_s and end_s must be numbers")
        if not end_s > start_s:
            raise MalformedLine(line_no, "end_s must be greater than start_s")
        if start_s < 0:
            raise MalformedLine(line_no, "start_s must be >= 0")
        text_field = str(rec["text"])
        if not text_field.strip():
            raise MalformedLine(line_no, "text must be non-empty")
        kind_raw = str(rec.get("kind", "Unclassified")).lower()
        if kind_raw not in _KIND_ALIASES:
            raise MalformedLine(line_no, f"unknown kind {rec.get('kind')!r}")
        if prev_start is not None and start_s < prev_start:
            if strict:
                raise NonMonotonicTimestamps(line_no)
        prev_start = start_s
        index = rec.get("index", len(lines))
        try:
            index = int(index)
        except (TypeError, ValueError):
            raise MalformedLine(line_no, "index must be an integer")
        lines.append(
            TranscriptLine(
                index=index,
                start_s=start_s,
                end_s=end_s,
                text=text_field,
                kind=_KIND_ALIASES[kind_raw],
            )
        )
    starts = [ln.start_s for ln in lines]
    if starts != sorted(starts):
        logger.warning("transcript %s/%s out of order; re-sorting", movie_id, source_id)
        lines.sort(key=lambda ln: (ln.start_s, ln.end_s, ln.index))
    indices = [ln.index for ln in lines]
    if any(b <= a for a, b in zip(indices, indices[1:])) or len(set(indices)) != len(
        indices
    ):
        logger.warning(
            "transcript %s/%s line indices not usable; renumbering", movie_id, source_id
        )
        lines = [
            TranscriptLine(k, ln.start_s, ln.end_s, ln.text, ln.kind)
            for k, ln in enumerate(lines)
        ]
    return Track(movie_id=movie_id, source_id=source_id, lines=tuple(lines))


def parse_transcript(
    path: str | Path, movie_id: str, source_id: str, strict: bool = False
) -> Track:
    return parse_transcript_text(
        Path(path).read_text(encoding="utf-8"), movie_id, source_id, strict=strict
    )


def write_track(path: str | Path, track: Track) -> None:
    write_json(path, track.to_dict())


def read_track(path: str | Path) -> Track:
    return Track.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# SRT subtitles (read-only)

_SRT_TIME_RE = re.compile(
    r"(\d{2,}):(\d{2}):(\d{2})[,.](\d{1,3})\s*-->\s*(\d{2,}):(\d{2}):(\d{2})[,.](\d{1,3})"
)


def _srt_seconds(h: str, m: str, s: str, ms: str) -> float:
    return int(h) * 3600 + int(m) * 60 + int(s) + int(ms.ljust(3, "0")) / 1000.0


def parse_srt_text(text: str, movie_id: str, source_id: str) -> Track:
    """Parse SRT subtitles into an unclassified Track.

    Multi-line cue text is joined with single spaces.
    """
    blocks = re.split(r"\n\s*\n", text.strip())
    lines: list[TranscriptLine] = []
    cue_no = 0
    for block in blocks:
        rows = [r.strip() for r in block.splitlines() if r.strip()]
        if not rows:
            continue
        cue_no += 1
        if rows and rows[0].isdigit():
            rows = rows[1:]
        if not rows:
            raise MalformedCue(cue_no, "cue has no timing line")
        m = _SRT_TIME_RE.match(rows[0])
        if m is None:
            raise MalformedCue(cue_no, f"bad timing line {rows[0]!r}")
        start_s = _srt_seconds(*m.groups()[:4])
        end_s = _srt_seconds(*m.groups()[4:])
        if not end_s > start_s:
            raise MalformedCue(cue_no, "cue end must be after start")
        body = " ".join(rows[1:]).strip()
        if not body:
            raise MalformedCue(cue_no, "cue has no text")
        lines.append(
            TranscriptLine(index=len(lines), start_s=start_s, end_s=end_s, text=body)
        )
    return Track(movie_id=movie_id, source_id=source_id, lines=tuple(lines))


def parse_srt(path: str | Path, movie_id: str, source_id: str) -> Track:
    return parse_srt_text(Path(path).read_text(encoding="utf-8"), movie_id, source_id)


# ---------------------------------------------------------------------------
# Plot synopses


_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


def parse_plot_text(text: str) -> tuple[str, ...]:
    """Split a plot synopsis into sentences.

    One sentence per non-empty line; a single-line paragraph is split on
    sentence-final punctuation.
    """
    rows = [r.strip() for r in text.splitlines() if r.strip()]
    if len(rows) == 1:
        rows = [s.strip() for s in _SENTENCE_SPLIT_RE.split(rows[0]) if s.strip()]
    if not rows:
        raise EmptyPlot("plot synopsis has no sentences")
    return tuple(rows)


def parse_plot(path: str | Path) -> tuple[str, ...]:
    return parse_plot_text(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Submissions


def parse_submission_obj(
    obj: Any, known_segments: Iterable[str] | None = None
) -> Submission:
    if not isinstance(obj, Mapping):
        raise MalformedSubmission("submission must be a JSON object")
    if "method_name" not in obj or not str(obj["method_name"]).strip():
        raise MalformedSubmission("method_name missing or empty")
    segments = obj.get("segments")
    if not isinstance(segments, list):
        raise MalformedSubmission("segments must be a list")
    seen: set[str] = set()
    parsed = []
    for k, seg in enumerate(segments):
        if not isinstance(seg, Mapping) or "segment_id" not in seg:
            raise MalformedSubmission(f"segments[{k}] missing segment_id")
        sid = str(seg["segment_id"])
        if sid in seen:
            raise MalformedSubmission(f"duplicate segment_id {sid!r}")
        seen.add(sid)
        ads_raw = seg.get("ads")
        if not isinstance(ads_raw, list):
            raise MalformedSubmission(f"segments[{k}].ads must be a list")
        ads = []
        for a_k, ad in enumerate(ads_raw):
            if not isinstance(ad, Mapping):
                raise MalformedSubmission(f"segments[{k}].ads[{a_k}] must be an object")
            try:
                start_s = float(ad["start_s"])
                end_s = float(ad["end_s"])
                text = str(ad["text"])
            except (KeyError, TypeError, ValueError):
                raise MalformedSubmission(
                    f"segments[{k}].ads[{a_k}] needs numeric start_s/end_s and text"
                )
            if not end_s > start_s:
                raise MalformedSubmission(
                    f"segments[{k}].ads[{a_k}]: end_s must exceed start_s"
                )
            if not text.strip():
                raise MalformedSubmission(f"segments[{k}].ads[{a_k}]: empty text")
            ads.append((start_s, end_s, text))
        ads.sort(key=lambda t: (t[0], t[1]))
        parsed.append(
            SubmissionSegment(
                segment_id=sid,
                ads=tuple(SubmittedAd(s, e, t) for s, e, t in ads),
            )
        )
    sub = Submission(method_name=str(obj["method_name"]), segments=tuple(parsed))
    if known_segments is not None:
        known = set(known_segments)
        unknown = sorted(s.segment_id for s in sub.segments if s.segment_id not in known)
        if unknown:
            raise UnknownSegment(unknown)
    return sub


def parse_submission_text(
    text: str, known_segments: Iterable[str] | None = None
) -> Submission:
    try:
        obj = json.loads(text)
    except ValueError as exc:
        raise MalformedSubmission(f"invalid JSON: {exc}")
    return parse_submission_obj(obj, known_segments)


def parse_submission(
    path: str | Path, known_segments: Iterable[str] | None = None
) -> Submission:
    return parse_submission_text(
        Path(path).read_text(encoding="utf-8"), known_segments
    )


# ---------------------------------------------------------------------------
# QA files

_OPTION_RE = re.compile(r"^\s*-?\s*([A-E])[\).:]\s*(.*)$", re.DOTALL)


def _split_option(qid: str, pos: int, raw: str) -> tuple[str, str]:
    m = _OPTION_RE.match(raw)
    if m is None:
        raise SchemaViolation(qid, f"option {pos} not in 'A) text' form: {raw!r}")
    return m.group(1), m.group(2).strip()


def mcqa_to_file_dict(q: MCQA) -> dict[str, Any]:
    return {
        "qid": q.qid,
        "segment_id": q.segment_id,
        "kind": q.kind.value,
        "question": q.question,
        "options": [f"{lab}) {text}" for lab, text in zip(OPTION_LABELS, q.options)],
        "correct_answer": f"{q.correct}) {q.correct_text}",
        "rationale": q.rationale,
    }


def mcqa_from_file_dict(rec: Mapping[str, Any]) -> MCQA:
    qid = str(rec.get("qid", "?"))
    for field in ("qid", "segment_id", "kind", "question", "options", "correct_answer"):
        if field not in rec:
            raise SchemaViolation(qid, f"missing field {field!r}")
    options_raw = rec["options"]
    if not isinstance(options_raw, list) or len(options_raw) != 5:
        raise SchemaViolation(qid, "options must be a list of exactly 5 entries")
    labels, texts = [], []
    for pos, raw in enumerate(options_raw):
        lab, text = _split_option(qid, pos, str(raw))
        labels.append(lab)
        texts.append(text)
    if labels != list(OPTION_LABELS):
        raise SchemaViolation(qid, f"option labels must be A..E in order, got {labels}")
    correct_raw = str(rec["correct_answer"]).strip()
    if _OPTION_RE.match(correct_raw):
        lab, text = _split_option(qid, -1, correct_raw)
        if text and text != texts[OPTION_LABELS.index(lab)]:
            raise SchemaViolation(qid, "correct_answer text disagrees with its option")
        correct = lab
    elif correct_raw in OPTION_LABELS:
        correct = correct_raw
    else:
        raise SchemaViolation(qid, f"unusable correct_answer {correct_raw!r}")
    try:
        kind = QuestionKind(str(rec["kind"]))
    except ValueError:
        raise SchemaViolation(qid, f"unknown kind {rec['kind']!r}")
    return MCQA(
        qid=qid,
        segment_id=str(rec["segment_id"]),
        kind=kind,
        question=str(rec["question"]),
        options=tuple(texts),  # type: ignore[arg-type]
        correct=correct,
        rationale=str(rec.get("rationale", "")),
    )


def write_qa_file(path: str | Path, questions: Sequence[MCQA]) -> None:
    write_json(path, [mcqa_to_file_dict(q) for q in questions])


def parse_qa_file(path: str | Path) -> tuple[MCQA, ...]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(obj, list):
        raise SchemaViolation("?", "QA file must be a JSON list")
    return tuple(mcqa_from_file_dict(rec) for rec in obj)


# ---------------------------------------------------------------------------
# Dataset manifests


@dataclass(frozen=True)
class ManifestMovie:
    movie_id: str
    track_files: tuple[Path, ...]
    plot_file: Path | None = None
    segments_file: Path | None = None
    public: bool = False


@dataclass(frozen=True)
class Manifest:
    dataset_id: str
    movies: tuple[ManifestMovie, ...]

    def movie(self, movie_id: str) -> ManifestMovie:
        for m in self.movies:
            if m.movie_id == movie_id:
                return m
        raise KeyError(movie_id)


def load_manifest(path: str | Path) -> Manifest:
    """Load a dataset manifest; all referenced paths must exist.

    Paths are resolved relative to the manifest's own directory.
    """
    path = Path(path)
    base = path.parent
    obj = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(obj, Mapping) or "dataset_id" not in obj:
        raise MalformedLine(0, "manifest must be an object with dataset_id")
    movies = []
    seen: set[str] = set()
    for k, rec in enumerate(obj.get("movies", [])):
        movie_id = str(rec.get("movie_id", ""))
        if not movie_id:
            raise MalformedLine(k, "movie entry missing movie_id")
        if movie_id in seen:
            raise MalformedLine(k, f"duplicate movie_id {movie_id!r}")
        seen.add(movie_id)
        tracks = [base / t for t in rec.get("track_files", [])]
        if not 1 <= len(tracks) <= 2:
            raise MalformedLine(k, "track_files must list 1 or 2 paths")
        plot = base / rec["plot_file"] if rec.get("plot_file") else None
        segs = base / rec["segments_file"] if rec.get("segments_file") else None
        for p in [*tracks, plot, segs]:
            if p is not None and not p.exists():
                raise MalformedLine(k, f"referenced path {p} does not exist")
        movies.append(
            ManifestMovie(
                movie_id=movie_id,
                track_files=tuple(tracks),
                plot_file=plot,
                segments_file=segs,
                public=bool(rec.get("public", False)),
            )
        )
    return Manifest(dataset_id=str(obj["dataset_id"]), movies=tuple(movies))


# ---------------------------------------------------------------------------
# Video segments


def write_segments(path: str | Path, segments: Sequence[VideoSegment]) -> None:
    write_json(path, [s.to_dict() for s in segments])


def read_segments(path: str | Path) -> tuple[VideoSegment, ...]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return tuple(VideoSegment.from_dict(rec) for rec in obj)


# ---------------------------------------------------------------------------
# Mapping and report files


def mapping_to_file_dict(
    mapping: ADMapping,
    transform: TimeTransform,
    t1: Track,
    t2: Track,
) -> dict[str, Any]:
    """Bundle a mapping with everything needed to audit it by hand.

    Raw intervals come straight off the tracks; projected intervals are the
    track-1 side pushed through the transform plus the mapping's buffer.
    """
    from .alignment import project_interval

    pairs = []
    for p in mapping.pairs:
        a = t1.line_by_index(p.i)
        b = t2.line_by_index(p.j)
        proj = project_interval(transform, a.start_s, a.end_s, mapping.buffer_s)
        pairs.append(
            {
                "i": p.i,
                "j": p.j,
                "overlap": p.overlap,
                "t1_interval": [a.start_s, a.end_s],
                "t1_projected": [proj[0], proj[1]],
                "t2_interval": [b.start_s, b.end_s],
            }
        )
    return {
        "movie_id": t1.movie_id,
        "track1": t1.source_id,
        "track2": t2.source_id,
        "threshold": mapping.threshold,
        "buffer_s": mapping.buffer_s,
        "transform": transform.to_dict(),
        "pairs": pairs,
        "non_aligned_t1": sorted(mapping.non_aligned_t1),
        "non_aligned_t2": sorted(mapping.non_aligned_t2),
    }


def write_mapping(
    path: str | Path,
    mapping: ADMapping,
    transform: TimeTransform,
    t1: Track,
    t2: Track,
) -> None:
    write_json(path, mapping_to_file_dict(mapping, transform, t1, t2))


def read_mapping(path: str | Path) -> tuple[ADMapping, TimeTransform]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    mapping = ADMapping.from_dict(
        {
            "pairs": [
                {"i": p["i"], "j": p["j"], "overlap": p["overlap"]}
                for p in obj["pairs"]
            ],
            "non_aligned_t1": obj["non_aligned_t1"],
            "non_aligned_t2": obj["non_aligned_t2"],
            "threshold": obj["threshold"],
            "buffer_s": obj["buffer_s"],
        }
    )
    return mapping, TimeTransform.from_dict(obj["transform"])


def write_report(path: str | Path, report: MetricsReport) -> None:
    write_json(path, report.to_dict())


def read_report(path: str | Path) -> MetricsReport:
    return MetricsReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
