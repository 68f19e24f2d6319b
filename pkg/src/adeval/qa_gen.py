"""MCQA generation from segments: visual questions from AD lines, narrative
questions from plot sentences.

Generation is single-shot: model output that fails a per-question check is
dropped with a warning rather than regenerated, so a run's question set is a
pure function of its inputs under a deterministic provider.
"""

from __future__ import annotations

import logging
import re
from typing import Any, Sequence

from .gateway import Gateway
from .model import MCQA, OPTION_LABELS, QuestionKind, VideoSegment, validate
from .prompts import TEMPLATES, scene_text

logger = logging.getLogger(__name__)

VA_RATIONALE_PREFIX = "As specified in the audio description"

_GEN_SHAPE = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["question", "options", "correct_answer", "rationale"],
        "properties": {
            "question": {"type": "string"},
            "options": {
                "type": "array",
                "items": {"type": "string"},
                "minItems": 5,
                "maxItems": 5,
            },
            "correct_answer": {"type": "string"},
            "rationale": {"type": "string"},
        },
    },
}

_OPTION_RE = re.compile(r"^\s*-?\s*([A-E])[\).:]\s*(.*)$", re.DOTALL)


def _parse_options(raw_options: list[Any]) -> tuple[list[str], str | None]:
    """Strip 'A) ' style labels; returns (texts, problem)."""
    labels, texts = [], []
    for raw in raw_options:
        m = _OPTION_RE.match(str(raw))
        if m is None:
            return [], f"option not in 'A) text' form: {raw!r}"
        labels.append(m.group(1))
        texts.append(m.group(2).strip())
    if labels != list(OPTION_LABELS):
        return [], f"option labels must be A..E in order, got {labels}"
    if len(set(texts)) != 5:
        return [], "option texts must be distinct"
    if any(not t for t in texts):
        return [], "option text empty"
    return texts, None


def _parse_correct(raw: str, texts: list[str]) -> tuple[str | None, str | None]:
    raw = str(raw).strip()
    m = _OPTION_RE.match(raw)
    if m is not None:
        label, text = m.group(1), m.group(2).strip()
        if text and text != texts[OPTION_LABELS.index(label)]:
            return None, "correct_answer text disagrees with its option"
        return label, None
    if raw in OPTION_LABELS:
        return raw, None
    if raw in texts:
        return OPTION_LABELS[texts.index(raw)], None
    return None, f"unusable correct_answer {raw!r}"


def _build_question(
    rec: dict, segment_id: str, kind: QuestionKind, seq: int
) -> MCQA | None:
    tag = "va" if kind is QuestionKind.VA else "nu"
    texts, problem = _parse_options(list(rec["options"]))
    if problem is None:
        correct, problem = _parse_correct(rec["correct_answer"], texts)
    if problem is None:
        q = MCQA(
            qid=f"{segment_id}-{tag}-{seq:02d}",
            segment_id=segment_id,
            kind=kind,
            question=str(rec["question"]).strip(),
            options=tuple(texts),  # type: ignore[arg-type]
            correct=correct,  # type: ignore[arg-type]
            rationale=str(rec["rationale"]).strip(),
        )
        violations = validate(q)
        if kind is QuestionKind.VA and not q.rationale.startswith(VA_RATIONALE_PREFIX):
            violations.append(f"rationale must start {VA_RATIONALE_PREFIX!r}")
        if not violations:
            return q
        problem = "; ".join(violations)
    logger.warning("dropping generated question for %s: %s", segment_id, problem)
    return None


def _generate(
    prompt: str, segment_id: str, kind: QuestionKind, gateway: Gateway
) -> tuple[MCQA, ...]:
    records = gateway.complete(prompt, _GEN_SHAPE)
    kept: list[MCQA] = []
    for rec in records:
        q = _build_question(rec, segment_id, kind, len(kept) + 1)
        if q is not None:
            kept.append(q)
    return tuple(kept)


def generate_va(segment: VideoSegment, gateway: Gateway) -> tuple[MCQA, ...]:
    """Visual questions over the segment's AD lines.

    A segment without ADs yields nothing without any model call. An empty
    model reply is a legitimate empty result.
    """
    if not segment.ad_lines():
        return ()
    prompt = TEMPLATES["gen_va"].render(scene=scene_text(segment.lines))
    return _generate(prompt, segment.segment_id, QuestionKind.VA, gateway)


def generate_nu(
    segment: VideoSegment, gateway: Gateway, style: str = "cmd"
) -> tuple[MCQA, ...]:
    """Narrative questions over the segment's plot sentences.

    style "cmd" treats the plot as a one-line clip description; style "mad"
    treats it as a plot summary paragraph.
    """
    if not segment.plot_sentences:
        return ()
    plot = " ".join(segment.plot_sentences)
    if style == "cmd":
        prompt = TEMPLATES["gen_nu_cmd"].render(description=plot)
    elif style == "mad":
        prompt = TEMPLATES["gen_nu_mad"].render(summary=plot)
    else:
        raise ValueError(f"unknown style {style!r}")
    return _generate(prompt, segment.segment_id, QuestionKind.NU, gateway)


def validate_question_set(questions: Sequence[MCQA]) -> list[str]:
    """Per-question invariants plus the cross-question leakage check: one
    question's correct answer text must not appear inside another's stem."""
    out = []
    for q in questions:
        out.extend(f"{q.qid}: {v}" for v in validate(q))
        if q.kind is QuestionKind.VA and not q.rationale.startswith(
            VA_RATIONALE_PREFIX
        ):
            out.append(f"{q.qid}: rationale must start {VA_RATIONALE_PREFIX!r}")
    for q in questions:
        needle = q.correct_text.lower().strip()
        if not needle:
            continue
        for other in questions:
            if other.qid == q.qid:
                continue
            if needle in other.question.lower():
                out.append(
                    f"correct answer of {q.qid} appears in the stem of {other.qid}"
                )
    return out
