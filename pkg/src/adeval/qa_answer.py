"""Context assembly, rationale-grounded answering, and the CA/AC/CC metrics.

CA is the share of questions whose chosen option is correct, AC the share
the model flagged as answered from the provided context, CC the share with
both. Unparsed answers count as wrong and as not-from-context, never
re-drawn. For the two context types that carry no usable context, AC and CC
are not applicable and reported as None.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping, Sequence

from .errors import (
    DegenerateBaseline,
    MissingADSource,
    QidMismatch,
    SchemaError,
    UnknownSegment,
)
from .gateway import Gateway
from .model import (
    AnswerRecord,
    FromContext,
    KindBreakdown,
    MCQA,
    MetricsReport,
    OPTION_LABELS,
    Submission,
    SubmittedAd,
    VideoSegment,
)
from .prompts import TEMPLATES, questions_with_choices
from .store import QuestionStore

logger = logging.getLogger(__name__)


class ContextType(str, Enum):
    NO_CONTEXT = "NoContext"
    MOVIE_NAME = "MovieName"
    DIALOG_ONLY = "DialogOnly"
    AD_ONLY = "ADOnly"
    DIALOG_PLUS_AD = "DialogPlusAD"


CONTEXT_PHRASES: Mapping[ContextType, str] = {
    ContextType.NO_CONTEXT: "context",
    ContextType.MOVIE_NAME: "movie name",
    ContextType.DIALOG_ONLY: "dialogues",
    ContextType.AD_ONLY: "audio descriptions",
    ContextType.DIALOG_PLUS_AD: "dialogues and audio descriptions",
}

ANSWERED_FROM_VARS: Mapping[ContextType, str] = {
    ContextType.NO_CONTEXT: "answered_from_context",
    ContextType.MOVIE_NAME: "answered_from_movie_name",
    ContextType.DIALOG_ONLY: "answered_from_dialogues",
    ContextType.AD_ONLY: "answered_from_audio_descriptions",
    ContextType.DIALOG_PLUS_AD: "answered_from_dialogues_and_audio_descriptions",
}

# Context types whose runs carry a usable context-use flag.
AC_APPLICABLE = frozenset(
    {ContextType.DIALOG_ONLY, ContextType.AD_ONLY, ContextType.DIALOG_PLUS_AD}
)

_NEEDS_ADS = frozenset({ContextType.AD_ONLY, ContextType.DIALOG_PLUS_AD})

SEGMENT_ADS = "track"


def assemble_context(
    segment: VideoSegment,
    ctx_type: ContextType,
    ad_source: str | Sequence[SubmittedAd] | None = None,
    movie_title: str | None = None,
) -> str:
    """Render the answering context for one segment.

    ad_source is "track" for the segment's own AD lines, a sequence of
    submitted ADs, or None. AD-requiring context types demand a source (an
    empty sequence is a valid, deliberately empty source).
    """
    if ctx_type is ContextType.NO_CONTEXT:
        return ""
    if ctx_type is ContextType.MOVIE_NAME:
        return movie_title if movie_title else segment.movie_id
    if ctx_type in _NEEDS_ADS and ad_source is None:
        raise MissingADSource(f"{ctx_type.value} context requires an AD source")
    items: list[tuple[float, int, str]] = []
    seq = 0
    if ctx_type in (ContextType.DIALOG_ONLY, ContextType.DIALOG_PLUS_AD):
        for ln in segment.dialogue_lines():
            items.append((ln.start_s, seq, f"Dialogue: {ln.text}"))
            seq += 1
    if ctx_type in _NEEDS_ADS:
        if ad_source == SEGMENT_ADS:
            ads = [(ln.start_s, ln.text) for ln in segment.ad_lines()]
        else:
            ads = [(ad.start_s, ad.text) for ad in ad_source]
        for start_s, text in ads:
            items.append((start_s, seq, f"Audio Description: {text}"))
            seq += 1
    items.sort(key=lambda t: (t[0], t[1]))
    return "\n".join(text for _, _, text in items)


# ---------------------------------------------------------------------------
# Answering

_ANSWER_LABEL_RE = re.compile(r"^\s*-?\s*([A-E])\b[\).:]?\s*(.*)$", re.DOTALL)


def _answer_shape(n: int, var: str, require_flag: bool) -> dict:
    required = ["answer", "rationale", var] if require_flag else ["answer"]
    return {
        "type": "array",
        "minItems": n,
        "maxItems": n,
        "items": {
            "type": "object",
            "required": required,
            "properties": {
                "answer": {"type": "string"},
                "rationale": {"type": "string"},
                var: {"type": "string", "enum": ["True", "False"]},
            },
        },
    }


def _parse_chosen(raw: Any, question: MCQA) -> str | None:
    text = str(raw).strip()
    if not text:
        return None
    m = _ANSWER_LABEL_RE.match(text)
    if m is not None:
        label, rest = m.group(1), m.group(2).strip()
        if not rest or rest.lower() == question.option_text(label).lower():
            return label
    lowered = text.lower()
    for label, option in zip(OPTION_LABELS, question.options):
        if lowered == option.lower():
            return label
    return None


def _record_from_item(
    item: Any, question: MCQA, var: str, flag_applicable: bool
) -> AnswerRecord:
    if not isinstance(item, Mapping):
        return AnswerRecord(
            qid=question.qid,
            chosen=None,
            rationale="",
            from_context=FromContext.UNPARSED
            if flag_applicable
            else FromContext.NOT_APPLICABLE,
        )
    chosen = _parse_chosen(item.get("answer", ""), question)
    rationale = str(item.get("rationale", ""))
    if not flag_applicable:
        flag = FromContext.NOT_APPLICABLE
    else:
        raw_flag = item.get(var)
        if raw_flag == "True":
            flag = FromContext.TRUE
        elif raw_flag == "False":
            flag = FromContext.FALSE
        else:
            flag = FromContext.UNPARSED
    return AnswerRecord(
        qid=question.qid, chosen=chosen, rationale=rationale, from_context=flag
    )


def answer_questions(
    questions: Sequence[MCQA],
    context_text: str,
    ctx_type: ContextType,
    gateway: Gateway,
) -> tuple[AnswerRecord, ...]:
    """Answer all of one segment's questions in a single prompt.

    Output that still fails validation after the gateway's repair pass is
    salvaged positionally; unrecoverable positions become Unparsed records.
    """
    if not questions:
        raise ValueError("no questions to answer")
    segment_ids = {q.segment_id for q in questions}
    if len(segment_ids) != 1:
        raise ValueError(f"questions span multiple segments: {sorted(segment_ids)}")
    var = ANSWERED_FROM_VARS[ctx_type]
    flag_applicable = ctx_type in AC_APPLICABLE
    prompt = TEMPLATES["answer"].render(
        questions_with_choices=questions_with_choices(questions),
        context_type=CONTEXT_PHRASES[ctx_type],
        context=context_text if context_text.strip() else "Not available.",
        answered_from_var_name=var,
    )
    shape = _answer_shape(len(questions), var, flag_applicable)
    try:
        items = gateway.complete(prompt, shape)
    except SchemaError as exc:
        logger.warning("answer batch unrecoverable (%s); salvaging per position", exc)
        items = exc.value if isinstance(exc.value, list) else []
    records = []
    for k, q in enumerate(questions):
        item = items[k] if k < len(items) else None
        records.append(_record_from_item(item, q, var, flag_applicable))
    return tuple(records)


# ---------------------------------------------------------------------------
# Scoring


def _percent(hits: int, total: int) -> float:
    return 100.0 * hits / total


def _score_subset(
    pairs: Sequence[tuple[AnswerRecord, MCQA]], flag_applicable: bool
) -> tuple[int, float, float | None, float | None]:
    n = len(pairs)
    correct = sum(1 for r, q in pairs if r.chosen == q.correct)
    ca = _percent(correct, n)
    if not flag_applicable:
        return n, ca, None, None
    from_ctx = sum(1 for r, _ in pairs if r.from_context is FromContext.TRUE)
    both = sum(
        1
        for r, q in pairs
        if r.chosen == q.correct and r.from_context is FromContext.TRUE
    )
    return n, ca, _percent(from_ctx, n), _percent(both, n)


def score(
    records: Sequence[AnswerRecord],
    gold: Sequence[MCQA],
    context_type: ContextType | str,
) -> MetricsReport:
    """Aggregate CA/AC/CC over records matched to gold questions by qid."""
    ctx = ContextType(context_type)
    by_qid = {q.qid: q for q in gold}
    if len(by_qid) != len(gold):
        raise QidMismatch("duplicate qids in gold questions")
    rec_qids = [r.qid for r in records]
    if len(set(rec_qids)) != len(rec_qids):
        raise QidMismatch("duplicate qids in records")
    missing = sorted(set(by_qid) - set(rec_qids))
    extra = sorted(set(rec_qids) - set(by_qid))
    if missing or extra:
        raise QidMismatch(f"missing records for {missing}; unknown qids {extra}")
    flag_applicable = ctx in AC_APPLICABLE
    pairs = [(r, by_qid[r.qid]) for r in records]
    n, ca, ac, cc = _score_subset(pairs, flag_applicable)
    by_kind = []
    for kind in sorted({q.kind for _, q in pairs}, key=lambda k: k.value):
        subset = [(r, q) for r, q in pairs if q.kind is kind]
        kn, kca, kac, kcc = _score_subset(subset, flag_applicable)
        by_kind.append((kind.value, KindBreakdown(kn, kca, kac, kcc)))
    return MetricsReport(
        n_questions=n,
        ca=ca,
        ac=ac,
        cc=cc,
        by_kind=tuple(by_kind),
        context_type=ctx.value,
    )


def accuracy_ratio(cc_m: float, cc_dialog: float, cc_h: float) -> float:
    """Percent of the human-over-dialog gap closed by the method.

    May be negative (worse than dialog alone) or exceed 100 (better than
    the human track).
    """
    if cc_h == cc_dialog:
        raise DegenerateBaseline("human and dialog baselines coincide")
    return 100.0 * (cc_m - cc_dialog) / (cc_h - cc_dialog)


# ---------------------------------------------------------------------------
# Submission evaluation


@dataclass(frozen=True)
class EvaluationResult:
    dataset_id: str
    report: MetricsReport
    ratios: Mapping[str, float]

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "report": self.report.to_dict(),
            "ratios": dict(self.ratios),
        }


def evaluate_submission(
    submission: Submission,
    store: QuestionStore,
    gateway: Gateway,
    context_type: ContextType = ContextType.DIALOG_PLUS_AD,
) -> EvaluationResult:
    """Answer every stored question with the submission's ADs as context.

    Segments the submission covers run under context_type with the
    submitted ADs; segments it does not cover fall back to dialog-only
    when the requested type needs ADs, so an empty submission reduces to
    the dialog baseline. Ratios compare per-kind CC against the stored
    toplines.
    """
    known = set(store.segment_ids())
    unknown = sorted(s.segment_id for s in submission.segments if s.segment_id not in known)
    if unknown:
        raise UnknownSegment(unknown)

    def run_segment(segment: VideoSegment) -> tuple[AnswerRecord, ...]:
        questions = store.questions_for(segment.segment_id)
        if not questions:
            return ()
        ads = submission.ads_for(segment.segment_id)
        ctx_type = context_type
        if ads is None and ctx_type in _NEEDS_ADS:
            ctx_type = ContextType.DIALOG_ONLY
        context = assemble_context(
            segment,
            ctx_type,
            ad_source=list(ads) if ads is not None and ctx_type in _NEEDS_ADS else None,
            movie_title=store.movie_titles.get(segment.movie_id),
        )
        return answer_questions(questions, context, ctx_type, gateway)

    with ThreadPoolExecutor(max_workers=gateway.config.max_in_flight) as pool:
        per_segment = list(pool.map(run_segment, store.segments))
    records = [r for batch in per_segment for r in batch]
    report = score(records, store.questions, context_type)
    ratios: dict[str, float] = {}
    for kind, brk in report.by_kind:
        top = store.toplines.get(kind)
        if top is None or brk.cc is None:
            continue
        ratios[kind] = accuracy_ratio(brk.cc, top.cc_dialog, top.cc_h)
    return EvaluationResult(
        dataset_id=store.dataset_id, report=report, ratios=ratios
    )
