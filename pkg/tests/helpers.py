"""Shared builders for the test suite."""

from __future__ import annotations

import json
import random

from adeval.gateway import Gateway, MockProvider, ProviderConfig
from adeval.model import (
    LineKind,
    MCQA,
    QuestionKind,
    Track,
    TranscriptLine,
    TimeTransform,
    TransformPiece,
    VideoSegment,
)

WORDS = (
    "storm harbor lantern widow bell echo ladder crow velvet marsh "
    "copper thread attic salt mirror ember fox hollow tide brim"
).split()


def sentence(rng: random.Random, n: int = 7, tag: str = "") -> str:
    body = " ".join(rng.choice(WORDS) for _ in range(n))
    return f"{tag} {body}".strip()


def line(
    index: int,
    start: float,
    end: float,
    text: str = "some words here",
    kind: LineKind = LineKind.AD,
) -> TranscriptLine:
    return TranscriptLine(index=index, start_s=start, end_s=end, text=text, kind=kind)


def track(lines, movie_id: str = "mv", source_id: str = "s1") -> Track:
    return Track(movie_id=movie_id, source_id=source_id, lines=tuple(lines))


def gw(responses: dict | None = None, **config_kwargs) -> Gateway:
    cfg = ProviderConfig(**config_kwargs)
    return Gateway(MockProvider(responses or {}), cfg)


def single_piece(slope: float = 1.0, offset: float = 0.0) -> TimeTransform:
    return TimeTransform(
        pieces=(TransformPiece(0.0, float("inf"), slope, offset),)
    )


def paired_tracks(
    rng: random.Random,
    n_lines: int = 40,
    slope: float = 1.0,
    offset: float = 0.0,
    gap: float = 2.0,
    dur: float = 2.5,
    jitter: float = 0.0,
    ad_every: int = 2,
) -> tuple[Track, Track]:
    """Two tracks of one movie: same dialogue text, ADs in correspondence,
    track-2 timeline = slope * t + offset (+- jitter on anchors)."""
    l1, l2 = [], []
    t = 5.0
    for k in range(n_lines):
        is_ad = k % ad_every == (ad_every - 1)
        kind = LineKind.AD if is_ad else LineKind.DIALOGUE
        text = sentence(rng, tag=f"w{k}")
        j = rng.uniform(-jitter, jitter) if jitter else 0.0
        l1.append(TranscriptLine(k, t, t + dur, text, kind))
        l2.append(
            TranscriptLine(
                k, slope * t + offset + j, slope * (t + dur) + offset + j, text, kind
            )
        )
        t += dur + gap
    return track(l1, source_id="s1"), track(l2, source_id="s2")


def make_segment(
    segment_id: str = "mv-seg000",
    movie_id: str = "mv",
    n_lines: int = 6,
    plot: tuple[str, ...] = ("Alice arrives in town.",),
) -> VideoSegment:
    lines = tuple(
        TranscriptLine(
            k,
            3.0 * k,
            3.0 * k + 2.0,
            f"line {k} words",
            LineKind.AD if k % 3 == 0 else LineKind.DIALOGUE,
        )
        for k in range(n_lines)
    )
    return VideoSegment(
        segment_id=segment_id,
        movie_id=movie_id,
        start_s=lines[0].start_s,
        end_s=lines[-1].end_s,
        lines=lines,
        plot_sentences=plot,
    )


def make_question(
    qid: str,
    segment_id: str = "mv-seg000",
    kind: QuestionKind = QuestionKind.VA,
    correct: str = "A",
) -> MCQA:
    return MCQA(
        qid=qid,
        segment_id=segment_id,
        kind=kind,
        question=f"What happens in {qid}?",
        options=("opt a", "opt b", "opt c", "opt d", "opt e"),
        correct=correct,
        rationale="As specified in the audio description, it happens.",
    )


def gen_reply(questions: list[dict]) -> str:
    """JSON reply for the question-generation shape."""
    return json.dumps(questions)


def qa_item(
    stem: str,
    correct_pos: int = 0,
    rationale: str = "As specified in the audio description, so it is.",
) -> dict:
    letters = "ABCDE"
    options = [f"{letters[k]}) choice {letters[k].lower()} for {stem}" for k in range(5)]
    return {
        "question": stem,
        "options": options,
        "correct_answer": options[correct_pos],
        "rationale": rationale,
    }
