"""LLM-driven scene segmentation of a full-movie script against a plot.

The model proposes (start line, end line, plot text) triples; this module
validates them into a guaranteed partition: full line coverage, every plot
sentence in exactly one span, sentence order monotone with span order. One
semantic repair round-trip is attempted; whatever still violates after that
is fixed deterministically with logged warnings, never rejected.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Any, Sequence

from .errors import EmptyPlot
from .gateway import Gateway
from .model import Track, VideoSegment
from .prompts import TEMPLATES, script_lines
from .textnorm import tokenize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SceneSpan:
    """One scene: a contiguous run of script lines plus its plot sentences.

    first_line/last_line are 0-based positions into the track's line tuple
    (the prompt numbers lines from 1; conversion happens at parse time).
    """

    first_line: int
    last_line: int
    plot_sentences: tuple[str, ...] = ()


_TRIPLE_SHAPE = {
    "type": "array",
    "minItems": 1,
    "items": {
        "type": "array",
        "prefixItems": [{"type": "integer"}, {"type": "integer"}, {}],
        "minItems": 3,
        "maxItems": 3,
    },
}

_REPAIR_NOTE = """\
Your previous scene segmentation violated these constraints:
{problems}

Previous output:
{previous}

Produce a corrected segmentation of the same script. Return only a JSON list of
[start_line, end_line, plot_sentence_text_or_null] triples.

{original}
"""


def _normalize(text: str) -> str:
    return " ".join(tokenize(text))


def _plot_field_text(field: Any) -> str:
    if field is None:
        return ""
    if isinstance(field, list):
        return " ".join(str(x) for x in field)
    text = str(field)
    return "" if text.strip().lower() == "none" else text


def _match_sentences(field: Any, plot_sentences: Sequence[str]) -> list[int]:
    """Plot sentence positions whose normalized text occurs in the field."""
    norm_field = _normalize(_plot_field_text(field))
    if not norm_field:
        return []
    hits = []
    for pos, sentence in enumerate(plot_sentences):
        norm = _normalize(sentence)
        if norm and norm in norm_field:
            hits.append(pos)
    return hits


def _parse_triples(
    triples: list, n_lines: int, plot_sentences: Sequence[str]
) -> tuple[list[tuple[int, int]], dict[int, list[int]]]:
    """Convert raw triples to 0-based spans plus span -> plot positions."""
    spans: list[tuple[int, int]] = []
    assigned: dict[int, list[int]] = {}
    for raw in triples:
        first = max(0, min(int(raw[0]) - 1, n_lines - 1))
        last = max(0, min(int(raw[1]) - 1, n_lines - 1))
        if last < first:
            first, last = last, first
        assigned[len(spans)] = _match_sentences(raw[2], plot_sentences)
        spans.append((first, last))
    return spans, assigned


def validate_spans(
    spans: Sequence[tuple[int, int]],
    assigned: dict[int, list[int]],
    n_lines: int,
    n_plot: int,
) -> list[str]:
    """Every violated partition constraint, empty when clean."""
    out = []
    order = sorted(range(len(spans)), key=lambda k: spans[k])
    expected = 0
    for k in order:
        first, last = spans[k]
        if first != expected:
            if first > expected:
                out.append(f"gap: lines {expected + 1}..{first} belong to no scene")
            else:
                out.append(f"overlap: line {first + 1} is in more than one scene")
        expected = max(expected, last + 1)
    if expected != n_lines:
        out.append(f"gap: lines {expected + 1}..{n_lines} belong to no scene")
    counts = [0] * n_plot
    for positions in assigned.values():
        for pos in positions:
            counts[pos] += 1
    for pos, c in enumerate(counts):
        if c == 0:
            out.append(f"plot sentence {pos + 1} is not associated to any scene")
        elif c > 1:
            out.append(f"plot sentence {pos + 1} is associated to {c} scenes")
    seq = []
    for k in order:
        for pos in sorted(assigned.get(k, [])):
            seq.append((pos, k))
    seq.sort(key=lambda t: t[0])
    span_seq = [k for _, k in seq]
    ranks = {k: r for r, k in enumerate(order)}
    rank_seq = [ranks[k] for k in span_seq]
    if any(b < a for a, b in zip(rank_seq, rank_seq[1:])):
        out.append("plot sentence order does not follow scene order")
    return out


def _longest_non_decreasing(seq: list[int]) -> list[int]:
    """Positions of a longest non-decreasing subsequence (leftmost ties)."""
    if not seq:
        return []
    best_len = [1] * len(seq)
    prev = [-1] * len(seq)
    for b in range(len(seq)):
        for a in range(b):
            if seq[a] <= seq[b] and best_len[a] + 1 > best_len[b]:
                best_len[b] = best_len[a] + 1
                prev[b] = a
    end = max(range(len(seq)), key=lambda k: (best_len[k], -k))
    keep = []
    while end != -1:
        keep.append(end)
        end = prev[end]
    return keep[::-1]


def _auto_repair(
    spans: list[tuple[int, int]],
    assigned: dict[int, list[int]],
    n_lines: int,
    n_plot: int,
) -> list[tuple[int, int, tuple[int, ...]]]:
    order = sorted(range(len(spans)), key=lambda k: spans[k])
    fixed: list[list[int]] = []
    sentence_span: dict[int, int] = {}
    for k in order:
        first, last = spans[k]
        if fixed and first <= fixed[-1][1]:
            mid = (fixed[-1][1] + first) // 2
            logger.warning(
                "scene overlap at line %d; cutting at line %d", first + 1, mid + 1
            )
            fixed[-1][1] = mid
            first = mid + 1
            if fixed[-1][0] > fixed[-1][1]:
                logger.warning("dropping scene emptied by the overlap cut")
                fixed.pop()
        if first > last:
            continue
        fixed.append([first, last])
        for pos in assigned.get(k, []):
            # duplicate assignment keeps the earliest scene
            sentence_span.setdefault(pos, len(fixed) - 1)
    if not fixed:
        fixed = [[0, n_lines - 1]]
    if fixed[0][0] != 0:
        logger.warning("leading gap before line %d; extending first scene", fixed[0][0] + 1)
        fixed[0][0] = 0
    for k in range(1, len(fixed)):
        if fixed[k][0] > fixed[k - 1][1] + 1:
            logger.warning(
                "gap before line %d; absorbing into preceding scene", fixed[k][0] + 1
            )
            fixed[k - 1][1] = fixed[k][0] - 1
    if fixed[-1][1] != n_lines - 1:
        logger.warning("trailing gap after line %d; extending last scene", fixed[-1][1] + 1)
        fixed[-1][1] = n_lines - 1

    positions = sorted(sentence_span)
    span_seq = [sentence_span[p] for p in positions]
    keep = set(_longest_non_decreasing(span_seq))
    final: dict[int, int] = {}
    for rank, pos in enumerate(positions):
        if rank in keep:
            final[pos] = sentence_span[pos]
        else:
            logger.warning("plot sentence %d breaks scene order; reattaching", pos + 1)
    for pos in range(n_plot):
        if pos in final:
            continue
        left = [final[p] for p in final if p < pos]
        right = [final[p] for p in final if p > pos]
        lo = max(left) if left else 0
        hi = min(right) if right else len(fixed) - 1
        target = (lo + hi + 1) // 2
        logger.warning(
            "plot sentence %d unassigned; attaching to scene %d", pos + 1, target + 1
        )
        final[pos] = target

    by_span: dict[int, list[int]] = {}
    for pos, k in final.items():
        by_span.setdefault(k, []).append(pos)
    return [
        (first, last, tuple(sorted(by_span.get(k, ()))))
        for k, (first, last) in enumerate(fixed)
    ]


def _finalize(
    spans: list[tuple[int, int]],
    assigned: dict[int, list[int]],
    plot_sentences: Sequence[str],
) -> tuple[SceneSpan, ...]:
    out = []
    order = sorted(range(len(spans)), key=lambda k: spans[k])
    for k in order:
        first, last = spans[k]
        out.append(
            SceneSpan(
                first,
                last,
                tuple(plot_sentences[p] for p in sorted(assigned.get(k, []))),
            )
        )
    return tuple(out)


def segment_movie(
    track: Track, plot_sentences: Sequence[str], gateway: Gateway
) -> tuple[SceneSpan, ...]:
    """Segment a classified track into plot-aligned scenes via the LLM."""
    if not plot_sentences:
        raise EmptyPlot("cannot segment without plot sentences")
    if not track.lines:
        raise ValueError("track has no lines")
    n_lines = len(track.lines)
    prompt = TEMPLATES["segment"].render(
        movie_script=script_lines(track.lines),
        plot_synopsis=" ".join(plot_sentences),
    )
    triples = gateway.complete(prompt, _TRIPLE_SHAPE)
    spans, assigned = _parse_triples(triples, n_lines, plot_sentences)
    problems = validate_spans(spans, assigned, n_lines, len(plot_sentences))
    if problems:
        repair = _REPAIR_NOTE.format(
            problems="\n".join(f"- {p}" for p in problems),
            previous=json.dumps(triples),
            original=prompt,
        )
        triples = gateway.complete(repair, _TRIPLE_SHAPE)
        spans, assigned = _parse_triples(triples, n_lines, plot_sentences)
        problems = validate_spans(spans, assigned, n_lines, len(plot_sentences))
    if not problems:
        return _finalize(spans, assigned, plot_sentences)
    for p in problems:
        logger.warning("segmentation constraint still violated: %s", p)
    repaired = _auto_repair(spans, assigned, n_lines, len(plot_sentences))
    return tuple(
        SceneSpan(first, last, tuple(plot_sentences[p] for p in positions))
        for first, last, positions in repaired
    )


def build_segments(
    spans: Sequence[SceneSpan], track: Track
) -> tuple[VideoSegment, ...]:
    """One VideoSegment per scene span, timed by its first and last lines."""
    segments = []
    for k, span in enumerate(spans):
        lines = track.lines[span.first_line : span.last_line + 1]
        segments.append(
            VideoSegment(
                segment_id=f"{track.movie_id}-seg{k:03d}",
                movie_id=track.movie_id,
                start_s=lines[0].start_s,
                end_s=max(ln.end_s for ln in lines),
                lines=lines,
                plot_sentences=span.plot_sentences,
            )
        )
    return tuple(segments)
