"""Two-track alignment: line classification, dialog anchoring, time
transform fitting, and the AD mapping arithmetic.

The mapping logic follows a fixed recipe: project a track-1 AD interval into
track-2 time through the transform piece covering its start, pad it with a
buffer on each side, and keep every candidate whose overlap score (shared
length over the shorter length) strictly exceeds the threshold. The same
recipe runs in reverse through the algebraic inverse of the transform, and
the two directed pair sets are unioned.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInterval, InsufficientAnchors, SchemaError
from .gateway import Gateway
from .model import (
    ADMapping,
    LineKind,
    MappingPair,
    TimeTransform,
    Track,
    TranscriptLine,
    TransformPiece,
)
from .prompts import TEMPLATES, numbered_sentences
from .similarity import CiderCorpus, cider, group_references
from .textnorm import token_set_jaccard

logger = logging.getLogger(__name__)

DIALOGUE_TAG = "dialogue"
AD_TAG = "AD"

STRONG_MATCH = 0.6
SKIP_PENALTY = 0.45
MIN_ANCHORS = 5
RESIDUAL_TOL_S = 5.0


# ---------------------------------------------------------------------------
# Line classification


def _label_shape(n: int) -> dict:
    return {
        "type": "array",
        "items": {"type": "string", "enum": [DIALOGUE_TAG, AD_TAG]},
        "minItems": n,
        "maxItems": n,
    }


def _classify_prompt(texts: list[str]) -> str:
    return TEMPLATES["classify"].render(
        dialogue_tag=DIALOGUE_TAG,
        ad_tag=AD_TAG,
        input="\n" + numbered_sentences(texts),
    )


_LABEL_TO_KIND = {DIALOGUE_TAG: LineKind.DIALOGUE, AD_TAG: LineKind.AD}


def _classify_batch(gateway: Gateway, lines: list[TranscriptLine]) -> list[LineKind]:
    texts = [ln.text for ln in lines]
    try:
        labels = gateway.complete(_classify_prompt(texts), _label_shape(len(texts)))
    except SchemaError:
        logger.warning(
            "batch of %d lines failed shape validation; falling back to per-line calls",
            len(texts),
        )
        labels = [
            gateway.complete(_classify_prompt([t]), _label_shape(1))[0] for t in texts
        ]
    return [_LABEL_TO_KIND[label] for label in labels]


def classify_lines(track: Track, gateway: Gateway, batch_size: int = 40) -> Track:
    """Label every line AD or Dialogue, preserving order.

    Batches run concurrently; a batch whose output count cannot be repaired
    falls back to one call per line before giving up.
    """
    if not track.lines:
        return track
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    batches = [
        list(track.lines[k : k + batch_size])
        for k in range(0, len(track.lines), batch_size)
    ]
    with ThreadPoolExecutor(max_workers=gateway.config.max_in_flight) as pool:
        results = list(pool.map(lambda b: _classify_batch(gateway, b), batches))
    kinds = [kind for batch in results for kind in batch]
    new_lines = tuple(
        TranscriptLine(ln.index, ln.start_s, ln.end_s, ln.text, kind)
        for ln, kind in zip(track.lines, kinds)
    )
    return Track(track.movie_id, track.source_id, new_lines)


# ---------------------------------------------------------------------------
# Dialog anchoring


@dataclass(frozen=True)
class AnchorPair:
    """A strongly matching dialog line pair (original line indices)."""

    i: int
    j: int
    similarity: float


def find_anchors(
    t1: Track,
    t2: Track,
    strong_match: float = STRONG_MATCH,
    skip_penalty: float = SKIP_PENALTY,
    min_anchors: int = MIN_ANCHORS,
) -> tuple[AnchorPair, ...]:
    """Monotone dialog correspondences between two classified tracks.

    Alignment minimizes total cost over matches (1 - similarity) and skips
    (flat penalty per skipped line); matched pairs below the strong-match
    similarity are then discarded.
    """
    d1 = t1.dialogue_lines()
    d2 = t2.dialogue_lines()
    n, m = len(d1), len(d2)
    sets1 = [ln.text for ln in d1]
    sets2 = [ln.text for ln in d2]
    sim = np.zeros((n, m))
    for a in range(n):
        for b in range(m):
            sim[a, b] = token_set_jaccard(sets1[a], sets2[b])
    INF = float("inf")
    cost = np.full((n + 1, m + 1), INF)
    cost[0, :] = np.arange(m + 1) * skip_penalty
    cost[:, 0] = np.arange(n + 1) * skip_penalty
    for a in range(1, n + 1):
        for b in range(1, m + 1):
            cost[a, b] = min(
                cost[a - 1, b - 1] + (1.0 - sim[a - 1, b - 1]),
                cost[a - 1, b] + skip_penalty,
                cost[a, b - 1] + skip_penalty,
            )
    anchors: list[AnchorPair] = []
    a, b = n, m
    while a > 0 and b > 0:
        step = cost[a - 1, b - 1] + (1.0 - sim[a - 1, b - 1])
        if math.isclose(cost[a, b], step, rel_tol=0.0, abs_tol=1e-12):
            if sim[a - 1, b - 1] >= strong_match:
                anchors.append(
                    AnchorPair(d1[a - 1].index, d2[b - 1].index, sim[a - 1, b - 1])
                )
            a, b = a - 1, b - 1
        elif math.isclose(
            cost[a, b], cost[a - 1, b] + skip_penalty, rel_tol=0.0, abs_tol=1e-12
        ):
            a -= 1
        else:
            b -= 1
    anchors.reverse()
    if len(anchors) < min_anchors:
        raise InsufficientAnchors(
            f"found {len(anchors)} strong dialog anchors; need at least {min_anchors}"
        )
    return tuple(anchors)


# ---------------------------------------------------------------------------
# Time transform fitting


def _lsq(xs: np.ndarray, ys: np.ndarray) -> tuple[float, float]:
    slope, offset = np.polyfit(xs, ys, 1)
    return float(slope), float(offset)


def _fit_recursive(
    xs: np.ndarray, ys: np.ndarray, residual_tol: float, min_piece: int
) -> list[tuple[np.ndarray, float, float]]:
    slope, offset = _lsq(xs, ys)
    residuals = ys - (slope * xs + offset)
    if np.max(np.abs(residuals)) <= residual_tol or len(xs) < 2 * min_piece:
        return [(xs, slope, offset)]
    # A regime change shows up as a jump in consecutive signed residuals;
    # split there, keeping min_piece anchors on each side.
    jumps = np.abs(np.diff(residuals))
    lo, hi = min_piece - 1, len(xs) - min_piece
    window = jumps[lo:hi]
    if window.size == 0:
        return [(xs, slope, offset)]
    k = lo + int(np.argmax(window))
    left = _fit_recursive(xs[: k + 1], ys[: k + 1], residual_tol, min_piece)
    right = _fit_recursive(xs[k + 1 :], ys[k + 1 :], residual_tol, min_piece)
    return left + right


def fit_transform(
    anchors: tuple[AnchorPair, ...] | list[AnchorPair],
    t1: Track,
    t2: Track,
    residual_tol: float = RESIDUAL_TOL_S,
    min_piece: int = MIN_ANCHORS,
) -> TimeTransform:
    """Least-squares piecewise-linear fit of track-2 start times against
    track-1 start times over the anchor pairs.

    The fit splits recursively while any residual exceeds residual_tol and
    both sides can keep min_piece anchors; piece boundaries sit midway
    between the neighboring anchors.
    """
    if len(anchors) < min_piece:
        raise InsufficientAnchors(
            f"{len(anchors)} anchors cannot support a fit (need {min_piece})"
        )
    xs = np.array([t1.line_by_index(a.i).start_s for a in anchors])
    ys = np.array([t2.line_by_index(a.j).start_s for a in anchors])
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]
    fitted = _fit_recursive(xs, ys, residual_tol, min_piece)
    pieces = []
    for k, (piece_xs, slope, offset) in enumerate(fitted):
        if k == 0:
            start = 0.0
        else:
            prev_xs = fitted[k - 1][0]
            start = (prev_xs[-1] + piece_xs[0]) / 2.0
        end = math.inf
        if k + 1 < len(fitted):
            next_xs = fitted[k + 1][0]
            end = (piece_xs[-1] + next_xs[0]) / 2.0
        pieces.append(TransformPiece(start, end, slope, offset))
    return TimeTransform(tuple(pieces))


# ---------------------------------------------------------------------------
# Projection


def piece_for(transform: TimeTransform, t: float) -> TransformPiece:
    """The piece whose track-1 validity range covers t (clamped at the ends)."""
    for p in transform.pieces:
        if p.valid_from_s <= t < p.valid_to_s:
            return p
    return transform.pieces[0] if t < transform.pieces[0].valid_from_s else transform.pieces[-1]


def project_time(transform: TimeTransform, t: float) -> float:
    p = piece_for(transform, t)
    return p.slope * t + p.offset


def project_interval(
    transform: TimeTransform, start_s: float, end_s: float, buffer_s: float = 0.0
) -> tuple[float, float]:
    """Map a track-1 interval to track-2 time and widen it by buffer_s.

    Both endpoints go through the piece covering the interval's start, so an
    interval straddling a breakpoint stays linear.
    """
    p = piece_for(transform, start_s)
    return (
        p.slope * start_s + p.offset - buffer_s,
        p.slope * end_s + p.offset + buffer_s,
    )


def _image_range(p: TransformPiece) -> tuple[float, float]:
    lo = p.slope * p.valid_from_s + p.offset
    hi = math.inf if math.isinf(p.valid_to_s) else p.slope * p.valid_to_s + p.offset
    return lo, hi


def inverse_piece_for(transform: TimeTransform, t2_time: float) -> TransformPiece:
    """The piece whose track-2 image covers t2_time, else the nearest image."""
    best, best_dist = None, math.inf
    for p in transform.pieces:
        lo, hi = _image_range(p)
        if lo <= t2_time < hi:
            return p
        dist = max(lo - t2_time, 0.0) + max(t2_time - hi, 0.0)
        if dist < best_dist:
            best, best_dist = p, dist
    assert best is not None
    return best


def project_interval_inverse(
    transform: TimeTransform, start_s: float, end_s: float, buffer_s: float = 0.0
) -> tuple[float, float]:
    """Map a track-2 interval back to track-1 time and widen it by buffer_s."""
    p = inverse_piece_for(transform, start_s)
    return (
        (start_s - p.offset) / p.slope - buffer_s,
        (end_s - p.offset) / p.slope + buffer_s,
    )


# ---------------------------------------------------------------------------
# AD mapping


def overlap_score(
    a: tuple[float, float], b: tuple[float, float]
) -> float:
    """Shared length over the shorter interval's length, clamped to [0, 1]."""
    if not a[1] > a[0]:
        raise DegenerateInterval(f"interval {a} has no positive length")
    if not b[1] > b[0]:
        raise DegenerateInterval(f"interval {b} has no positive length")
    inter = min(a[1], b[1]) - max(a[0], b[0])
    if inter <= 0.0:
        return 0.0
    return min(inter / min(a[1] - a[0], b[1] - b[0]), 1.0)


def map_ads(
    t1: Track,
    t2: Track,
    transform: TimeTransform,
    threshold: float = 0.5,
    buffer_s: float = 1.0,
) -> ADMapping:
    """Build the cross-track AD mapping by running the projection recipe in
    both directions and unioning the resulting pairs.

    A pair found in both directions keeps the larger of the two overlap
    scores. Strict inequality at the threshold: a score exactly equal to it
    does not create a pair.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    ads1 = t1.ad_lines()
    ads2 = t2.ad_lines()
    scores: dict[tuple[int, int], float] = {}
    for a in ads1:
        proj = project_interval(transform, a.start_s, a.end_s, buffer_s)
        for b in ads2:
            o = overlap_score(proj, (b.start_s, b.end_s))
            if o > threshold:
                key = (a.index, b.index)
                scores[key] = max(scores.get(key, 0.0), o)
    for b in ads2:
        proj = project_interval_inverse(transform, b.start_s, b.end_s, buffer_s)
        for a in ads1:
            o = overlap_score(proj, (a.start_s, a.end_s))
            if o > threshold:
                key = (a.index, b.index)
                scores[key] = max(scores.get(key, 0.0), o)
    pairs = tuple(
        MappingPair(i, j, scores[(i, j)]) for i, j in sorted(scores)
    )
    mapped1 = {p.i for p in pairs}
    mapped2 = {p.j for p in pairs}
    return ADMapping(
        pairs=pairs,
        non_aligned_t1=frozenset(a.index for a in ads1 if a.index not in mapped1),
        non_aligned_t2=frozenset(b.index for b in ads2 if b.index not in mapped2),
        threshold=threshold,
        buffer_s=buffer_s,
    )


# ---------------------------------------------------------------------------
# Threshold sweep


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    non_aligned_percent: float
    mean_cider: float | None


def sweep_thresholds(
    t1: Track,
    t2: Track,
    transform: TimeTransform,
    thresholds: list[float] | tuple[float, ...],
    buffer_s: float = 1.0,
    corpus: CiderCorpus | None = None,
) -> tuple[SweepPoint, ...]:
    """One mapping per threshold, with the non-aligned fraction and the mean
    CIDEr over aligned pairs at that threshold.

    Thresholds must be strictly increasing within (0, 1]. The default CIDEr
    corpus is the track-2 AD texts.
    """
    ths = list(thresholds)
    if not ths:
        raise ValueError("no thresholds given")
    if any(not 0.0 < t <= 1.0 for t in ths):
        raise ValueError("thresholds must lie in (0, 1]")
    if any(b <= a for a, b in zip(ths, ths[1:])):
        raise ValueError("thresholds must be strictly increasing")
    n_total = len(t1.ad_lines()) + len(t2.ad_lines())
    if corpus is None:
        refs = [ln.text for ln in t2.ad_lines()]
        corpus = CiderCorpus(refs) if refs else None
    by_index1 = {ln.index: ln for ln in t1.ad_lines()}
    points = []
    for th in ths:
        mapping = map_ads(t1, t2, transform, threshold=th, buffer_s=buffer_s)
        if n_total:
            pct = (
                (len(mapping.non_aligned_t1) + len(mapping.non_aligned_t2))
                / n_total
                * 100.0
            )
        else:
            pct = 0.0
        mean_cider = None
        if mapping.pairs and corpus is not None:
            groups = group_references(mapping, t2)
            vals = [
                cider(by_index1[i].text, ref_text, corpus)
                for i, _, ref_text in groups
            ]
            mean_cider = float(np.mean(vals))
        points.append(SweepPoint(th, pct, mean_cider))
    return tuple(points)
