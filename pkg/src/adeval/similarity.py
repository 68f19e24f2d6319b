"""Lexical and embedding similarity over mapped AD pairs.

The n-gram metric is the plain consensus form: for n = 1..4, 10 times the
cosine between TF-IDF n-gram count vectors, averaged uniformly over n. IDF
is log(N / df) with document frequencies taken over a fixed reference
corpus and floored at 1. No stemming, no length penalty.
"""

from __future__ import annotations

import math
import statistics
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyText, TooFewPairs
from .gateway import Gateway
from .model import ADMapping, Track
from .textnorm import tokenize


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(
        tuple(tokens[k : k + n]) for k in range(len(tokens) - n + 1)
    )


class CiderCorpus:
    """Document frequencies and IDF over a fixed set of reference texts."""

    def __init__(self, references: Sequence[str], max_n: int = 4) -> None:
        if not references:
            raise ValueError("corpus needs at least one reference")
        self.max_n = max_n
        self.n_docs = len(references)
        self._df: list[Counter] = [Counter() for _ in range(max_n)]
        for ref in references:
            tokens = tokenize(ref)
            for n in range(1, max_n + 1):
                for gram in set(_ngrams(tokens, n)):
                    self._df[n - 1][gram] += 1

    def idf(self, gram: tuple, n: int) -> float:
        df = max(self._df[n - 1].get(gram, 0), 1)
        return math.log(self.n_docs / df)


def _tfidf_cosine(cand: Counter, ref: Counter, corpus: CiderCorpus, n: int) -> float:
    # Sorted so the accumulation order (and thus the exact float result)
    # does not depend on hash randomization across processes.
    grams = sorted(set(cand) | set(ref))
    dot = norm_c = norm_r = 0.0
    for gram in grams:
        w = corpus.idf(gram, n)
        c = cand.get(gram, 0) * w
        r = ref.get(gram, 0) * w
        dot += c * r
        norm_c += c * c
        norm_r += r * r
    if norm_c == 0.0 or norm_r == 0.0:
        return 0.0
    return dot / math.sqrt(norm_c * norm_r)


def cider(candidate: str, reference: str, corpus: CiderCorpus) -> float:
    """Consensus n-gram similarity of candidate against one reference."""
    cand_tokens = tokenize(candidate)
    ref_tokens = tokenize(reference)
    if not cand_tokens:
        raise EmptyText("candidate has no tokens")
    if not ref_tokens:
        raise EmptyText("reference has no tokens")
    per_n = []
    for n in range(1, corpus.max_n + 1):
        per_n.append(
            10.0
            * _tfidf_cosine(
                _ngrams(cand_tokens, n), _ngrams(ref_tokens, n), corpus, n
            )
        )
    return sum(per_n) / corpus.max_n


# ---------------------------------------------------------------------------
# Pair scoring


@dataclass(frozen=True)
class PairScore:
    """Similarity of one track-1 AD against its mapped track-2 text.

    t2_indices lists every mapped counterpart; their texts were concatenated
    in time order to form the reference.
    """

    i: int
    t2_indices: tuple[int, ...]
    bert_sim: float
    cider: float

    def to_dict(self) -> dict:
        return {
            "i": self.i,
            "t2_indices": list(self.t2_indices),
            "bert_sim": self.bert_sim,
            "cider": self.cider,
        }


def group_references(
    mapping: ADMapping, t2: Track
) -> list[tuple[int, tuple[int, ...], str]]:
    """Group mapping pairs by track-1 index; concatenate the track-2 texts
    in time order into one reference string per group."""
    by_i: dict[int, list[int]] = {}
    for p in mapping.pairs:
        by_i.setdefault(p.i, []).append(p.j)
    groups = []
    for i in sorted(by_i):
        js = sorted(by_i[i], key=lambda j: (t2.line_by_index(j).start_s, j))
        text = " ".join(t2.line_by_index(j).text for j in js)
        groups.append((i, tuple(js), text))
    return groups


def pair_scores(
    mapping: ADMapping,
    t1: Track,
    t2: Track,
    gateway: Gateway,
    corpus: CiderCorpus | None = None,
) -> tuple[PairScore, ...]:
    """Embedding and n-gram similarity for every mapped track-1 AD.

    The default corpus for document frequencies is the track-2 AD texts.
    """
    if not mapping.pairs:
        return ()
    if corpus is None:
        corpus = CiderCorpus([ln.text for ln in t2.ad_lines()])
    groups = group_references(mapping, t2)
    candidates = [t1.line_by_index(i).text for i, _, _ in groups]
    references = [text for _, _, text in groups]
    vectors = gateway.embed(candidates + references)
    cand_vecs, ref_vecs = vectors[: len(groups)], vectors[len(groups) :]
    scores = []
    for k, (i, js, ref_text) in enumerate(groups):
        cos = float(np.dot(cand_vecs[k], ref_vecs[k]))
        scores.append(
            PairScore(
                i=i,
                t2_indices=js,
                bert_sim=100.0 * cos,
                cider=cider(candidates[k], ref_text, corpus),
            )
        )
    return tuple(scores)


# ---------------------------------------------------------------------------
# Quadrant report


@dataclass(frozen=True)
class QuadrantReport:
    """Pair counts split by the medians of the two similarity axes.

    "High" means strictly greater than the median, so on degenerate
    distributions (all values equal) everything lands in the low-low cell.
    Zero-lexical-score pairs are counted in their quadrant and again in
    zero_cider_percent.
    """

    median_b: float
    median_c: float
    high_b_high_c: float
    low_b_high_c: float
    low_b_low_c: float
    high_b_low_c: float
    zero_cider_percent: float
    n_pairs: int

    def to_dict(self) -> dict:
        return {
            "median_b": self.median_b,
            "median_c": self.median_c,
            "high_b_high_c": self.high_b_high_c,
            "low_b_high_c": self.low_b_high_c,
            "low_b_low_c": self.low_b_low_c,
            "high_b_low_c": self.high_b_low_c,
            "zero_cider_percent": self.zero_cider_percent,
            "n_pairs": self.n_pairs,
        }


def quadrant_report(scores: Sequence[PairScore]) -> QuadrantReport:
    if len(scores) < 2:
        raise TooFewPairs(f"need at least 2 scores, got {len(scores)}")
    bs = [s.bert_sim for s in scores]
    cs = [s.cider for s in scores]
    med_b = statistics.median(bs)
    med_c = statistics.median(cs)
    n = len(scores)
    hh = sum(1 for s in scores if s.bert_sim > med_b and s.cider > med_c)
    lh = sum(1 for s in scores if s.bert_sim <= med_b and s.cider > med_c)
    ll = sum(1 for s in scores if s.bert_sim <= med_b and s.cider <= med_c)
    hl = sum(1 for s in scores if s.bert_sim > med_b and s.cider <= med_c)
    zero = sum(1 for s in scores if s.cider == 0.0)
    return QuadrantReport(
        median_b=med_b,
        median_c=med_c,
        high_b_high_c=100.0 * hh / n,
        low_b_high_c=100.0 * lh / n,
        low_b_low_c=100.0 * ll / n,
        high_b_low_c=100.0 * hl / n,
        zero_cider_percent=100.0 * zero / n,
        n_pairs=n,
    )


# ---------------------------------------------------------------------------
# Track-pair summary


def _aligned_percent(n_mapped: int, n_non_aligned: int) -> float | None:
    total = n_mapped + n_non_aligned
    if total == 0:
        return None
    return 100.0 * n_mapped / total


def track_pair_summary(
    mapping: ADMapping, scores: Sequence[PairScore]
) -> dict[str, float | int | None]:
    """Aggregate alignment and similarity statistics for one track pair.

    Aligned percent is computed per track and averaged; both per-track
    values are included. Fields with nothing to average are None.
    """
    a1 = _aligned_percent(len(mapping.mapped_t1()), len(mapping.non_aligned_t1))
    a2 = _aligned_percent(len(mapping.mapped_t2()), len(mapping.non_aligned_t2))
    present = [a for a in (a1, a2) if a is not None]
    overlaps = [p.overlap for p in mapping.pairs]
    bs = [s.bert_sim for s in scores]
    cs = [s.cider for s in scores]

    def mean_std(vals: list[float]) -> tuple[float | None, float | None]:
        if not vals:
            return None, None
        return float(np.mean(vals)), float(np.std(vals))

    mo, so = mean_std([100.0 * o for o in overlaps])
    mb, sb = mean_std(bs)
    mc, sc = mean_std(cs)
    return {
        "aligned_percent": float(np.mean(present)) if present else None,
        "aligned_percent_t1": a1,
        "aligned_percent_t2": a2,
        "mean_overlap_percent": mo,
        "std_overlap_percent": so,
        "mean_bert": mb,
        "std_bert": sb,
        "mean_cider": mc,
        "std_cider": sc,
        "n_pairs": len(mapping.pairs),
    }
