import json
import math
import random

import pytest

from adeval.alignment import (
    AnchorPair,
    classify_lines,
    find_anchors,
    fit_transform,
    inverse_piece_for,
    map_ads,
    overlap_score,
    piece_for,
    project_interval,
    project_interval_inverse,
    project_time,
    sweep_thresholds,
)
from adeval.errors import DegenerateInterval, InsufficientAnchors
from adeval.model import LineKind, TimeTransform, Track, TransformPiece
from adeval.textnorm import token_set_jaccard

from helpers import gw, line, paired_tracks, single_piece, track
from oracles import oracle_best_matching, oracle_map_ads


# ---------------------------------------------------------------------------
# Line classification


def test_classify_assigns_kinds_in_order():
    t = track(
        [
            line(0, 0.0, 1.0, "how are you", LineKind.UNCLASSIFIED),
            line(1, 2.0, 3.0, "a door creaks open", LineKind.UNCLASSIFIED),
            line(2, 4.0, 5.0, "fine thanks", LineKind.UNCLASSIFIED),
        ]
    )
    g = gw({"default": json.dumps(["dialogue", "AD", "dialogue"])})
    out = classify_lines(t, g)
    assert [ln.kind for ln in out.lines] == [
        LineKind.DIALOGUE,
        LineKind.AD,
        LineKind.DIALOGUE,
    ]
    # everything else untouched
    assert [(ln.index, ln.start_s, ln.text) for ln in out.lines] == [
        (ln.index, ln.start_s, ln.text) for ln in t.lines
    ]


def test_classify_batches_preserve_global_order():
    lines = [
        line(k, float(k), k + 0.5, f"utterance number {k}", LineKind.UNCLASSIFIED)
        for k in range(5)
    ]
    want = ["dialogue", "AD", "dialogue", "AD", "dialogue"]

    def responder(prompt):
        # answer per batch by reading which sentences it carries
        got = [lab for k, lab in enumerate(want) if f"utterance number {k}" in prompt]
        return json.dumps(got)

    g = gw({"default": responder})
    out = classify_lines(track(lines), g, batch_size=2)
    assert [ln.kind for ln in out.lines] == [
        LineKind.DIALOGUE if lab == "dialogue" else LineKind.AD for lab in want
    ]
    assert g.provider_calls == 3  # ceil(5 / 2) batches, one call each


def test_classify_falls_back_to_per_line_calls():
    lines = [
        line(k, float(k), k + 0.5, f"sentence {k} here", LineKind.UNCLASSIFIED)
        for k in range(3)
    ]

    def responder(prompt):
        # the batch prompt carries every text; per-line prompts carry one
        if "sentence 0 here" in prompt and "sentence 2 here" in prompt:
            return json.dumps(["dialogue"])  # wrong count
        return json.dumps(["AD"])

    g = gw({"default": responder})
    out = classify_lines(track(lines), g)
    assert all(ln.kind == LineKind.AD for ln in out.lines)
    # batch + its repair attempt, then one clean call per line
    assert g.provider_calls == 5


def test_classify_rejects_bad_batch_size():
    with pytest.raises(ValueError):
        classify_lines(track([line(0, 0.0, 1.0, "x")]), gw(), batch_size=0)


def test_classify_empty_track_no_calls():
    g = gw()
    out = classify_lines(track([]), g)
    assert out.lines == ()
    assert g.provider_calls == 0


# ---------------------------------------------------------------------------
# Dialog anchoring


def test_anchors_on_identical_dialog():
    rng = random.Random(1)
    t1, t2 = paired_tracks(rng, n_lines=20, slope=1.0, offset=30.0)
    anchors = find_anchors(t1, t2)
    d1 = [ln.index for ln in t1.dialogue_lines()]
    d2 = [ln.index for ln in t2.dialogue_lines()]
    assert [a.i for a in anchors] == d1
    assert [a.j for a in anchors] == d2
    assert all(a.similarity == pytest.approx(1.0) for a in anchors)


def test_anchors_skip_unmatched_lines():
    rng = random.Random(2)
    t1, t2 = paired_tracks(rng, n_lines=24, slope=1.0, offset=0.0)
    # drop two dialog lines from t2; their t1 partners must not be anchored
    d2 = t2.dialogue_lines()
    dropped = {d2[3].index, d2[7].index}
    kept = tuple(ln for ln in t2.lines if ln.index not in dropped)
    t2_cut = Track(t2.movie_id, t2.source_id, kept)
    anchors = find_anchors(t1, t2_cut)
    assert len(anchors) == len(d2) - 2
    assert dropped.isdisjoint({a.j for a in anchors})
    # monotone in both coordinates
    assert all(x.i < y.i and x.j < y.j for x, y in zip(anchors, anchors[1:]))


def test_anchors_drop_weak_matches():
    rng = random.Random(3)
    t1, t2 = paired_tracks(rng, n_lines=16, slope=1.0, offset=0.0)
    # rewrite one t2 dialog line so it shares too few tokens with its partner
    victim = t2.dialogue_lines()[2].index
    lines = tuple(
        line(ln.index, ln.start_s, ln.end_s, "zzz qqq vvv www yyy", ln.kind)
        if ln.index == victim
        else ln
        for ln in t2.lines
    )
    anchors = find_anchors(t1, Track(t2.movie_id, t2.source_id, lines))
    assert victim not in {a.j for a in anchors}
    assert len(anchors) == len(t1.dialogue_lines()) - 1


def test_anchors_insufficient():
    t1 = track([line(k, 3.0 * k, 3.0 * k + 1, f"word{k} extra", LineKind.DIALOGUE) for k in range(3)])
    t2 = track([line(k, 3.0 * k, 3.0 * k + 1, f"word{k} extra", LineKind.DIALOGUE) for k in range(3)])
    with pytest.raises(InsufficientAnchors):
        find_anchors(t1, t2)


def test_anchor_cost_is_optimal_small_random():
    # the DP must reach the exhaustively best total cost
    rng = random.Random(11)
    vocab = ["red", "blue", "green", "door", "car", "night", "run", "talk"]
    for _ in range(60):
        n, m = rng.randint(1, 5), rng.randint(1, 5)
        mk = lambda: " ".join(rng.sample(vocab, rng.randint(2, 4)))
        t1 = track(
            [line(k, 3.0 * k, 3.0 * k + 1, mk(), LineKind.DIALOGUE) for k in range(n)]
        )
        t2 = track(
            [line(k, 3.0 * k, 3.0 * k + 1, mk(), LineKind.DIALOGUE) for k in range(m)]
        )
        sk = 0.45
        anchors = find_anchors(t1, t2, strong_match=0.0, min_anchors=0, skip_penalty=sk)
        cost = [
            [
                1.0 - token_set_jaccard(a.text, b.text)
                for b in t2.dialogue_lines()
            ]
            for a in t1.dialogue_lines()
        ]
        best_total, _ = oracle_best_matching(cost, sk, sk)
        got_total = sum(
            1.0 - a.similarity for a in anchors
        ) + sk * ((n - len(anchors)) + (m - len(anchors)))
        assert got_total == pytest.approx(best_total, abs=1e-9)


# ---------------------------------------------------------------------------
# Transform fitting


def test_fit_recovers_single_regime_exactly():
    rng = random.Random(4)
    t1, t2 = paired_tracks(rng, n_lines=30, slope=25.0 / 24.0, offset=12.5)
    anchors = find_anchors(t1, t2)
    tf = fit_transform(anchors, t1, t2)
    assert len(tf.pieces) == 1
    p = tf.pieces[0]
    assert p.slope == pytest.approx(25.0 / 24.0, abs=1e-9)
    assert p.offset == pytest.approx(12.5, abs=1e-9)
    assert p.valid_from_s == 0.0
    assert math.isinf(p.valid_to_s)


def test_fit_two_regime_breakpoint():
    # offset jumps by 30 s halfway through: one cut, near the true switch
    xs = [10.0 * k for k in range(40)]
    switch = 200.0
    t1 = track(
        [line(k, x, x + 2.0, f"line {k} words", LineKind.DIALOGUE) for k, x in enumerate(xs)]
    )
    t2 = track(
        [
            line(
                k,
                x + (5.0 if x < switch else 35.0),
                x + (5.0 if x < switch else 35.0) + 2.0,
                f"line {k} words",
                LineKind.DIALOGUE,
            )
            for k, x in enumerate(xs)
        ]
    )
    anchors = find_anchors(t1, t2)
    tf = fit_transform(anchors, t1, t2)
    assert len(tf.pieces) == 2
    assert tf.pieces[0].offset == pytest.approx(5.0, abs=1e-6)
    assert tf.pieces[1].offset == pytest.approx(35.0, abs=1e-6)
    cut = tf.pieces[0].valid_to_s
    assert cut == tf.pieces[1].valid_from_s
    assert abs(cut - switch) <= 10.0
    assert tf.pieces[0].valid_from_s == 0.0
    assert math.isinf(tf.pieces[-1].valid_to_s)


def test_fit_requires_enough_anchors():
    anchors = [AnchorPair(k, k, 1.0) for k in range(3)]
    t = track([line(k, 3.0 * k, 3.0 * k + 1, "w", LineKind.DIALOGUE) for k in range(3)])
    with pytest.raises(InsufficientAnchors):
        fit_transform(anchors, t, t)


def test_fit_keeps_min_piece_anchors_per_side():
    # residuals over tolerance but too few anchors to split twice
    rng = random.Random(9)
    xs = sorted(rng.uniform(0, 600) for _ in range(12))
    t1 = track(
        [line(k, x, x + 1.0, "w", LineKind.DIALOGUE) for k, x in enumerate(xs)]
    )
    t2 = track(
        [
            line(k, x + (0.0 if k < 6 else 30.0), x + 1.0, "w", LineKind.DIALOGUE)
            for k, x in enumerate(xs)
        ]
    )
    anchors = [AnchorPair(k, k, 1.0) for k in range(12)]
    tf = fit_transform(anchors, t1, t2, min_piece=5)
    # 12 anchors allow at most one split under a 5-anchor floor
    assert len(tf.pieces) <= 2


# ---------------------------------------------------------------------------
# Projection


def two_piece():
    return TimeTransform(
        (
            TransformPiece(0.0, 100.0, 1.0, 0.0),
            TransformPiece(100.0, math.inf, 1.0, 50.0),
        )
    )


def test_piece_for_clamps_at_both_ends():
    tf = TimeTransform(
        (
            TransformPiece(10.0, 100.0, 1.0, 0.0),
            TransformPiece(100.0, 200.0, 1.0, 50.0),
        )
    )
    assert piece_for(tf, 5.0) is tf.pieces[0]
    assert piece_for(tf, 150.0) is tf.pieces[1]
    assert piece_for(tf, 500.0) is tf.pieces[1]
    assert piece_for(tf, 100.0) is tf.pieces[1]  # half-open ranges


def test_project_interval_uses_start_piece_across_breakpoint():
    tf = two_piece()
    # starts at 99 so both endpoints go through the first piece
    assert project_interval(tf, 99.0, 103.0) == (99.0, 103.0)
    # starts past the cut: second piece
    assert project_interval(tf, 101.0, 103.0) == (151.0, 153.0)


def test_project_interval_buffer_widens_both_sides():
    tf = single_piece(2.0, 10.0)
    assert project_interval(tf, 5.0, 7.0, buffer_s=1.5) == (18.5, 25.5)


def test_inverse_piece_prefers_containing_image():
    tf = two_piece()
    assert inverse_piece_for(tf, 50.0) is tf.pieces[0]
    assert inverse_piece_for(tf, 160.0) is tf.pieces[1]


def test_inverse_piece_nearest_image_in_gap():
    # images are [0, 100) and [150, inf): the gap picks the closer edge
    tf = two_piece()
    assert inverse_piece_for(tf, 101.0) is tf.pieces[0]
    assert inverse_piece_for(tf, 149.0) is tf.pieces[1]
    # equidistant keeps the first piece
    assert inverse_piece_for(tf, 125.0) is tf.pieces[0]


def test_inverse_round_trips_forward():
    tf = two_piece()
    for start, end in [(3.0, 8.0), (40.0, 55.0), (120.0, 130.0)]:
        u0, u1 = project_interval(tf, start, end)
        back = project_interval_inverse(tf, u0, u1)
        assert back[0] == pytest.approx(start, abs=1e-9)
        assert back[1] == pytest.approx(end, abs=1e-9)


def test_project_time_matches_interval_start():
    tf = two_piece()
    assert project_time(tf, 42.0) == 42.0
    assert project_time(tf, 142.0) == 192.0


# ---------------------------------------------------------------------------
# Overlap score


def test_overlap_worked_example():
    assert overlap_score((109.0, 115.0), (112.0, 118.0)) == pytest.approx(0.5)


def test_overlap_containment_is_one():
    assert overlap_score((0.0, 10.0), (4.0, 5.0)) == pytest.approx(1.0)
    assert overlap_score((4.0, 5.0), (0.0, 10.0)) == pytest.approx(1.0)


def test_overlap_disjoint_and_touching_zero():
    assert overlap_score((0.0, 1.0), (2.0, 3.0)) == 0.0
    assert overlap_score((0.0, 1.0), (1.0, 2.0)) == 0.0


def test_overlap_degenerate_rejected():
    with pytest.raises(DegenerateInterval):
        overlap_score((1.0, 1.0), (0.0, 2.0))
    with pytest.raises(DegenerateInterval):
        overlap_score((0.0, 2.0), (3.0, 2.0))


# ---------------------------------------------------------------------------
# AD mapping


def ad_track(intervals, movie_id="mv", source_id="s"):
    # five tokens per text so every n-gram level up to 4 is populated
    return Track(
        movie_id,
        source_id,
        tuple(
            line(k, s, e, f"the ad line number{k} appears", LineKind.AD)
            for k, (s, e) in enumerate(intervals)
        ),
    )


def test_map_ads_threshold_is_strict():
    t1 = ad_track([(109.0, 115.0)], source_id="a")
    t2 = ad_track([(112.0, 118.0)], source_id="b")
    tf = single_piece(1.0, 0.0)
    # overlap is exactly 0.5 with no buffer: not a pair at threshold 0.5
    at_half = map_ads(t1, t2, tf, threshold=0.5, buffer_s=0.0)
    assert at_half.pairs == ()
    assert at_half.non_aligned_t1 == {0}
    assert at_half.non_aligned_t2 == {0}
    below = map_ads(t1, t2, tf, threshold=0.49, buffer_s=0.0)
    assert [(p.i, p.j) for p in below.pairs] == [(0, 0)]
    assert below.pairs[0].overlap == pytest.approx(0.5)


def test_map_ads_buffer_rescues_near_miss():
    t1 = ad_track([(109.0, 115.0)], source_id="a")
    t2 = ad_track([(112.0, 118.0)], source_id="b")
    tf = single_piece(1.0, 0.0)
    m = map_ads(t1, t2, tf, threshold=0.5, buffer_s=1.0)
    assert [(p.i, p.j) for p in m.pairs] == [(0, 0)]


def test_map_ads_reverse_pass_rescues_breakpoint_straddler():
    tf = two_piece()
    t1 = ad_track([(99.0, 101.0)], source_id="a")
    t2 = ad_track([(149.0, 151.0)], source_id="b")
    m = map_ads(t1, t2, tf, threshold=0.5, buffer_s=0.0)
    # forward pass projects through the first piece and misses; the reverse
    # pass goes back through the second piece and lands exactly
    assert [(p.i, p.j) for p in m.pairs] == [(0, 0)]
    assert m.pairs[0].overlap == pytest.approx(1.0)


def test_map_ads_records_parameters():
    t1 = ad_track([(0.0, 2.0)], source_id="a")
    t2 = ad_track([(0.0, 2.0)], source_id="b")
    m = map_ads(t1, t2, single_piece(1.0, 0.0), threshold=0.3, buffer_s=0.25)
    assert m.threshold == 0.3
    assert m.buffer_s == 0.25


def test_map_ads_rejects_bad_threshold():
    t = ad_track([(0.0, 1.0)])
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            map_ads(t, t, single_piece(1.0, 0.0), threshold=bad)


def rand_transform(rng):
    n_pieces = rng.randint(1, 3)
    cuts = sorted(rng.uniform(50.0, 550.0) for _ in range(n_pieces - 1))
    bounds = [0.0, *cuts, math.inf]
    pieces = tuple(
        TransformPiece(
            bounds[k],
            bounds[k + 1],
            rng.uniform(0.9, 1.1),
            rng.uniform(-40.0, 40.0),
        )
        for k in range(n_pieces)
    )
    return TimeTransform(pieces)


def rand_ads(rng, n, span=600.0):
    out = []
    for _ in range(n):
        s = rng.uniform(0.0, span)
        out.append((s, s + rng.uniform(0.5, 8.0)))
    out.sort()
    return out


def test_map_ads_matches_exhaustive_oracle():
    rng = random.Random(20240817)
    for _ in range(200):
        tf = rand_transform(rng)
        t1 = ad_track(rand_ads(rng, rng.randint(0, 12)), source_id="a")
        t2 = ad_track(rand_ads(rng, rng.randint(0, 12)), source_id="b")
        threshold = rng.choice([0.3, 0.5, 0.7])
        buffer_s = rng.choice([0.0, 1.0])
        m = map_ads(t1, t2, tf, threshold=threshold, buffer_s=buffer_s)
        pieces = [
            (p.valid_from_s, p.valid_to_s, p.slope, p.offset) for p in tf.pieces
        ]
        ads1 = [(ln.index, ln.start_s, ln.end_s) for ln in t1.ad_lines()]
        ads2 = [(ln.index, ln.start_s, ln.end_s) for ln in t2.ad_lines()]
        want_pairs, want_na1, want_na2 = oracle_map_ads(
            ads1, ads2, pieces, threshold=threshold, buffer_s=buffer_s
        )
        assert {(p.i, p.j): p.overlap for p in m.pairs} == pytest.approx(want_pairs)
        assert set(m.non_aligned_t1) == want_na1
        assert set(m.non_aligned_t2) == want_na2


# ---------------------------------------------------------------------------
# Threshold sweep


def test_sweep_non_aligned_non_decreasing():
    rng = random.Random(31)
    for _ in range(10):
        tf = rand_transform(rng)
        t1 = ad_track(rand_ads(rng, 10), source_id="a")
        t2 = ad_track(rand_ads(rng, 10), source_id="b")
        pts = sweep_thresholds(t1, t2, tf, [0.1, 0.3, 0.5, 0.7, 0.9])
        pcts = [p.non_aligned_percent for p in pts]
        assert all(b >= a for a, b in zip(pcts, pcts[1:]))
        assert all(0.0 <= x <= 100.0 for x in pcts)


def test_sweep_validates_thresholds():
    t = ad_track([(0.0, 1.0)])
    tf = single_piece(1.0, 0.0)
    with pytest.raises(ValueError):
        sweep_thresholds(t, t, tf, [])
    with pytest.raises(ValueError):
        sweep_thresholds(t, t, tf, [0.0, 0.5])
    with pytest.raises(ValueError):
        sweep_thresholds(t, t, tf, [0.5, 0.5])
    with pytest.raises(ValueError):
        sweep_thresholds(t, t, tf, [0.7, 0.3])


def test_sweep_mean_cider_none_without_pairs():
    t1 = ad_track([(0.0, 2.0)], source_id="a")
    t2 = ad_track([(500.0, 502.0)], source_id="b")
    pts = sweep_thresholds(t1, t2, single_piece(1.0, 0.0), [0.5])
    assert pts[0].mean_cider is None
    assert pts[0].non_aligned_percent == pytest.approx(100.0)


def test_sweep_identical_tracks_all_aligned():
    ivals = [(10.0 * k, 10.0 * k + 3.0) for k in range(6)]
    t1 = ad_track(ivals, source_id="a")
    t2 = ad_track(ivals, source_id="b")
    pts = sweep_thresholds(t1, t2, single_piece(1.0, 0.0), [0.5, 0.9])
    assert all(p.non_aligned_percent == 0.0 for p in pts)
    # identical texts: CIDEr hits its self-similarity ceiling
    assert pts[0].mean_cider == pytest.approx(10.0)
