import json
import math

import pytest

from adeval.model import (
    ADMapping,
    AnswerRecord,
    FromContext,
    KindBreakdown,
    LineKind,
    MappingPair,
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
    TransformPiece,
    VideoSegment,
    validate,
)

from helpers import line, make_question, make_segment, track


def test_option_labels():
    assert OPTION_LABELS == ("A", "B", "C", "D", "E")


def test_line_roundtrip():
    ln = line(3, 1.0, 2.5, "hello there", LineKind.DIALOGUE)
    back = TranscriptLine.from_dict(ln.to_dict())
    assert back == ln
    assert json.dumps(ln.to_dict())  # JSON-safe


def test_line_validation():
    assert validate(line(0, 1.0, 2.0)) == []
    assert validate(line(0, 2.0, 2.0)) != []
    assert validate(line(0, 1.0, 2.0, text="   ")) != []
    assert validate(line(-1, 1.0, 2.0)) != []


def test_track_accessors():
    t = track([line(0, 0.0, 1.0, kind=LineKind.AD), line(1, 2.0, 3.0, kind=LineKind.DIALOGUE)])
    assert [ln.index for ln in t.ad_lines()] == [0]
    assert [ln.index for ln in t.dialogue_lines()] == [1]
    assert t.line_by_index(1).start_s == 2.0
    with pytest.raises(KeyError):
        t.line_by_index(99)


def test_track_validation_order():
    good = track([line(0, 0.0, 1.0), line(1, 2.0, 3.0)])
    assert validate(good) == []
    bad = track([line(0, 5.0, 6.0), line(1, 2.0, 3.0)])
    assert validate(bad) != []


def test_track_roundtrip():
    t = track([line(0, 0.0, 1.0), line(4, 2.0, 3.0, kind=LineKind.UNCLASSIFIED)])
    assert Track.from_dict(t.to_dict()) == t


def test_transform_json_null_for_infinity():
    tf = TimeTransform(pieces=(TransformPiece(0.0, math.inf, 1.0, 0.0),))
    d = tf.to_dict()
    assert d["pieces"][0]["valid_to_s"] is None
    assert json.dumps(d)
    back = TimeTransform.from_dict(d)
    assert math.isinf(back.pieces[0].valid_to_s)


def test_transform_validation():
    ok = TimeTransform(
        pieces=(
            TransformPiece(0.0, 100.0, 1.0, 0.0),
            TransformPiece(100.0, math.inf, 1.1, -5.0),
        )
    )
    assert validate(ok) == []
    gap = TimeTransform(
        pieces=(
            TransformPiece(0.0, 100.0, 1.0, 0.0),
            TransformPiece(150.0, math.inf, 1.1, -5.0),
        )
    )
    assert validate(gap) != []
    assert validate(TimeTransform(pieces=())) != []
    neg = TimeTransform(pieces=(TransformPiece(0.0, math.inf, -0.5, 0.0),))
    assert validate(neg) != []


def test_mapping_validation():
    m = ADMapping(
        pairs=(MappingPair(1, 3, 0.8),),
        non_aligned_t1=frozenset({5}),
        non_aligned_t2=frozenset({7}),
    )
    assert validate(m) == []
    clash = ADMapping(
        pairs=(MappingPair(1, 3, 0.8),),
        non_aligned_t1=frozenset({1}),
        non_aligned_t2=frozenset(),
    )
    assert validate(clash) != []
    low = ADMapping(
        pairs=(MappingPair(1, 3, 0.3),),
        non_aligned_t1=frozenset(),
        non_aligned_t2=frozenset(),
        threshold=0.5,
    )
    assert validate(low) != []


def test_mapping_roundtrip_and_sets():
    m = ADMapping(
        pairs=(MappingPair(1, 3, 0.8), MappingPair(1, 4, 0.6)),
        non_aligned_t1=frozenset({9}),
        non_aligned_t2=frozenset({2}),
    )
    assert ADMapping.from_dict(m.to_dict()) == m
    assert m.mapped_t1() == frozenset({1})
    assert m.mapped_t2() == frozenset({3, 4})


def test_segment_validation():
    seg = make_segment()
    assert validate(seg) == []
    bad = VideoSegment(
        segment_id="x",
        movie_id="mv",
        start_s=10.0,
        end_s=5.0,
        lines=(),
        plot_sentences=(),
    )
    assert validate(bad) != []


def test_segment_roundtrip():
    seg = make_segment()
    assert VideoSegment.from_dict(seg.to_dict()) == seg


def test_mcqa_validation():
    q = make_question("q1")
    assert validate(q) == []
    dup = MCQA(
        qid="q2",
        segment_id="s",
        kind=QuestionKind.VA,
        question="what?",
        options=("a", "a", "c", "d", "e"),
        correct="A",
        rationale="because",
    )
    assert validate(dup) != []
    bad_label = MCQA(
        qid="q3",
        segment_id="s",
        kind=QuestionKind.VA,
        question="w",
        options=("a", "b", "c", "d", "e"),
        correct="F",
        rationale="r",
    )
    assert validate(bad_label) != []


def test_mcqa_option_access():
    q = make_question("q1")
    assert q.option_text("B") == "opt b"
    assert q.correct_text == "opt a"


def test_mcqa_roundtrip():
    q = make_question("q1", kind=QuestionKind.NU, correct="C")
    assert MCQA.from_dict(q.to_dict()) == q


def test_answer_record_validation():
    ok = AnswerRecord(qid="q", chosen="A", rationale="r", from_context=FromContext.TRUE)
    assert validate(ok) == []
    unparsed = AnswerRecord(qid="q", chosen=None, rationale="", from_context=FromContext.UNPARSED)
    assert validate(unparsed) == []


def test_report_validation():
    rep = MetricsReport(
        n_questions=10,
        ca=70.0,
        ac=60.0,
        cc=50.0,
        by_kind=(("VA", KindBreakdown(10, 70.0, 60.0, 50.0)),),
        context_type="DialogPlusAD",
    )
    assert validate(rep) == []
    bad = MetricsReport(
        n_questions=10,
        ca=50.0,
        ac=50.0,
        cc=80.0,
        by_kind=(),
        context_type="DialogPlusAD",
    )
    assert validate(bad) != []


def test_report_roundtrip_and_lookup():
    rep = MetricsReport(
        n_questions=4,
        ca=75.0,
        ac=None,
        cc=None,
        by_kind=(("NU", KindBreakdown(4, 75.0, None, None)),),
        context_type="NoContext",
    )
    back = MetricsReport.from_dict(rep.to_dict())
    assert back == rep
    assert back.kind_breakdown("NU").ca == 75.0
    assert back.kind_breakdown("VA") is None


def test_submission_validation():
    sub = Submission(
        method_name="m",
        segments=(
            SubmissionSegment(
                segment_id="s1",
                ads=(SubmittedAd(0.0, 1.0, "a walk"), SubmittedAd(2.0, 3.0, "a run")),
            ),
        ),
    )
    assert validate(sub) == []
    assert sub.ads_for("s1")[0].text == "a walk"
    assert sub.ads_for("nope") is None
    unsorted = Submission(
        method_name="m",
        segments=(
            SubmissionSegment(
                segment_id="s1",
                ads=(SubmittedAd(5.0, 6.0, "later"), SubmittedAd(0.0, 1.0, "earlier")),
            ),
        ),
    )
    assert validate(unsorted) != []
    assert validate(Submission(method_name=" ", segments=())) != []


def test_validate_rejects_unknown_type():
    with pytest.raises(TypeError):
        validate(42)
