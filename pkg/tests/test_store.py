import pytest

from adeval.model import QuestionKind
from adeval.store import QuestionStore, Toplines

from helpers import make_question, make_segment


def build_store():
    return QuestionStore(
        dataset_id="ds1",
        segments=(make_segment("mv-seg000"), make_segment("mv-seg001")),
        questions=(
            make_question("mv-seg000-va-01", segment_id="mv-seg000"),
            make_question("mv-seg001-nu-01", segment_id="mv-seg001", kind=QuestionKind.NU),
            make_question("mv-seg001-va-01", segment_id="mv-seg001"),
        ),
        toplines={"VA": Toplines(59.1, 72.8), "NU": Toplines(50.3, 67.35)},
        movie_titles={"mv": "A Movie"},
    )


def test_store_lookups():
    store = build_store()
    assert store.segment_ids() == ("mv-seg000", "mv-seg001")
    assert store.segment("mv-seg001").segment_id == "mv-seg001"
    with pytest.raises(KeyError):
        store.segment("nope")
    qs = store.questions_for("mv-seg001")
    assert [q.qid for q in qs] == ["mv-seg001-nu-01", "mv-seg001-va-01"]
    assert store.questions_for("mv-seg000")[0].kind is QuestionKind.VA


def test_store_rejects_duplicate_segments():
    seg = make_segment("mv-seg000")
    with pytest.raises(ValueError):
        QuestionStore(dataset_id="d", segments=(seg, seg), questions=())


def test_store_rejects_orphan_question():
    with pytest.raises(ValueError):
        QuestionStore(
            dataset_id="d",
            segments=(make_segment("mv-seg000"),),
            questions=(make_question("x-va-01", segment_id="elsewhere"),),
        )


def test_store_save_load_roundtrip(tmp_path):
    store = build_store()
    store.save(tmp_path / "store")
    back = QuestionStore.load(tmp_path / "store")
    assert back.dataset_id == store.dataset_id
    assert back.segments == store.segments
    assert back.questions == store.questions
    assert back.toplines == store.toplines
    assert back.movie_titles == store.movie_titles


def test_store_save_is_deterministic(tmp_path):
    store = build_store()
    store.save(tmp_path / "a")
    store.save(tmp_path / "b")
    for name in ("store.json", "segments.json", "questions.json"):
        assert (tmp_path / "a" / name).read_bytes() == (
            tmp_path / "b" / name
        ).read_bytes()
