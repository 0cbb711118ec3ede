from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixtures import memphis_instance, synthetic
from pathfid.corpus import (
    CorpusError,
    Passage,
    QuestionInstance,
    RecordError,
    SyntheticConfig,
    canonical_iirc_answer,
    dump_hotpot,
    generate_synthetic,
    hotpot_record_to_instance,
    instance_to_hotpot,
    load_hotpot,
    load_iirc,
    split_sentences,
)
from pathfid.hoporder import contains_answer


def _record(**overrides):
    record = {
        "_id": "q1",
        "question": "Which city?",
        "answer": "Paris",
        "type": "bridge",
        "supporting_facts": [["A", 0], ["B", 1]],
        "context": [["A", ["A is in B."]], ["B", ["B is big.", "B is Paris."]], ["C", ["C."]]],
    }
    record.update(overrides)
    return record


def test_load_hotpot_roundtrip(tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps([_record()]))
    [inst] = load_hotpot(path)
    assert inst.titles == ["A", "B", "C"]
    assert inst.gold_supports == {("A", 0), ("B", 1)}
    assert inst.gold_passage_titles == {"A", "B"}
    assert [p.title for p in inst.gold_passages()] == ["A", "B"]
    out = tmp_path / "out.json"
    dump_hotpot([inst], out)
    assert load_hotpot(out) == [inst]


def test_out_of_range_support_is_rejected(tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps([_record(supporting_facts=[["B", 7]]), _record(_id="ok")]))
    rejected = []
    corpus = load_hotpot(path, rejected)
    assert [i.id for i in corpus] == ["ok"]
    assert rejected[0].record_id == "q1"
    assert rejected[0].field == "supporting_facts"


def test_missing_field_and_unknown_title_rejected(tmp_path):
    bad = _record()
    del bad["answer"]
    path = tmp_path / "d.json"
    path.write_text(json.dumps([bad, _record(_id="x", supporting_facts=[["Z", 0]])]))
    rejected = []
    assert load_hotpot(path, rejected) == []
    assert {(r.record_id, r.field) for r in rejected} == {("q1", "answer"), ("x", "supporting_facts")}


def test_invalid_json_is_a_corpus_error(tmp_path):
    path = tmp_path / "d.json"
    path.write_text("{not json")
    with pytest.raises(CorpusError):
        load_hotpot(path)


def test_passage_and_instance_validation():
    with pytest.raises(ValueError):
        Passage("", ("x",))
    with pytest.raises(ValueError):
        Passage("t", ())
    with pytest.raises(RecordError):
        QuestionInstance("i", "q", (Passage("t", ("s",)),), "a", gold_supports={("t", 1)})
    with pytest.raises(RecordError):
        QuestionInstance("i", "q", (Passage("t", ("s",)),), "a", question_type="weird")


def test_memphis_fixture_is_valid():
    inst = memphis_instance()
    assert inst.gold_passage_titles == {"Memphis Hustle", "Southaven, Mississippi"}
    assert len(inst.passages) == 5


def test_iirc_answers():
    assert canonical_iirc_answer({"type": "none"}) == "unanswerable"
    assert canonical_iirc_answer({"type": "binary", "answer_value": True}) == "yes"
    assert canonical_iirc_answer({"type": "value", "answer_value": "3", "answer_unit": "years"}) == "3 years"
    assert canonical_iirc_answer({"type": "span", "answer_spans": [{"text": "New"}, {"text": "York "}]}) == "New York"
    with pytest.raises(ValueError):
        canonical_iirc_answer({"type": "mystery"})


def test_load_iirc(tmp_path):
    data = [
        {
            "title": "Main Article",
            "text": "The club was founded in 1901. It moved to <a>Springfield</a> later.",
            "links": [{"target": "Springfield"}],
            "questions": [
                {
                    "qid": "iirc-1",
                    "question": "How old was the city when the club moved?",
                    "answer": {"type": "value", "answer_value": "50", "answer_unit": "years"},
                    "question_links": ["Springfield"],
                    "context": [
                        {"passage": "main", "text": "It moved to Springfield later.", "indices": [30, 60]},
                        {"passage": "Springfield", "text": "Springfield was founded in 1850."},
                    ],
                },
                {"qid": "iirc-bad", "question": "?", "answer": {"type": "mystery"}},
            ],
        }
    ]
    path = tmp_path / "iirc.json"
    path.write_text(json.dumps(data))
    articles = {"springfield": "Springfield is a city. Springfield was founded in 1850."}
    rejected = []
    [inst] = load_iirc(path, articles, rejected)
    assert [r.record_id for r in rejected] == ["iirc-bad"]
    assert inst.titles == ["Main Article", "Springfield"]
    assert inst.answer == "50 years"
    assert inst.question_type == "other"
    assert inst.gold_supports == {("Main Article", 1), ("Springfield", 1)}
    assert inst.passages[0].links == ("Springfield",)


def test_split_sentences_strips_markup():
    assert split_sentences("A <b>b</b> c. Next one! (Third) here?") == ["A b c.", "Next one!", "(Third) here?"]


def test_synthetic_shape_and_determinism():
    a = synthetic(16, 8, seed=3)
    b = synthetic(16, 8, seed=3)
    assert a == b
    assert a != synthetic(16, 8, seed=4)
    for inst in a:
        assert len(inst.passages) == 10
        assert len(set(inst.titles)) == 10
        assert len(inst.gold_passage_titles) == 2
        gold = inst.gold_passages()
        # the answer is planted in exactly one gold passage
        assert sum(contains_answer(p, inst.answer) for p in gold) == 1
        assert not any(contains_answer(p, inst.answer) for p in inst.passages if p not in gold)


def test_synthetic_config_validation():
    with pytest.raises(ValueError):
        SyntheticConfig(hops=1)
    with pytest.raises(ValueError):
        SyntheticConfig(vocab_size=5)
    with pytest.raises(ValueError):
        SyntheticConfig(num_instances=0)


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    hops=st.integers(2, 4),
    distractors=st.integers(1, 10),
    sentences=st.integers(1, 5),
)
def test_synthetic_instances_roundtrip_through_json(seed, hops, distractors, sentences):
    corpus = generate_synthetic(
        SyntheticConfig(
            num_instances=3, num_distractors=distractors, hops=hops, sentences_per_passage=sentences, rng_seed=seed
        )
    )
    for inst in corpus:
        assert len(inst.gold_passage_titles) == hops
        record = json.loads(json.dumps(instance_to_hotpot(inst)))
        assert hotpot_record_to_instance(record) == inst


def test_multi_word_titles():
    one = synthetic(8, 3, seed=2)
    assert one == synthetic(8, 3, seed=2, title_words=1)
    three = synthetic(8, 3, seed=2, title_words=3)
    assert all(len(t.split()) == 3 for inst in three for t in inst.titles)
    with pytest.raises(ValueError):
        SyntheticConfig(title_words=0)
