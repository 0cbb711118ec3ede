"""Multi-hop QA instances: data model, HotpotQA/IIRC ingestion, synthetic corpora."""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

logger = logging.getLogger(__name__)

QUESTION_TYPES = ("bridge", "comparison", "other")


class CorpusError(ValueError):
    """Raised when an input file cannot be read as a corpus at all."""


class RecordError(ValueError):
    def __init__(self, record_id: str, field_name: str, message: str):
        super().__init__(f"record {record_id!r}: field {field_name!r}: {message}")
        self.record_id = record_id
        self.field_name = field_name
        self.message = message


@dataclass(frozen=True)
class Rejected:
    """A record that was skipped during loading."""

    record_id: str
    field: str
    reason: str


@dataclass(frozen=True)
class Passage:
    title: str
    sentences: tuple[str, ...]
    links: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        object.__setattr__(self, "links", tuple(self.links))
        if not self.title.strip():
            raise ValueError("passage title is empty")
        if not self.sentences:
            raise ValueError(f"passage {self.title!r} has no sentences")

    @property
    def text(self) -> str:
        return " ".join(self.sentences)

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class QuestionInstance:
    id: str
    question: str
    passages: tuple[Passage, ...]
    answer: str
    question_type: str = "bridge"
    gold_supports: frozenset[tuple[str, int]] = frozenset()
    gold_passage_titles: frozenset[str] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "passages", tuple(self.passages))
        object.__setattr__(
            self, "gold_supports", frozenset((str(t), int(i)) for t, i in self.gold_supports)
        )
        derived = frozenset(t for t, _ in self.gold_supports)
        if self.gold_passage_titles is None:
            object.__setattr__(self, "gold_passage_titles", derived)
        else:
            object.__setattr__(self, "gold_passage_titles", frozenset(self.gold_passage_titles))
        self.validate()

    def validate(self) -> None:
        if self.question_type not in QUESTION_TYPES:
            raise RecordError(self.id, "type", f"unknown question type {self.question_type!r}")
        lengths = {}
        for p in self.passages:
            lengths.setdefault(p.title, len(p))
        for title, idx in sorted(self.gold_supports):
            if title not in lengths:
                raise RecordError(self.id, "supporting_facts", f"title {title!r} not among passages")
            if not 0 <= idx < lengths[title]:
                raise RecordError(
                    self.id,
                    "supporting_facts",
                    f"sentence index {idx} out of range for {title!r} ({lengths[title]} sentences)",
                )
        if self.gold_passage_titles != frozenset(t for t, _ in self.gold_supports):
            raise RecordError(self.id, "gold_passage_titles", "does not match supporting fact titles")

    @property
    def titles(self) -> list[str]:
        return [p.title for p in self.passages]

    def passage(self, title: str) -> Passage:
        for p in self.passages:
            if p.title == title:
                return p
        raise KeyError(title)

    def gold_passages(self) -> list[Passage]:
        """Gold passages in corpus order (each title once)."""
        seen: set[str] = set()
        out = []
        for p in self.passages:
            if p.title in self.gold_passage_titles and p.title not in seen:
                seen.add(p.title)
                out.append(p)
        return out


# ---------------------------------------------------------------------------
# HotpotQA


def _read_json(path: str | Path) -> Any:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise CorpusError(f"{path}: not valid JSON ({e})") from e


def _require(record: dict, key: str, record_id: str) -> Any:
    if key not in record:
        raise RecordError(record_id, key, "missing")
    return record[key]


def hotpot_record_to_instance(record: dict) -> QuestionInstance:
    if not isinstance(record, dict):
        raise RecordError("<unknown>", "<record>", "not a JSON object")
    record_id = str(record.get("_id", record.get("id", "<no id>")))
    question = _require(record, "question", record_id)
    answer = _require(record, "answer", record_id)
    context = _require(record, "context", record_id)
    supports = _require(record, "supporting_facts", record_id)
    qtype = record.get("type", "bridge")
    if qtype not in ("bridge", "comparison"):
        qtype = "other"
    if not isinstance(question, str) or not isinstance(answer, str):
        raise RecordError(record_id, "question/answer", "must be strings")
    link_map = record.get("links") or {}
    passages = []
    try:
        for title, sentences in context:
            passages.append(Passage(title, sentences, link_map.get(title, ())))
    except (TypeError, ValueError) as e:
        raise RecordError(record_id, "context", str(e)) from e
    try:
        gold = frozenset((str(t), int(i)) for t, i in supports)
    except (TypeError, ValueError) as e:
        raise RecordError(record_id, "supporting_facts", str(e)) from e
    return QuestionInstance(
        id=record_id,
        question=question,
        passages=tuple(passages),
        answer=answer,
        question_type=qtype,
        gold_supports=gold,
    )


def _collect(
    records: Iterable[dict], convert, rejected: list[Rejected] | None
) -> list[QuestionInstance]:
    out = []
    for record in records:
        try:
            out.append(convert(record))
        except RecordError as e:
            entry = Rejected(e.record_id, e.field_name, e.message)
            logger.warning("rejected %s", e)
            if rejected is not None:
                rejected.append(entry)
    return out


def load_hotpot(path: str | Path, rejected: list[Rejected] | None = None) -> list[QuestionInstance]:
    """Load a HotpotQA distractor-format file.

    Records that violate the instance invariants are skipped; pass a list as
    ``rejected`` to collect them.
    """
    data = _read_json(path)
    if not isinstance(data, list):
        raise CorpusError(f"{path}: expected a JSON array of records")
    return _collect(data, hotpot_record_to_instance, rejected)


def instance_to_hotpot(inst: QuestionInstance) -> dict:
    record: dict[str, Any] = {
        "_id": inst.id,
        "question": inst.question,
        "answer": inst.answer,
        "type": inst.question_type,
        "supporting_facts": [[t, i] for t, i in sorted(inst.gold_supports)],
        "context": [[p.title, list(p.sentences)] for p in inst.passages],
    }
    links = {p.title: list(p.links) for p in inst.passages if p.links}
    if links:
        record["links"] = links
    return record


def dump_hotpot(instances: Iterable[QuestionInstance], path: str | Path) -> None:
    records = [instance_to_hotpot(inst) for inst in instances]
    Path(path).write_text(json.dumps(records, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# IIRC

_SENT_SPLIT = re.compile(r"(?<=[.!?])\s+(?=[A-Z0-9\"'(])")
_TAG = re.compile(r"<[^>]+>")


def split_sentences(text: str) -> list[str]:
    text = " ".join(_TAG.sub(" ", text).split())
    return [s for s in _SENT_SPLIT.split(text) if s]


def canonical_iirc_answer(answer: dict) -> str:
    kind = answer.get("type")
    if kind == "none":
        return "unanswerable"
    if kind == "binary":
        value = answer.get("answer_value")
        if isinstance(value, bool):
            return "yes" if value else "no"
        return str(value).strip().lower()
    if kind == "value":
        parts = [str(answer.get("answer_value", "")).strip(), str(answer.get("answer_unit") or "").strip()]
        return " ".join(p for p in parts if p)
    if kind == "span":
        return " ".join(s["text"].strip() for s in answer.get("answer_spans", []))
    raise ValueError(f"unknown answer type {kind!r}")


def _sentence_at(sentences: list[str], text: str, offset: int | None) -> int | None:
    """Index of the sentence containing a character offset (or the snippet text)."""
    if offset is not None:
        pos = 0
        for i, s in enumerate(sentences):
            end = pos + len(s) + 1
            if offset < end:
                return i
            pos = end
    snippet = " ".join(text.split())
    for i, s in enumerate(sentences):
        if snippet and (snippet in s or s in snippet):
            return i
    return None


def load_iirc(
    path: str | Path,
    articles: str | Path | dict | None = None,
    rejected: list[Rejected] | None = None,
) -> list[QuestionInstance]:
    """Load IIRC-format data (list of main articles with nested questions).

    ``articles`` is the ``context_articles.json`` mapping of linked titles to
    text; without it linked passages are built from the annotated context
    snippets only. The main passage is always first.
    """
    data = _read_json(path)
    if not isinstance(data, list):
        raise CorpusError(f"{path}: expected a JSON array of articles")
    if articles is not None and not isinstance(articles, dict):
        articles = _read_json(articles)
    articles = {k.lower(): v for k, v in (articles or {}).items()}

    records = []
    for article in data:
        for q in article.get("questions", []) if isinstance(article, dict) else []:
            records.append((article, q))

    def convert(pair) -> QuestionInstance:
        article, q = pair
        qid = str(q.get("qid", "<no id>"))
        question = _require(q, "question", qid)
        answer = canonical_iirc_answer(_require(q, "answer", qid))
        main_title = _require(article, "title", qid)
        main_sents = split_sentences(article.get("text", "")) or [main_title]
        passages = [Passage(main_title, main_sents, [l["target"] for l in article.get("links", []) if "target" in l])]
        supports = set()
        snippets: dict[str, list[str]] = {}
        for ctx in q.get("context", []):
            name = ctx.get("passage", "main")
            if name != "main":
                snippets.setdefault(name, []).append(ctx.get("text", ""))
        linked_titles = list(dict.fromkeys(list(q.get("question_links", [])) + list(snippets)))
        for title in linked_titles:
            text = articles.get(title.lower())
            sents = split_sentences(text) if text else [" ".join(s.split()) for s in snippets.get(title, [])]
            sents = [s for s in sents if s]
            if sents:
                passages.append(Passage(title, sents))
        by_title = {p.title: p for p in passages}
        for ctx in q.get("context", []):
            name = ctx.get("passage", "main")
            title = main_title if name == "main" else name
            p = by_title.get(title)
            if p is None:
                continue
            indices = ctx.get("indices") or [None]
            idx = _sentence_at(list(p.sentences), ctx.get("text", ""), indices[0] if name == "main" else None)
            if idx is not None:
                supports.add((title, idx))
        return QuestionInstance(
            id=qid,
            question=question,
            passages=tuple(passages),
            answer=answer,
            question_type="other",
            gold_supports=frozenset(supports),
        )

    def guarded(pair):
        try:
            return convert(pair)
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, RecordError):
                raise
            raise RecordError(str(pair[1].get("qid", "<no id>")), "answer", str(e)) from e

    return _collect(records, guarded, rejected)


# ---------------------------------------------------------------------------
# Synthetic bridge corpora


@dataclass(frozen=True)
class SyntheticConfig:
    num_instances: int = 64
    num_distractors: int = 8
    hops: int = 2
    vocab_size: int = 400
    sentences_per_passage: int = 3
    rng_seed: int = 0
    title_words: int = 1

    def __post_init__(self):
        for name in ("num_instances", "num_distractors", "vocab_size", "sentences_per_passage", "title_words"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.hops < 2:
            raise ValueError("hops must be >= 2")
        if self.vocab_size < 2 * self.hops + self.num_distractors + 2:
            raise ValueError("vocab_size too small for the requested passages")


_SYLLABLES = ("ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "ze", "da", "po", "gu")
_FILLERS = (
    "{e} is an old town .",
    "{e} is known for its river .",
    "{e} has a large market .",
    "{e} lies on a quiet plain .",
    "{e} hosts a yearly fair .",
)
_LINK = "{a} was founded by {b} ."
_VALUE = "{b} was born in {v} ."
_QUESTION = "where was {chain}{a} born ?"


def _word(rng: random.Random) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(3)).capitalize()


def _names(rng: random.Random, n: int, words: int = 1) -> list[str]:
    out: set[str] = set()
    while len(out) < n:
        out.add(" ".join(_word(rng) for _ in range(words)))
    return sorted(out)


def _synthetic_passage(rng: random.Random, title: str, key: str, k: int, n_sent: int) -> Passage:
    fillers = rng.sample(_FILLERS, min(n_sent - 1, len(_FILLERS)))
    while len(fillers) < n_sent - 1:
        fillers.append(rng.choice(_FILLERS))
    sentences = [f.format(e=title) for f in fillers]
    sentences.insert(k, key)
    return Passage(title, sentences)


def generate_synthetic(config: SyntheticConfig) -> list[QuestionInstance]:
    """Deterministic bridge-chain corpus in the HotpotQA data model.

    Hop i's key sentence names the entity of hop i+1; the last hop's key
    sentence carries the answer value. Distractors use the same templates
    over fresh entities, so surface form alone does not identify the gold pair.
    """
    rng = random.Random(config.rng_seed)
    names = _names(rng, config.vocab_size, config.title_words)
    values = [n.lower() + "ville" for n in _names(rng, config.vocab_size)]
    n_sent = config.sentences_per_passage
    instances = []
    for n in range(config.num_instances):
        ents = rng.sample(names, config.hops + config.num_distractors + 1)
        chain, spare = ents[: config.hops], ents[config.hops :]
        answer, *other_values = rng.sample(values, 1 + config.num_distractors)
        gold: list[Passage] = []
        supports = set()
        for h, title in enumerate(chain):
            last = h == config.hops - 1
            key = _VALUE.format(b=title, v=answer) if last else _LINK.format(a=title, b=chain[h + 1])
            k = rng.randrange(n_sent)
            p = _synthetic_passage(rng, title, key, k, n_sent)
            if not last:
                p = Passage(p.title, p.sentences, (chain[h + 1],))
            gold.append(p)
            supports.add((title, k))
        distractors = []
        for d in range(config.num_distractors):
            title = spare[d]
            k = rng.randrange(n_sent)
            if d % 2 == 0:
                key = _LINK.format(a=title, b=spare[d + 1] if d + 1 < len(spare) else spare[0])
            else:
                key = _VALUE.format(b=title, v=other_values[d])
            distractors.append(_synthetic_passage(rng, title, key, k, n_sent))
        passages = gold + distractors
        rng.shuffle(passages)
        instances.append(
            QuestionInstance(
                id=f"syn-{config.rng_seed}-{n:05d}",
                question=_QUESTION.format(chain="the founder of " * (config.hops - 1), a=chain[0]),
                passages=tuple(passages),
                answer=answer,
                question_type="bridge",
                gold_supports=frozenset(supports),
            )
        )
    return instances
