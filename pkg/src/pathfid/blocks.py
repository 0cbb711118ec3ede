"""Encoder input blocks for the FiD, PathFid and PathFid+ formulations."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .corpus import Passage

MAX_FACTS = 32
MAX_HOPS = 8
MAX_BLOCK_LEN = {"fid": 256, "path": 256, "path_plus": 512}

ANSWER = "<answer>"
FIELD_PREFIXES = ("question:", "title:", "context:")
CONTEXT_MARKERS = ("<context-1>", "<context-2>")

_FACT_RE = re.compile(r"^<f([1-9][0-9]*)>$")
_TITLE_RE = re.compile(r"^<title-([1-9][0-9]*)>$")
_FACTS_RE = re.compile(r"^<facts-([1-9][0-9]*)>$")


def fact_marker(i: int) -> str:
    if not 1 <= i <= MAX_FACTS:
        raise ValueError(f"fact index {i} outside 1..{MAX_FACTS}")
    return f"<f{i}>"


def title_marker(k: int) -> str:
    return f"<title-{k}>"


def facts_marker(k: int) -> str:
    return f"<facts-{k}>"


def fact_index(token: str) -> int | None:
    m = _FACT_RE.match(token)
    if m and int(m.group(1)) <= MAX_FACTS:
        return int(m.group(1))
    return None


def title_index(token: str) -> int | None:
    m = _TITLE_RE.match(token)
    return int(m.group(1)) if m else None


def facts_index(token: str) -> int | None:
    m = _FACTS_RE.match(token)
    return int(m.group(1)) if m else None


@dataclass(frozen=True)
class MarkerVocabulary:
    max_facts: int = MAX_FACTS
    max_hops: int = MAX_HOPS

    @property
    def fact_markers(self) -> list[str]:
        return [f"<f{i}>" for i in range(1, self.max_facts + 1)]

    @property
    def title_markers(self) -> list[str]:
        return [title_marker(k) for k in range(1, self.max_hops + 1)]

    @property
    def facts_markers(self) -> list[str]:
        return [facts_marker(k) for k in range(1, self.max_hops + 1)]

    def all_tokens(self) -> list[str]:
        return [
            *FIELD_PREFIXES,
            *self.fact_markers,
            *self.title_markers,
            *self.facts_markers,
            ANSWER,
            *CONTEXT_MARKERS,
        ]


MARKERS = MarkerVocabulary()
_MARKER_SET = frozenset(MARKERS.all_tokens())


def is_marker(token: str) -> bool:
    return token in _MARKER_SET


def tokenize(text: str) -> list[str]:
    return text.split()


@dataclass(frozen=True)
class InputBlock:
    tokens: tuple[str, ...]
    source_titles: tuple[str, ...]
    kind: str

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    @property
    def duplicated(self) -> bool:
        return len(self.source_titles) == 2 and self.source_titles[0] == self.source_titles[1]

    def __len__(self) -> int:
        return len(self.tokens)


def _check_question(q: str) -> None:
    if not q.strip():
        raise ValueError("question is empty")


def path_context(p: Passage) -> list[str]:
    if len(p) > MAX_FACTS:
        raise ValueError(f"passage {p.title!r} has {len(p)} sentences; at most {MAX_FACTS} fact markers")
    out: list[str] = []
    for i, sentence in enumerate(p.sentences, start=1):
        out.append(fact_marker(i))
        out.extend(tokenize(sentence))
    return out


def build_fid_block(q: str, p: Passage) -> InputBlock:
    _check_question(q)
    text = f"question: {q} title: {p.title} context: {' '.join(p.sentences)}"
    return InputBlock(tuple(tokenize(text)), (p.title,), "fid")


def build_path_block(q: str, p: Passage) -> InputBlock:
    _check_question(q)
    tokens = ["question:", *tokenize(q), "title:", *tokenize(p.title), "context:", *path_context(p)]
    return InputBlock(tuple(tokens), (p.title,), "path")


def build_pathplus_block(q: str, p1: Passage, p2: Passage) -> InputBlock:
    _check_question(q)
    tokens = ["question:", *tokenize(q)]
    for k, p in enumerate((p1, p2), start=1):
        tokens += [title_marker(k), *tokenize(p.title), CONTEXT_MARKERS[k - 1], *path_context(p)]
    return InputBlock(tuple(tokens), (p1.title, p2.title), "path_plus")


def build_pair_set(passages: list[Passage], p_star: str) -> list[tuple[Passage, Passage]]:
    first = next((p for p in passages if p.title == p_star), None)
    if first is None:
        raise KeyError(f"p* title {p_star!r} not among passages")
    return [(first, p) for p in passages]


def truncate_block(b: InputBlock, max_len: int | None = None) -> InputBlock:
    """Right-truncate to ``max_len`` tokens without leaving a trailing marker.

    A marker only makes sense with content after it, so any markers (and
    field prefixes) left at the cut point are dropped as well.
    """
    if max_len is None:
        max_len = MAX_BLOCK_LEN[b.kind]
    if len(b.tokens) <= max_len:
        return b
    tokens = list(b.tokens[:max_len])
    while tokens and is_marker(tokens[-1]):
        tokens.pop()
    if not tokens or tokens[0] != "question:" or len(tokens) < 2:
        raise ValueError(f"max_len={max_len} leaves no room for the question prefix")
    return InputBlock(tuple(tokens), b.source_titles, b.kind)


def build_blocks(
    question: str,
    passages: list[Passage],
    kind: str,
    p_star: str | None = None,
    max_len: int | None = None,
) -> list[InputBlock]:
    """All truncated blocks of one instance for the given block kind."""
    if kind == "fid":
        blocks = [build_fid_block(question, p) for p in passages]
    elif kind == "path":
        blocks = [build_path_block(question, p) for p in passages]
    elif kind == "path_plus":
        if p_star is None:
            raise ValueError("path_plus blocks need p*")
        blocks = [build_pathplus_block(question, a, b) for a, b in build_pair_set(passages, p_star)]
    else:
        raise ValueError(f"unknown block kind {kind!r}")
    return [truncate_block(b, max_len) for b in blocks]


def strip_path_block(b: InputBlock) -> list[str]:
    """Recover the sentence sequence of a ``path`` block (inverse of the context rendering)."""
    tokens = list(b.tokens)
    ctx = tokens.index("context:")
    sentences: list[list[str]] = []
    for tok in tokens[ctx + 1 :]:
        if fact_index(tok) is not None:
            sentences.append([])
        else:
            sentences[-1].append(tok)
    return [" ".join(s) for s in sentences]
