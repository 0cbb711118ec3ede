"""Order unordered gold passages into a reasoning chain."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Passage, QuestionInstance
from .metrics import normalize_answer

LinkGraph = Mapping[str, "set[str] | frozenset[str] | Sequence[str]"]


def load_link_graph(path: str | Path) -> dict[str, frozenset[str]]:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    return {str(k): frozenset(v) for k, v in data.items()}


def contains_answer(p: Passage, answer: str) -> bool:
    needle = normalize_answer(answer)
    return bool(needle) and needle in normalize_answer(p.text)


def _links(p: Passage, links: LinkGraph | None) -> set[str]:
    out = set(p.links)
    if links:
        out |= set(links.get(p.title, ()))
    return out


def order_hops(gold: Sequence[Passage], answer: str, links: LinkGraph | None = None) -> list[Passage]:
    """Two-hop order: the sole answer-bearing passage goes last.

    Ties (both or neither contain the answer) fall back to hyperlinks (the
    linking passage goes first), then to lexicographic title order.
    """
    gold = list(gold)
    if len(gold) != 2:
        raise ValueError(f"hop ordering needs exactly 2 gold passages, got {len(gold)}")
    if not answer.strip():
        raise ValueError("answer is empty")
    a, b = gold
    has_a, has_b = contains_answer(a, answer), contains_answer(b, answer)
    if has_a != has_b:
        return [b, a] if has_a else [a, b]
    a_to_b = b.title in _links(a, links)
    b_to_a = a.title in _links(b, links)
    if a_to_b != b_to_a:
        return [a, b] if a_to_b else [b, a]
    return sorted(gold, key=lambda p: p.title)


def instance_hops(inst: QuestionInstance, links: LinkGraph | None = None) -> list[Passage]:
    """Hop sequence for an instance; corpus order when there are not exactly two gold passages."""
    gold = inst.gold_passages()
    if len(gold) == 2 and inst.answer.strip():
        return order_hops(gold, inst.answer, links)
    return gold
