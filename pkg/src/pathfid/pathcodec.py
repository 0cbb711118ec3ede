"""Linearized reasoning paths: encode, parse, truncate, title repair, segment EM."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .blocks import (
    ANSWER,
    MAX_FACTS,
    fact_index,
    fact_marker,
    facts_index,
    facts_marker,
    is_marker,
    title_index,
    title_marker,
)
from .metrics import normalize_answer, token_f1


class PathSchema(str, Enum):
    TITLES_ONLY = "titles_only"
    TITLES_ANSWER = "titles_answer"
    FULL = "full"

    @property
    def has_facts(self) -> bool:
        return self is PathSchema.FULL

    @property
    def has_answer(self) -> bool:
        return self is not PathSchema.TITLES_ONLY


@dataclass(frozen=True)
class Hop:
    title: str
    facts: tuple[int, ...] = ()

    def __post_init__(self):
        facts = tuple(self.facts)
        if any(f < 1 for f in facts):
            raise ValueError(f"fact indices must be >= 1, got {facts}")
        if any(a >= b for a, b in zip(facts, facts[1:])):
            raise ValueError(f"fact indices must be strictly ascending, got {facts}")
        object.__setattr__(self, "facts", facts)


@dataclass(frozen=True)
class ReasoningPath:
    hops: tuple[Hop, ...] = ()
    answer: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "hops", tuple(self.hops))

    def restrict(self, schema: PathSchema) -> ReasoningPath:
        hops = self.hops if schema.has_facts else tuple(Hop(h.title) for h in self.hops)
        return ReasoningPath(hops, self.answer if schema.has_answer else None)

    def supports(self) -> frozenset[tuple[str, int]]:
        """(title, 0-based sentence index) pairs named by the path."""
        return frozenset((h.title, f - 1) for h in self.hops for f in h.facts)

    def to_dict(self) -> dict:
        return {"hops": [{"title": h.title, "facts": list(h.facts)} for h in self.hops], "answer": self.answer}

    @classmethod
    def from_dict(cls, d: dict) -> ReasoningPath:
        return cls(tuple(Hop(h["title"], tuple(h.get("facts", ()))) for h in d.get("hops", ())), d.get("answer"))


def gold_path(hop_passages, supports, answer: str | None) -> ReasoningPath:
    """Gold path from ordered passages and 0-based supporting facts."""
    hops = []
    for p in hop_passages:
        facts = sorted(i + 1 for t, i in supports if t == p.title)
        hops.append(Hop(p.title, tuple(facts)))
    return ReasoningPath(tuple(hops), answer)


def linearize(path: ReasoningPath, schema: PathSchema | str = PathSchema.FULL) -> list[str]:
    schema = PathSchema(schema)
    if schema.has_answer and path.answer is None:
        raise ValueError(f"schema {schema.value} needs an answer")
    out: list[str] = []
    for k, hop in enumerate(path.hops, start=1):
        out.append(title_marker(k))
        out.extend(hop.title.split())
        if schema.has_facts:
            out.append(facts_marker(k))
            for j in hop.facts:
                if j > MAX_FACTS:
                    raise ValueError(f"fact index {j} exceeds {MAX_FACTS} markers")
                out.append(fact_marker(j))
    if schema.has_answer:
        out.append(ANSWER)
        out.extend(path.answer.split())
    return out


def parse(
    tokens: Sequence[str] | str, schema: PathSchema | str = PathSchema.FULL
) -> tuple[ReasoningPath, list[str]]:
    """Recover a path from decoder output; never raises.

    Returns the (possibly partial) path and a list of diagnostics describing
    anything that had to be skipped or repaired.
    """
    schema = PathSchema(schema)
    if isinstance(tokens, str):
        tokens = tokens.split()
    tokens = list(tokens)
    diagnostics: list[str] = []
    if not tokens:
        return ReasoningPath(), ["empty sequence"]

    answer = None
    if ANSWER in tokens:
        cut = tokens.index(ANSWER)
        tail = tokens[cut + 1 :]
        answer = " ".join(tail)
        if any(is_marker(t) for t in tail):
            diagnostics.append("marker tokens inside answer")
        tokens = tokens[:cut]

    hops: list[tuple[list[str], list[int]]] = []
    in_facts = False
    for pos, tok in enumerate(tokens):
        k = title_index(tok)
        if k is not None:
            if k != len(hops) + 1:
                diagnostics.append(f"{tok} at position {pos} opens hop {len(hops) + 1}")
            hops.append(([], []))
            in_facts = False
            continue
        k = facts_index(tok)
        if k is not None:
            if not hops:
                diagnostics.append(f"{tok} before any title ignored")
            else:
                if k != len(hops):
                    diagnostics.append(f"{tok} at position {pos} attached to hop {len(hops)}")
                if in_facts:
                    diagnostics.append(f"repeated facts marker at position {pos}")
                in_facts = True
            continue
        j = fact_index(tok)
        if j is not None:
            if not in_facts:
                diagnostics.append(f"{tok} at position {pos} outside a facts segment ignored")
            elif j in hops[-1][1]:
                diagnostics.append(f"duplicate {tok} in hop {len(hops)} dropped")
            else:
                hops[-1][1].append(j)
            continue
        if not hops:
            diagnostics.append(f"token {tok!r} before any title ignored")
        elif in_facts:
            diagnostics.append(f"token {tok!r} inside facts segment of hop {len(hops)} ignored")
        else:
            if is_marker(tok):
                diagnostics.append(f"marker {tok} inside title of hop {len(hops)}")
            hops[-1][0].append(tok)

    if not hops:
        diagnostics.append("no title segments")
    result = []
    for n, (title, facts) in enumerate(hops, start=1):
        if not title:
            diagnostics.append(f"empty title in hop {n}")
        if facts != sorted(facts):
            diagnostics.append(f"fact markers of hop {n} out of order")
        result.append(Hop(" ".join(title), tuple(sorted(facts))))
    path = ReasoningPath(tuple(result), answer)
    restricted = path.restrict(schema)
    if restricted != path:
        diagnostics.append(f"segments outside schema {schema.value} dropped")
    return restricted, diagnostics


def truncate_target(tokens: Sequence[str], max_len: int) -> list[str]:
    """Cut the pre-answer region so the whole target fits in ``max_len``."""
    tokens = list(tokens)
    if len(tokens) <= max_len:
        return tokens
    cut = tokens.index(ANSWER) if ANSWER in tokens else len(tokens)
    prefix, suffix = tokens[:cut], tokens[cut:]
    if len(suffix) > max_len:
        raise ValueError(f"answer suffix of {len(suffix)} tokens exceeds max_len={max_len}")
    prefix = prefix[: max_len - len(suffix)]
    while prefix and (facts_index(prefix[-1]) is not None or title_index(prefix[-1]) is not None):
        prefix.pop()
    return prefix + suffix


def reconstruct_titles(
    path: ReasoningPath, candidates: Sequence[str], diagnostics: list[str] | None = None
) -> ReasoningPath:
    """Replace each hop title with the candidate of highest token F1 (first wins ties)."""
    if not candidates:
        raise ValueError("no candidate titles")
    hops = []
    for hop in path.hops:
        scores = [token_f1(hop.title, c) for c in candidates]
        best = max(range(len(candidates)), key=lambda i: (scores[i], -i))
        if scores[best] == 0 and diagnostics is not None:
            diagnostics.append(f"title {hop.title!r} shares no tokens with any candidate")
        hops.append(Hop(candidates[best], hop.facts))
    return ReasoningPath(tuple(hops), path.answer)


def path_segment_em(pred: ReasoningPath, gold: ReasoningPath, facts: bool = True) -> dict[str, bool]:
    """Per-segment exact match: T1, F1, T2, F2, ..., Answer."""
    flags: dict[str, bool] = {}
    for k, g in enumerate(gold.hops, start=1):
        p = pred.hops[k - 1] if k <= len(pred.hops) else None
        flags[f"T{k}"] = p is not None and p.title == g.title
        if facts:
            flags[f"F{k}"] = p is not None and set(p.facts) == set(g.facts)
    if gold.answer is not None:
        flags["Answer"] = pred.answer is not None and normalize_answer(pred.answer) == normalize_answer(gold.answer)
    return flags


def segment_em_any_order(pred: ReasoningPath, gold: ReasoningPath, facts: bool = True) -> dict[str, bool]:
    """Segment EM under the better of the gold order and its reversal (comparison questions)."""
    straight = path_segment_em(pred, gold, facts)
    flipped = path_segment_em(pred, ReasoningPath(tuple(reversed(gold.hops)), gold.answer), facts)
    return max(straight, flipped, key=lambda f: sum(f.values()))
