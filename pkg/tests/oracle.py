"""Brute-force reference scorer and the hand-built scoring fixture.

Written without reusing any code from pathfid.metrics: normalization is a
character loop, token overlap is found by greedy one-to-one matching, and
support overlap by pairwise comparison.
"""

from __future__ import annotations

import string

from pathfid.corpus import Passage, QuestionInstance
from pathfid.metrics import Prediction


def oracle_normalize(text: str) -> list[str]:
    kept = []
    for ch in text.lower():
        if ch in string.punctuation:
            continue
        kept.append(ch)
    words = "".join(kept).split()
    return [w for w in words if w not in ("a", "an", "the")]


def oracle_answer(pred: str, gold: str) -> tuple[float, float, float, float]:
    """(em, precision, recall, f1)."""
    p, g = oracle_normalize(pred), oracle_normalize(gold)
    if not p and not g:
        return 1.0, 1.0, 1.0, 1.0
    em = 1.0 if p == g else 0.0
    used = [False] * len(g)
    matched = 0
    for tok in p:
        for i, other in enumerate(g):
            if not used[i] and other == tok:
                used[i] = True
                matched += 1
                break
    if matched == 0:
        return em, 0.0, 0.0, 0.0
    prec, rec = matched / len(p), matched / len(g)
    return em, prec, rec, 2 * prec * rec / (prec + rec)


def oracle_support(pred, gold) -> tuple[float, float, float, float]:
    p = []
    for item in pred:
        if tuple(item) not in p:
            p.append(tuple(item))
    g = []
    for item in gold:
        if tuple(item) not in g:
            g.append(tuple(item))
    if not p and not g:
        return 1.0, 1.0, 1.0, 1.0
    tp = sum(1 for x in p if x in g)
    em = 1.0 if tp == len(p) == len(g) else 0.0
    if tp == 0:
        return em, 0.0, 0.0, 0.0
    prec, rec = tp / len(p), tp / len(g)
    return em, prec, rec, 2 * prec * rec / (prec + rec)


def oracle_aggregate(cases) -> dict[str, float]:
    totals = dict.fromkeys(("answer_em", "answer_f1", "support_em", "support_f1", "joint_em", "joint_f1"), 0.0)
    for pred_a, gold_a, pred_s, gold_s in cases:
        a_em, a_p, a_r, a_f1 = oracle_answer(pred_a, gold_a)
        s_em, s_p, s_r, s_f1 = oracle_support(pred_s, gold_s)
        jp, jr = a_p * s_p, a_r * s_r
        totals["answer_em"] += a_em
        totals["answer_f1"] += a_f1
        totals["support_em"] += s_em
        totals["support_f1"] += s_f1
        totals["joint_em"] += a_em * s_em
        totals["joint_f1"] += 2 * jp * jr / (jp + jr) if jp + jr > 0 else 0.0
    return {k: v / len(cases) for k, v in totals.items()}


M1, M2 = ("Memphis Hustle", 0), ("Memphis Hustle", 1)
S1, S2, S3 = ("Southaven, Mississippi", 0), ("Southaven, Mississippi", 1), ("Southaven, Mississippi", 2)
K1, T2 = ("Kiss and Tell (1945 film)", 0), ("Shirley Temple", 1)

# (pred answer, gold answer, pred supports, gold supports)
CASES = [
    ("Chief of Protocol of the United States", "Chief of Protocol", [K1, T2], [K1, T2]),
    ("48,982", "48982", [M1, M2, S1, S3], [M1, M2, S1, S3]),
    ("12,430", "48,982", [M1, M2, S1], [M1, M2, S1, S3]),
    ("The Beatles", "beatles", [("A", 0)], [("A", 0), ("B", 1)]),
    ("an apple a day", "Apple Day!", [("A", 0), ("B", 2)], [("A", 0), ("B", 1)]),
    ("yes", "no", [("A", 0), ("B", 0)], [("A", 0), ("B", 0)]),
    ("", "", [], [("A", 1), ("B", 0)]),
    ("", "something", [("X", 0)], [("A", 0), ("B", 0)]),
    ("New York City", "New York", [("A", 0), ("B", 0), ("C", 3)], [("A", 0), ("B", 0)]),
    ("the the the", "the", [("A", 0), ("B", 0)], [("B", 0), ("A", 0)]),
    ("1.5 million", "1,5 million", [("A", 2)], [("A", 2), ("B", 4), ("C", 0)]),
    ("Paris, France", "France Paris", [("A", 0), ("B", 5)], [("A", 0), ("B", 5)]),
    ("red red blue", "red blue blue", [("A", 0), ("A", 1), ("B", 0)], [("A", 0), ("A", 1), ("B", 1)]),
    ("Shirley Temple Black", "Shirley Temple", [T2], [K1, T2]),
    ("United States ambassador", "Chief of Protocol", [K1, T2], [K1, T2]),
    ("May 9, 1902", "9 May 1902", [("A", 0), ("B", 0), ("B", 1)], [("A", 0), ("B", 0), ("B", 1), ("B", 2)]),
    ("It's", "its", [("A", 0), ("B", 0)], [("C", 0), ("D", 0)]),
    ("A", "a", [("A", 0), ("B", 0)], [("A", 0), ("B", 0)]),
    ("three", "3", [("A", 0), ("B", 0), ("C", 0), ("D", 0), ("E", 0)], [("A", 0), ("B", 0), ("C", 0), ("D", 0), ("E", 0)]),
    ("DeSoto County, Mississippi", "Desoto county mississippi", [S1, S2], [S1, S3]),
]


def fixture_instances() -> tuple[list[Prediction], list[QuestionInstance]]:
    """Turn CASES into gold instances (passages sized to fit the supports) and predictions."""
    preds, gold = [], []
    for n, (pred_a, gold_a, pred_s, gold_s) in enumerate(CASES):
        sizes: dict[str, int] = {}
        for title, i in gold_s:
            sizes[title] = max(sizes.get(title, 0), i + 1)
        passages = tuple(Passage(t, tuple(f"{t} sentence {i} ." for i in range(k))) for t, k in sizes.items())
        passages += (Passage("Filler", ("nothing here .",)),)
        gold.append(
            QuestionInstance(f"case-{n:02d}", "q ?", passages, gold_a, gold_supports=frozenset(gold_s))
        )
        preds.append(Prediction(f"case-{n:02d}", pred_a, frozenset(pred_s)))
    return preds, gold
