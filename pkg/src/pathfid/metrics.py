"""Answer/support scoring, breakdowns, groundedness and support-F1 buckets."""

from __future__ import annotations

import csv
import io
import math
import re
import string
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .corpus import QuestionInstance

_PUNCT = set(string.punctuation)
_ARTICLES = re.compile(r"\b(a|an|the)\b")


def normalize_answer(s: str) -> str:
    """Lower text and remove punctuation, articles and extra whitespace."""
    s = s.lower()
    s = "".join(ch for ch in s if ch not in _PUNCT)
    s = _ARTICLES.sub(" ", s)
    return " ".join(s.split())


def _prf(num_same: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    if num_same == 0:
        return 0.0, 0.0, 0.0
    p = num_same / n_pred
    r = num_same / n_gold
    return p, r, 2 * p * r / (p + r)


def answer_prf(pred: str, gold: str) -> tuple[int, float, float, float]:
    p_toks = normalize_answer(pred).split()
    g_toks = normalize_answer(gold).split()
    if not p_toks and not g_toks:
        return 1, 1.0, 1.0, 1.0
    em = int(p_toks == g_toks)
    common = Counter(p_toks) & Counter(g_toks)
    p, r, f1 = _prf(sum(common.values()), len(p_toks), len(g_toks))
    return em, p, r, f1


def answer_scores(pred: str, gold: str) -> tuple[int, float]:
    em, _, _, f1 = answer_prf(pred, gold)
    return em, f1


def support_prf(pred: Iterable, gold: Iterable) -> tuple[int, float, float, float]:
    pred, gold = set(map(tuple, pred)), set(map(tuple, gold))
    if not pred and not gold:
        return 1, 1.0, 1.0, 1.0
    p, r, f1 = _prf(len(pred & gold), len(pred), len(gold))
    return int(pred == gold), p, r, f1


def support_scores(pred: Iterable, gold: Iterable) -> tuple[int, float]:
    em, _, _, f1 = support_prf(pred, gold)
    return em, f1


def token_f1(a: str, b: str) -> float:
    """Whitespace-token F1 after lowercasing (punctuation kept on tokens)."""
    ta, tb = a.lower().split(), b.lower().split()
    common = Counter(ta) & Counter(tb)
    return _prf(sum(common.values()), len(ta), len(tb))[2]


# ---------------------------------------------------------------------------
# Evaluation


@dataclass
class Prediction:
    instance_id: str
    answer: str | None = None
    supports: frozenset[tuple[str, int]] | None = None
    raw_path: object | None = None  # pathcodec.ReasoningPath


GROUNDEDNESS_ROWS = (
    ("pred_answer_in_gold_passages", "pred", "gold", "passages"),
    ("pred_answer_in_gold_supports", "pred", "gold", "supports"),
    ("gold_answer_in_pred_passages", "gold", "pred", "passages"),
    ("gold_answer_in_pred_supports", "gold", "pred", "supports"),
    ("pred_answer_in_pred_passages", "pred", "pred", "passages"),
    ("pred_answer_in_pred_supports", "pred", "pred", "supports"),
)

ROW_LABELS = {
    "pred_answer_in_gold_passages": "Pred Answer Grounded in Gold Passages",
    "pred_answer_in_gold_supports": "Pred Answer Grounded in Gold Supports",
    "gold_answer_in_pred_passages": "Gold Answer Grounded in Pred Passages",
    "gold_answer_in_pred_supports": "Gold Answer Grounded in Pred Supports",
    "pred_answer_in_pred_passages": "Pred Answer Grounded in Pred Passages",
    "pred_answer_in_pred_supports": "Pred Answer Grounded in Pred Supports",
}


def support_bucket(n: int) -> str:
    if n < 2:
        return "<2"
    return str(n) if n < 5 else ">=5"


def f1_bucket(f1: float) -> int:
    """0 for support-F1 == 0, else n such that 100*f1 lies in (10(n-1), 10n]."""
    if f1 <= 0:
        return 0
    return min(10, max(1, math.ceil(round(f1 * 10, 9))))


@dataclass
class EvalReport:
    n: int
    answer_em: float | None = None
    answer_f1: float | None = None
    support_em: float | None = None
    support_f1: float | None = None
    joint_em: float | None = None
    joint_f1: float | None = None
    breakdown: list[dict] = field(default_factory=list)
    groundedness: dict[str, float | None] = field(default_factory=dict)
    buckets: list[dict] = field(default_factory=list)
    segments: dict[str, float] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def contains_tokens(needle: str, haystack: str) -> bool:
    """Contiguous token-subsequence match on normalized text."""
    n = normalize_answer(needle).split()
    h = normalize_answer(haystack).split()
    if not n:
        return False
    k = len(n)
    return any(h[i : i + k] == n for i in range(len(h) - k + 1))


def _probe_texts(inst: QuestionInstance, pred: Prediction, source: str, unit: str) -> list[str] | None:
    if source == "gold":
        titles = inst.gold_passage_titles
        supports = inst.gold_supports
    else:
        if pred.supports is None or pred.raw_path is None:
            return None
        supports = pred.supports
        titles = {h.title for h in pred.raw_path.hops} | {t for t, _ in supports}
    by_title = {p.title: p for p in inst.passages}
    if unit == "passages":
        return [by_title[t].text for t in sorted(titles) if t in by_title]
    out = []
    for t, i in sorted(supports):
        p = by_title.get(t)
        if p is not None and 0 <= i < len(p):
            out.append(p.sentences[i])
    return out


def groundedness_row(kind: str, preds: Sequence[Prediction], gold: Sequence[QuestionInstance]) -> float | None:
    """Percentage of instances whose probe answer occurs in the probe texts.

    ``None`` when the row needs predicted supports and no prediction has them.
    """
    spec = {r[0]: r[1:] for r in GROUNDEDNESS_ROWS}
    answer_src, text_src, unit = spec[kind]
    by_id = {p.instance_id: p for p in preds}
    hits = total = 0
    for inst in gold:
        pred = by_id.get(inst.id)
        if pred is None:
            total += 1
            continue
        answer = inst.answer if answer_src == "gold" else pred.answer
        if answer is None:
            continue
        texts = _probe_texts(inst, pred, text_src, unit)
        if texts is None:
            continue
        total += 1
        hits += any(contains_tokens(answer, t) for t in texts)
    if total == 0:
        return None
    return 100.0 * hits / total


def evaluate(
    preds: Sequence[Prediction],
    gold: Sequence[QuestionInstance],
    score_answers: bool = True,
    score_supports: bool = True,
) -> EvalReport:
    ids = [p.instance_id for p in preds]
    dupes = sorted(i for i, c in Counter(ids).items() if c > 1)
    if dupes:
        raise ValueError(f"duplicate prediction ids: {dupes}")
    gold_ids = {g.id for g in gold}
    unknown = sorted(set(ids) - gold_ids)
    if unknown:
        raise KeyError(f"predictions for unknown instance ids: {unknown}")
    by_id = {p.instance_id: p for p in preds}
    report = EvalReport(n=len(gold))
    missing = [g.id for g in gold if g.id not in by_id]
    if missing:
        report.diagnostics.append(f"{len(missing)} instances without predictions scored as 0")
    if not gold:
        return report
    has_supports = score_supports and any(p.supports is not None for p in preds)

    rows = []
    for inst in gold:
        pred = by_id.get(inst.id)
        a_em, a_p, a_r, a_f1 = answer_prf(pred.answer, inst.answer) if pred and pred.answer is not None else (0, 0.0, 0.0, 0.0)
        s_em, s_p, s_r, s_f1 = (
            support_prf(pred.supports, inst.gold_supports) if pred and pred.supports is not None else (0, 0.0, 0.0, 0.0)
        )
        jp, jr = a_p * s_p, a_r * s_r
        j_f1 = 2 * jp * jr / (jp + jr) if jp + jr > 0 else 0.0
        rows.append(
            dict(
                type=inst.question_type,
                n_sup=support_bucket(len(inst.gold_supports)),
                answer_em=a_em, answer_f1=a_f1, support_em=s_em, support_f1=s_f1,
                joint_em=a_em * s_em, joint_f1=j_f1,
            )
        )

    def mean(key, subset=rows):
        return sum(r[key] for r in subset) / len(subset)

    if score_answers:
        report.answer_em, report.answer_f1 = mean("answer_em"), mean("answer_f1")
    if has_supports:
        report.support_em, report.support_f1 = mean("support_em"), mean("support_f1")
        if score_answers:
            report.joint_em, report.joint_f1 = mean("joint_em"), mean("joint_f1")

    order = {"2": 0, "3": 1, "4": 2, ">=5": 3, "<2": 4}
    keys = sorted({(r["type"], r["n_sup"]) for r in rows}, key=lambda k: (k[0], order[k[1]]))
    for qtype, nsup in keys:
        subset = [r for r in rows if r["type"] == qtype and r["n_sup"] == nsup]
        report.breakdown.append(
            dict(
                question_type=qtype,
                num_supports=nsup,
                count=len(subset),
                answer_em=mean("answer_em", subset) if score_answers else None,
                support_em=mean("support_em", subset) if has_supports else None,
            )
        )

    for kind, *_ in GROUNDEDNESS_ROWS:
        report.groundedness[kind] = groundedness_row(kind, preds, gold) if score_answers else None

    if has_supports:
        for qtype in ["all", *sorted({r["type"] for r in rows})]:
            subset = rows if qtype == "all" else [r for r in rows if r["type"] == qtype]
            for b in range(11):
                members = [r for r in subset if f1_bucket(r["support_f1"]) == b]
                report.buckets.append(
                    dict(
                        question_type=qtype,
                        bucket=b,
                        support_f1_range="0" if b == 0 else f"({10 * (b - 1)},{10 * b}]",
                        count=len(members),
                        answer_em=mean("answer_em", members) if members and score_answers else None,
                        answer_f1=mean("answer_f1", members) if members and score_answers else None,
                    )
                )
    return report


def render_text(report: EvalReport) -> str:
    def fmt(v):
        return "-" if v is None else f"{100 * v:.1f}"

    lines = [f"instances: {report.n}", "", f"{'metric':<14}{'EM':>8}{'F1':>8}"]
    lines.append(f"{'answer':<14}{fmt(report.answer_em):>8}{fmt(report.answer_f1):>8}")
    lines.append(f"{'support':<14}{fmt(report.support_em):>8}{fmt(report.support_f1):>8}")
    lines.append(f"{'joint':<14}{fmt(report.joint_em):>8}{fmt(report.joint_f1):>8}")
    if report.segments:
        lines += ["", "path segment EM"]
        lines += [f"  {k:<22}{fmt(v):>8}" for k, v in report.segments.items()]
    lines += ["", f"{'type':<12}{'#supp':>6}{'count':>7}{'ans-EM':>8}{'sup-EM':>8}"]
    for row in report.breakdown:
        lines.append(
            f"{row['question_type']:<12}{row['num_supports']:>6}{row['count']:>7}"
            f"{fmt(row['answer_em']):>8}{fmt(row['support_em']):>8}"
        )
    lines += ["", "groundedness (%)"]
    for kind, value in report.groundedness.items():
        lines.append(f"  {ROW_LABELS[kind]:<40}{'-' if value is None else f'{value:.1f}':>7}")
    if report.buckets:
        lines += ["", f"{'type':<12}{'support-F1':>11}{'count':>7}{'ans-EM':>8}{'ans-F1':>8}"]
        for b in report.buckets:
            if b["count"]:
                lines.append(
                    f"{b['question_type']:<12}{b['support_f1_range']:>11}{b['count']:>7}"
                    f"{fmt(b['answer_em']):>8}{fmt(b['answer_f1']):>8}"
                )
    for d in report.diagnostics:
        lines.append(f"note: {d}")
    return "\n".join(lines) + "\n"


def _csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: "" if row.get(k) is None else row[k] for k in columns})
    return buf.getvalue()


def report_tables(report: EvalReport) -> dict[str, str]:
    """Plot-ready CSV tables keyed by a short name."""
    summary = [
        {"metric": m, "value": getattr(report, m)}
        for m in ("answer_em", "answer_f1", "support_em", "support_f1", "joint_em", "joint_f1")
    ]
    summary += [{"metric": f"segment_{k}", "value": v} for k, v in report.segments.items()]
    return {
        "summary": _csv(summary, ["metric", "value"]),
        "breakdown": _csv(report.breakdown, ["question_type", "num_supports", "count", "answer_em", "support_em"]),
        "groundedness": _csv(
            [{"row": k, "label": ROW_LABELS[k], "percent": v} for k, v in report.groundedness.items()],
            ["row", "label", "percent"],
        ),
        "buckets": _csv(
            report.buckets, ["question_type", "bucket", "support_f1_range", "count", "answer_em", "answer_f1"]
        ),
    }
