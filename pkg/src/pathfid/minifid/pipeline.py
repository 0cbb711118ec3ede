"""End-to-end runs: blocks -> training -> greedy decoding -> parsing -> evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

from ..blocks import InputBlock, build_blocks
from ..corpus import QuestionInstance
from ..hoporder import LinkGraph, instance_hops
from ..metrics import EvalReport, Prediction, evaluate
from ..pathcodec import (
    PathSchema,
    ReasoningPath,
    gold_path,
    linearize,
    parse,
    path_segment_em,
    reconstruct_titles,
    segment_em_any_order,
    truncate_target,
)
from . import model as M
from .model import ModelConfig, Params
from .tokenizer import Tokenizer
from .train import Example, TrainHparams, decode_examples, train

logger = logging.getLogger(__name__)

MODES = {"fid": "fid", "pathfid": "path", "pathfid_plus": "path_plus"}


def instance_gold_path(inst: QuestionInstance, schema: PathSchema, links: LinkGraph | None = None) -> ReasoningPath:
    return gold_path(instance_hops(inst, links), inst.gold_supports, inst.answer).restrict(schema)


def instance_target(
    inst: QuestionInstance, mode: str, schema: PathSchema, max_len: int, links: LinkGraph | None = None
) -> list[str]:
    if mode == "fid":
        return inst.answer.split()[:max_len]
    return truncate_target(linearize(instance_gold_path(inst, schema, links), schema), max_len)


def instance_blocks(
    inst: QuestionInstance, mode: str, config: ModelConfig, p_star: str | None = None
) -> list[InputBlock]:
    kind = MODES[mode]
    limit = config.max_pair_block_len if kind == "path_plus" else config.max_input_block_len
    return build_blocks(inst.question, list(inst.passages), kind, p_star=p_star, max_len=limit)


def corpus_words(corpus: Sequence[QuestionInstance]) -> set[str]:
    words: set[str] = set()
    for inst in corpus:
        words.update(inst.question.split())
        words.update(inst.answer.split())
        for p in inst.passages:
            words.update(p.title.split())
            for s in p.sentences:
                words.update(s.split())
    return words


def build_tokenizer(corpus: Sequence[QuestionInstance]) -> Tokenizer:
    return Tokenizer(corpus_words(corpus) | {"question:", "title:", "context:"})


def read_output(tokens: Sequence[str], mode: str, schema: PathSchema) -> tuple[ReasoningPath, list[str]]:
    if mode == "fid":
        return ReasoningPath((), " ".join(tokens)), []
    return parse(tokens, schema)


@dataclass
class PipelineResult:
    mode: str
    schema: PathSchema
    predictions: list[Prediction]
    report: EvalReport
    params: Params
    config: ModelConfig
    tokenizer: Tokenizer
    trace: list[dict] = field(default_factory=list)
    dump: list[dict] = field(default_factory=list)
    p_star: dict[str, str] = field(default_factory=dict)
    stage1: PipelineResult | None = None
    train_seconds: float = 0.0
    best_step: int = 0


def segment_scores(paths: Sequence[ReasoningPath], golds: Sequence[ReasoningPath], facts: bool) -> dict[str, float]:
    """Mean of each segment flag over the instances that have it."""
    sums: dict[str, list[int]] = {}
    for pred, gold in zip(paths, golds):
        for k, v in path_segment_em(pred, gold, facts).items():
            sums.setdefault(k, []).append(int(v))
    return {k: sum(v) / len(v) for k, v in sums.items()}


def predict(
    params: Params,
    tokenizer: Tokenizer,
    config: ModelConfig,
    corpus: Sequence[QuestionInstance],
    mode: str,
    schema: PathSchema,
    p_star: dict[str, str] | None = None,
) -> tuple[list[Prediction], list[dict]]:
    """Decode, parse and title-repair every instance."""
    examples = [
        Example(
            [tokenizer.encode(b.tokens) for b in instance_blocks(inst, mode, config, (p_star or {}).get(inst.id))],
            [],
        )
        for inst in corpus
    ]
    decoded = decode_examples(params, examples, config, tokenizer)
    preds, dump = [], []
    for inst, ids in zip(corpus, decoded):
        tokens = tokenizer.decode(ids)
        path, diagnostics = read_output(tokens, mode, schema)
        if path.hops:
            path = reconstruct_titles(path, inst.titles, diagnostics)
        supports = path.supports() if mode != "fid" and schema.has_facts else None
        preds.append(Prediction(inst.id, path.answer, supports, path if mode != "fid" else None))
        dump.append(
            {
                "instance_id": inst.id,
                "raw_sequence": " ".join(tokens),
                "parsed": path.to_dict(),
                "diagnostics": diagnostics,
            }
        )
    return preds, dump


def _segment_report(
    preds: Sequence[Prediction],
    dump: Sequence[dict],
    corpus: Sequence[QuestionInstance],
    mode: str,
    schema: PathSchema,
    links: LinkGraph | None,
) -> dict[str, float]:
    if mode == "fid":
        return {}
    golds = [instance_gold_path(inst, schema, links) for inst in corpus]
    paths = [p.raw_path for p in preds]
    out = segment_scores(paths, golds, schema.has_facts)
    generated = [parse(d["raw_sequence"], schema)[0] for d in dump]
    for k, v in segment_scores(generated, golds, False).items():
        if k.startswith("T"):
            out[f"{k}_generated"] = v
    out["chain"] = sum(all(h.title == g.title for h, g in zip(p.hops, gd.hops)) and len(p.hops) >= len(gd.hops) for p, gd in zip(paths, golds)) / len(golds)
    comparison = [(p, g) for p, g, inst in zip(paths, golds, corpus) if inst.question_type == "comparison"]
    if comparison:
        sums: dict[str, int] = {}
        for p, g in comparison:
            for k, v in segment_em_any_order(p, g, schema.has_facts).items():
                sums[k] = sums.get(k, 0) + int(v)
        out.update({f"comparison_any_order_{k}": v / len(comparison) for k, v in sums.items()})
    return out


def run_pipeline(
    corpus: Sequence[QuestionInstance],
    mode: str,
    schema: PathSchema | str = PathSchema.FULL,
    config: ModelConfig | None = None,
    hparams: TrainHparams | None = None,
    eval_corpus: Sequence[QuestionInstance] | None = None,
    links: LinkGraph | None = None,
) -> PipelineResult:
    """Train a model for ``mode`` on ``corpus`` and evaluate it.

    pathfid_plus first runs pathfid to predict p* (the first hop) for every
    instance and builds the pair blocks from that prediction.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    schema = PathSchema(schema)
    config = config or ModelConfig()
    hparams = hparams or TrainHparams()
    eval_corpus = list(eval_corpus) if eval_corpus is not None else list(corpus)
    corpus = list(corpus)

    stage1 = None
    p_star: dict[str, str] = {}
    if mode == "pathfid_plus":
        logger.info("pathfid_plus: training pathfid to predict p*")
        stage1 = run_pipeline(corpus, "pathfid", schema, config, hparams, eval_corpus, links)
        s1_preds, _ = predict(stage1.params, stage1.tokenizer, config, corpus, "pathfid", schema)
        for inst, pred in zip(corpus + eval_corpus, s1_preds + stage1.predictions):
            p_star.setdefault(inst.id, pred.raw_path.hops[0].title if pred.raw_path.hops else inst.titles[0])

    tokenizer = build_tokenizer(corpus)
    examples, golds = [], []
    for inst in corpus:
        blocks = instance_blocks(inst, mode, config, p_star.get(inst.id))
        target = instance_target(inst, mode, schema, config.max_target_len, links)
        examples.append(Example([tokenizer.encode(b.tokens) for b in blocks], tokenizer.encode(target)))
        golds.append(instance_gold_path(inst, schema, links) if mode != "fid" else ReasoningPath((), inst.answer))

    def scorer(decoded: list[list[int]]) -> dict[str, float]:
        paths = [read_output(tokenizer.decode(ids), mode, schema)[0] for ids in decoded]
        return segment_scores(paths, golds, schema.has_facts and mode != "fid")

    params = M.init_params(config, len(tokenizer))
    result = train(params, examples, hparams, config, tokenizer, scorer)

    preds, dump = predict(result.params, tokenizer, config, eval_corpus, mode, schema, p_star)
    report = evaluate(
        preds,
        eval_corpus,
        score_answers=schema.has_answer,
        score_supports=mode != "fid" and schema.has_facts,
    )
    report.segments = _segment_report(preds, dump, eval_corpus, mode, schema, links)
    if mode == "fid":
        report.diagnostics.append("fid mode: supporting facts are not generated")
    if not schema.has_answer:
        report.diagnostics.append(f"schema {schema.value}: no answer segment")
    return PipelineResult(
        mode=mode,
        schema=schema,
        predictions=preds,
        report=report,
        params=result.params,
        config=config,
        tokenizer=tokenizer,
        trace=result.trace,
        dump=dump,
        p_star=p_star,
        stage1=stage1,
        train_seconds=result.seconds,
        best_step=result.best_step,
    )
