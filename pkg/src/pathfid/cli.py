"""Command-line entry point: ``pathfid <command> ...``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .blocks import build_blocks
from .corpus import (
    CorpusError,
    QuestionInstance,
    Rejected,
    SyntheticConfig,
    dump_hotpot,
    generate_synthetic,
    load_hotpot,
    load_iirc,
)
from .hoporder import load_link_graph
from .metrics import EvalReport, Prediction, evaluate, render_text, report_tables
from .pathcodec import PathSchema, ReasoningPath, linearize, parse, reconstruct_titles

logger = logging.getLogger("pathfid")

ENV_PREFIX = "PATHFID_"
FORMATS = ("json", "text", "csv")


class UsageError(Exception):
    """Bad invocation; reported with usage text and exit code 1."""


class InputError(Exception):
    """Malformed or inconsistent input files; exit code 2."""


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    mode: str = "pathfid"
    schema: str = "full"
    source: str = "synthetic"
    corpus: str | None = None
    eval_corpus: str | None = None
    articles: str | None = None
    links: str | None = None
    output_dir: str = "runs/default"
    seed: int | None = None
    synthetic: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    hparams: dict = field(default_factory=dict)

    def validate(self) -> None:
        from .minifid.model import ModelConfig
        from .minifid.pipeline import MODES
        from .minifid.train import TrainHparams

        if self.mode not in MODES:
            raise UsageError(f"mode must be one of {sorted(MODES)}, got {self.mode!r}")
        try:
            PathSchema(self.schema)
        except ValueError:
            raise UsageError(f"schema must be one of {[s.value for s in PathSchema]}, got {self.schema!r}") from None
        if self.mode == "fid" and self.schema != PathSchema.FULL.value:
            raise UsageError("mode fid generates answers only; schema must be left at 'full'")
        if self.source not in ("synthetic", "hotpot", "iirc"):
            raise UsageError(f"unknown source {self.source!r}")
        if self.source != "synthetic" and not self.corpus:
            raise UsageError(f"source {self.source} needs a corpus path")
        for name, cls, values in (
            ("synthetic", SyntheticConfig, self.synthetic),
            ("model", ModelConfig, self.model),
            ("hparams", TrainHparams, self.hparams),
        ):
            unknown = set(values) - {f.name for f in dataclasses.fields(cls)}
            if unknown:
                raise UsageError(f"unknown {name} keys: {sorted(unknown)}")

    def synthetic_config(self) -> SyntheticConfig:
        values = dict(self.synthetic)
        if self.seed is not None:
            values.setdefault("rng_seed", self.seed)
        return SyntheticConfig(**values)

    def model_config(self):
        from .minifid.model import ModelConfig

        values = dict(self.model)
        if self.seed is not None:
            values.setdefault("rng_seed", self.seed)
        return ModelConfig(**values)

    def train_hparams(self):
        from .minifid.train import TrainHparams

        values = dict(self.hparams)
        if self.seed is not None:
            values.setdefault("seed", self.seed)
        return TrainHparams(**values)


_SECTIONS = ("synthetic", "model", "hparams")


def _coerce(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_dotted(config: dict, key: str, value: Any) -> None:
    section, _, name = key.partition(".")
    if name:
        config.setdefault(section, {})[name] = value
    else:
        config[key] = value


def env_overrides(environ: dict[str, str]) -> dict:
    """PATHFID_MODE=fid, PATHFID_HPARAMS_LR=0.1, PATHFID_MODEL_D_MODEL=32, ..."""
    out: dict = {}
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX) :].lower()
        for section in _SECTIONS:
            if name.startswith(section + "_"):
                _set_dotted(out, f"{section}.{name[len(section) + 1:]}", _coerce(value))
                break
        else:
            out[name] = _coerce(value)
    return out


def _merge(base: dict, update: dict) -> dict:
    out = dict(base)
    for k, v in update.items():
        out[k] = {**out.get(k, {}), **v} if k in _SECTIONS and isinstance(v, dict) else v
    return out


def resolve_config(path: str | Path | None, environ: dict[str, str], overrides: dict) -> RunConfig:
    """Defaults < config file < environment < command-line flags."""
    values: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            values = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise UsageError(f"{path}: invalid JSON ({e})") from e
        if not isinstance(values, dict):
            raise UsageError(f"{path}: expected a JSON object")
    values = _merge(_merge(values, env_overrides(environ)), overrides)
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    config = RunConfig(**values)
    config.validate()
    return config


# ---------------------------------------------------------------------------
# I/O helpers


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _write_jsonl(path: str | Path | None, rows: Sequence[dict]) -> None:
    text = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        _write_text(Path(path), text)


def _read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, start=1):
            if line.strip():
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as e:
                    raise InputError(f"{path}:{n}: invalid JSON ({e})") from e
    return rows


def _load_corpus(path: str | Path) -> list[QuestionInstance]:
    rejected: list[Rejected] = []
    corpus = load_hotpot(path, rejected)
    for r in rejected:
        print(f"rejected {r.record_id}: {r.field}: {r.reason}", file=sys.stderr)
    return corpus


def _links(path: str | None):
    return load_link_graph(path) if path else None


def trace_csv(trace: Sequence[dict]) -> str:
    keys = ["step", "loss", "grad_norm"]
    for row in trace:
        keys += [k for k in row if k not in keys]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    for row in trace:
        writer.writerow({k: ("" if row.get(k) is None else repr(row[k]) if isinstance(row.get(k), float) else row[k]) for k in keys})
    return buf.getvalue()


def render_report(report: EvalReport, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        return report_tables(report)["summary"]
    return render_text(report)


def write_report(report: EvalReport, out_dir: Path, figures: bool = True) -> list[Path]:
    """report.json, report.txt, one CSV per table and the bucket figures."""
    written = [
        _write_text(out_dir / "report.json", render_report(report, "json")),
        _write_text(out_dir / "report.txt", render_text(report)),
    ]
    for name, text in report_tables(report).items():
        written.append(_write_text(out_dir / f"{name}.csv", text))
    if figures and report.buckets:
        from .plots import plot_buckets

        for qtype in dict.fromkeys(b["question_type"] for b in report.buckets):
            p = plot_buckets(report.buckets, out_dir / f"buckets_{qtype}.png", qtype)
            if p is not None:
                written.append(p)
    return written


def read_predictions(path: str | Path, schema: PathSchema | None = None) -> list[Prediction]:
    """Official {"answer": ..., "sp": ...} JSON or a prediction-dump JSONL file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = None
    if isinstance(data, dict) and ("answer" in data or "sp" in data):
        answers, sp = data.get("answer", {}), data.get("sp")
        if not isinstance(answers, dict) or (sp is not None and not isinstance(sp, dict)):
            raise InputError(f"{path}: 'answer' and 'sp' must map ids to values")
        ids = list(dict.fromkeys([*answers, *(sp or {})]))
        preds = []
        for i in ids:
            supports = None
            if sp is not None:
                try:
                    supports = frozenset((str(t), int(s)) for t, s in sp.get(i, []))
                except (TypeError, ValueError) as e:
                    raise InputError(f"{path}: bad sp entry for {i}: {e}") from e
            answer = answers.get(i)
            preds.append(Prediction(i, None if answer is None else str(answer), supports))
        return preds

    preds = []
    for n, row in enumerate(_read_jsonl(path), start=1):
        try:
            path_obj = ReasoningPath.from_dict(row["parsed"])
            instance_id = str(row["instance_id"])
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"{path}:{n}: not a prediction dump record ({e})") from e
        has_facts = schema.has_facts if schema is not None else any(h.facts for h in path_obj.hops)
        supports = path_obj.supports() if path_obj.hops and has_facts else None
        preds.append(Prediction(instance_id, path_obj.answer, supports, path_obj if path_obj.hops else None))
    return preds


def _score(gold_path: str, pred_path: str, schema: str | None) -> EvalReport:
    try:
        gold = _load_corpus(gold_path)
    except (CorpusError, OSError) as e:
        raise InputError(str(e)) from e
    schema_obj = PathSchema(schema) if schema else None
    try:
        preds = read_predictions(pred_path, schema_obj)
    except OSError as e:
        raise InputError(str(e)) from e
    known = {g.id for g in gold}
    unknown = sorted({p.instance_id for p in preds} - known)
    if unknown:
        for i in unknown:
            print(f"unknown instance id: {i}", file=sys.stderr)
        raise InputError(f"{len(unknown)} predictions reference unknown instance ids")
    try:
        return evaluate(
            preds,
            gold,
            score_answers=schema_obj.has_answer if schema_obj else True,
            score_supports=schema_obj.has_facts if schema_obj else True,
        )
    except ValueError as e:
        raise InputError(str(e)) from e


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(args) -> int:
    rejected: list[Rejected] = []
    if args.source == "hotpot":
        corpus = load_hotpot(args.input, rejected)
    else:
        corpus = load_iirc(args.input, args.articles, rejected)
    for r in rejected:
        print(f"rejected {r.record_id}: {r.field}: {r.reason}", file=sys.stderr)
    dump_hotpot(corpus, args.output)
    print(f"{len(corpus)} instances written to {args.output}, {len(rejected)} rejected", file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    config = SyntheticConfig(
        num_instances=args.instances,
        num_distractors=args.distractors,
        hops=args.hops,
        vocab_size=args.vocab_size,
        sentences_per_passage=args.sentences,
        rng_seed=args.seed,
        title_words=args.title_words,
    )
    dump_hotpot(generate_synthetic(config), args.output)
    return 0


def _p_star_from_dump(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    out = {}
    for row in _read_jsonl(path):
        hops = row.get("parsed", {}).get("hops") or []
        if hops:
            out[str(row["instance_id"])] = hops[0]["title"]
    return out


def cmd_blocks_dump(args) -> int:
    from .hoporder import instance_hops

    corpus = _load_corpus(args.corpus)
    links = _links(args.links)
    p_star = _p_star_from_dump(args.p_star)
    rows = []
    for inst in corpus:
        star = None
        if args.kind == "path_plus":
            star = p_star.get(inst.id) or instance_hops(inst, links)[0].title
        for n, b in enumerate(build_blocks(inst.question, list(inst.passages), args.kind, p_star=star, max_len=args.max_len)):
            rows.append({"instance_id": inst.id, "block_index": n, "kind": b.kind, "text": b.text})
    _write_jsonl(args.output, rows)
    return 0


def cmd_linearize(args) -> int:
    from .minifid.pipeline import instance_gold_path

    corpus = _load_corpus(args.corpus)
    links = _links(args.links)
    schema = PathSchema(args.schema)
    rows = [
        {"instance_id": inst.id, "target": " ".join(linearize(instance_gold_path(inst, schema, links), schema))}
        for inst in corpus
    ]
    _write_jsonl(args.output, rows)
    return 0


def cmd_parse(args) -> int:
    schema = PathSchema(args.schema)
    candidates = {inst.id: inst.titles for inst in _load_corpus(args.corpus)} if args.corpus else {}
    rows = []
    source = sys.stdin if args.input == "-" else open(args.input, encoding="utf-8")
    with source:
        for n, line in enumerate(source, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                record = None
            if isinstance(record, dict) and "raw_sequence" in record:
                instance_id, raw = str(record.get("instance_id", n)), str(record["raw_sequence"])
            else:
                instance_id, raw = str(n), line
            path, diagnostics = parse(raw, schema)
            if instance_id in candidates and path.hops:
                path = reconstruct_titles(path, candidates[instance_id], diagnostics)
            rows.append(
                {"instance_id": instance_id, "raw_sequence": raw, "parsed": path.to_dict(), "diagnostics": diagnostics}
            )
    _write_jsonl(args.output, rows)
    return 0


def _run_config_from_args(args, config_path: str | None) -> RunConfig:
    overrides: dict = {}
    for key in ("mode", "schema", "source", "corpus", "eval_corpus", "articles", "links", "output_dir", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    for key in ("lr", "steps", "batch_size", "eval_every", "clip_norm"):
        value = getattr(args, key, None)
        if value is not None:
            _set_dotted(overrides, f"hparams.{key}", value)
    for key in ("d_model", "n_heads"):
        value = getattr(args, key, None)
        if value is not None:
            _set_dotted(overrides, f"model.{key}", value)
    if getattr(args, "layers", None) is not None:
        _set_dotted(overrides, "model.n_layers_enc", args.layers)
        _set_dotted(overrides, "model.n_layers_dec", args.layers)
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        _set_dotted(overrides, key, _coerce(value))
    return resolve_config(config_path, dict(os.environ), overrides)


def _corpora(config: RunConfig) -> tuple[list[QuestionInstance], list[QuestionInstance] | None]:
    if config.source == "synthetic":
        corpus = generate_synthetic(config.synthetic_config())
    elif config.source == "hotpot":
        corpus = _load_corpus(config.corpus)
    else:
        corpus = load_iirc(config.corpus, config.articles)
    eval_corpus = _load_corpus(config.eval_corpus) if config.eval_corpus else None
    return corpus, eval_corpus


def _train(config: RunConfig):
    import torch

    from .minifid.pipeline import run_pipeline

    torch.set_num_threads(1)
    corpus, eval_corpus = _corpora(config)
    logger.info("training %s on %d instances", config.mode, len(corpus))
    return run_pipeline(
        corpus,
        config.mode,
        config.schema,
        config.model_config(),
        config.train_hparams(),
        eval_corpus,
        _links(config.links),
    )


def _checkpoint_extra(config: RunConfig, result) -> dict:
    return {
        "mode": result.mode,
        "schema": result.schema.value,
        "best_step": result.best_step,
        "hparams": dataclasses.asdict(config.train_hparams()),
        "p_star": result.p_star,
    }


def cmd_train(args) -> int:
    from .minifid.checkpoint import save_checkpoint

    config = _run_config_from_args(args, args.config)
    result = _train(config)
    save_checkpoint(args.checkpoint, result.params, result.config, result.tokenizer, _checkpoint_extra(config, result))
    if args.trace:
        _write_text(Path(args.trace), trace_csv(result.trace))
    print(render_report(result.report, args.format), end="")
    logger.info("training took %.1f s (best step %d)", result.train_seconds, result.best_step)
    return 0


def cmd_decode(args) -> int:
    import torch

    from .minifid.checkpoint import load_checkpoint
    from .minifid.pipeline import predict

    torch.set_num_threads(1)
    params, config, tokenizer, extra = load_checkpoint(args.checkpoint)
    mode = extra.get("mode", "pathfid")
    schema = PathSchema(extra.get("schema", "full"))
    corpus = _load_corpus(args.corpus)
    p_star = {**extra.get("p_star", {}), **_p_star_from_dump(args.p_star)}
    if mode == "pathfid_plus":
        missing = [inst.id for inst in corpus if inst.id not in p_star]
        if missing:
            raise UsageError(f"pathfid_plus checkpoint: no p* for {len(missing)} instances; pass --p-star")
    _, dump = predict(params, tokenizer, config, corpus, mode, schema, p_star)
    _write_jsonl(args.output, dump)
    return 0


def cmd_score(args) -> int:
    report = _score(args.gold, args.predictions, args.schema)
    if args.out_dir:
        write_report(report, Path(args.out_dir), figures=False)
    print(render_report(report, args.format), end="")
    return 0


def cmd_analyze(args) -> int:
    report = _score(args.gold, args.predictions, args.schema)
    out_dir = Path(args.out_dir)
    written = write_report(report, out_dir)
    if args.trace:
        from .plots import plot_trace

        with open(args.trace, encoding="utf-8") as f:
            trace = [{k: float(v) if v != "" else float("nan") for k, v in row.items()} for row in csv.DictReader(f)]
        p = plot_trace(trace, out_dir / "trace.png")
        if p is not None:
            written.append(p)
    for p in written:
        logger.info("wrote %s", p)
    print(render_report(report, args.format), end="")
    return 0


def cmd_gradcheck(args) -> int:
    import torch

    from .minifid.gradcheck import gradcheck, toy_problem

    torch.set_num_threads(1)
    params, batch, config = toy_problem(args.d_model, args.layers, args.n_heads, args.seed)
    errors = gradcheck(params, batch, config.n_heads)
    worst = max(errors.values())
    ok = worst < args.tolerance
    if args.format == "json":
        print(json.dumps({"max_relative_error": errors, "worst": worst, "pass": ok}, indent=2, sort_keys=True))
    elif args.format == "csv":
        print("tensor,max_relative_error")
        for name, err in errors.items():
            print(f"{name},{err!r}")
    else:
        for name, err in errors.items():
            print(f"{name:<24}{err:.3e}")
        print(f"worst {worst:.3e} ({'ok' if ok else 'FAIL'}, tolerance {args.tolerance:g})")
    return 0 if ok else 1


def cmd_e2e(args) -> int:
    from .minifid.checkpoint import save_checkpoint
    from .plots import plot_trace

    if args.config is None:
        raise UsageError("a config file is required")
    config = _run_config_from_args(args, args.config)
    out_dir = Path(config.output_dir)
    result = _train(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_text(out_dir / "config.json", json.dumps(dataclasses.asdict(config), indent=2, sort_keys=True) + "\n")
    save_checkpoint(
        out_dir / "checkpoint.json", result.params, result.config, result.tokenizer, _checkpoint_extra(config, result)
    )
    _write_jsonl(out_dir / "predictions.jsonl", result.dump)
    _write_text(out_dir / "trace.csv", trace_csv(result.trace))
    plot_trace(result.trace, out_dir / "trace.png")
    if result.stage1 is not None:
        _write_text(out_dir / "stage1_trace.csv", trace_csv(result.stage1.trace))
        _write_text(out_dir / "stage1_report.json", render_report(result.stage1.report, "json"))
    write_report(result.report, out_dir)
    print(render_report(result.report, args.format), end="")
    logger.info(
        "%s: trained in %.1f s, best step %d; outputs in %s", config.mode, result.train_seconds, result.best_step, out_dir
    )
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run overrides (take precedence over env and config file)")
    g.add_argument("--mode", choices=["fid", "pathfid", "pathfid_plus"])
    g.add_argument("--schema", choices=[s.value for s in PathSchema])
    g.add_argument("--source", choices=["synthetic", "hotpot", "iirc"])
    g.add_argument("--corpus", help="training corpus (HotpotQA-format JSON unless --source iirc)")
    g.add_argument("--eval-corpus", dest="eval_corpus", help="evaluate on this corpus instead of the training set")
    g.add_argument("--articles", help="IIRC context-article file")
    g.add_argument("--links", help="JSON link graph title -> [titles] for hop ordering")
    g.add_argument("--output-dir", dest="output_dir")
    g.add_argument("--seed", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--steps", type=int)
    g.add_argument("--batch-size", dest="batch_size", type=int)
    g.add_argument("--eval-every", dest="eval_every", type=int)
    g.add_argument("--clip-norm", dest="clip_norm", type=float)
    g.add_argument("--d-model", dest="d_model", type=int)
    g.add_argument("--n-heads", dest="n_heads", type=int)
    g.add_argument("--layers", type=int, help="encoder and decoder depth")
    g.add_argument("--set", action="append", metavar="KEY=VALUE", help="any config key, e.g. synthetic.num_instances=32")


def _add_model_commands(sub) -> None:
    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--checkpoint", required=True, help="output checkpoint path")
    p.add_argument("--trace", help="write the per-segment training trace CSV here")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="greedy-decode a corpus with a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--p-star", help="pathfid prediction dump supplying p* for pathfid_plus checkpoints")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("gradcheck", help="finite-difference check of the model gradients")
    p.add_argument("--d-model", dest="d_model", type=int, default=32)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--n-heads", dest="n_heads", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathfid", description="Reasoning-path prediction for multi-hop QA.")
    parser.add_argument("--format", choices=FORMATS, default="text", help="stdout format for reports")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("ingest", help="convert HotpotQA or IIRC data to the canonical corpus JSON")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--source", choices=["hotpot", "iirc"], default="hotpot")
    p.add_argument("--articles", help="IIRC context-article file")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic bridge corpus")
    defaults = SyntheticConfig()
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--instances", type=int, default=defaults.num_instances)
    p.add_argument("--distractors", type=int, default=defaults.num_distractors)
    p.add_argument("--hops", type=int, default=defaults.hops)
    p.add_argument("--vocab-size", dest="vocab_size", type=int, default=defaults.vocab_size)
    p.add_argument("--sentences", type=int, default=defaults.sentences_per_passage)
    p.add_argument("--seed", type=int, default=defaults.rng_seed)
    p.add_argument("--title-words", dest="title_words", type=int, default=defaults.title_words)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("blocks", help="input-block utilities")
    bsub = p.add_subparsers(dest="blocks_command", metavar="subcommand")
    d = bsub.add_parser("dump", help="write input blocks as JSON lines")
    d.add_argument("corpus")
    d.add_argument("--kind", choices=["fid", "path", "path_plus"], default="path")
    d.add_argument("-o", "--output", default="-")
    d.add_argument("--max-len", dest="max_len", type=int)
    d.add_argument("--links", help="JSON link graph for choosing gold p*")
    d.add_argument("--p-star", help="prediction dump supplying p*; gold first hop otherwise")
    d.set_defaults(func=cmd_blocks_dump)
    p.set_defaults(func=lambda args: _missing_subcommand(p))

    p = sub.add_parser("linearize", help="write gold target sequences")
    p.add_argument("corpus")
    p.add_argument("--schema", choices=[s.value for s in PathSchema], default="full")
    p.add_argument("--links")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_linearize)

    p = sub.add_parser("parse", help="parse raw decoder outputs into a prediction dump")
    p.add_argument("input", help="text file (one sequence per line) or JSONL with raw_sequence; - for stdin")
    p.add_argument("--schema", choices=[s.value for s in PathSchema], default="full")
    p.add_argument("--corpus", help="corpus for title reconstruction (matched by instance_id)")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_parse)

    _add_model_commands(sub)
    p = sub.add_parser("minifid", help="model commands (train, decode, gradcheck)")
    msub = p.add_subparsers(dest="minifid_command", metavar="subcommand")
    _add_model_commands(msub)
    p.set_defaults(func=lambda args: _missing_subcommand(p))

    for name, func, help_text in (
        ("score", cmd_score, "score predictions against a gold corpus"),
        ("analyze", cmd_analyze, "score and write tables and figures"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("gold")
        p.add_argument("predictions", help="official {answer, sp} JSON or prediction-dump JSONL")
        p.add_argument("--schema", choices=[s.value for s in PathSchema], help="path schema of dump predictions")
        if name == "score":
            p.add_argument("--out-dir", dest="out_dir", help="also write report.json/report.txt/CSV tables here")
        else:
            p.add_argument("--out-dir", dest="out_dir", required=True)
            p.add_argument("--trace", help="training trace CSV to plot")
        p.set_defaults(func=func)

    p = sub.add_parser("e2e", help="train, decode and evaluate from a run config")
    p.add_argument("config", nargs="?", help="JSON run config")
    _add_run_flags(p)
    p.set_defaults(func=cmd_e2e, usage=p.format_usage)
    return parser


def _missing_subcommand(parser: argparse.ArgumentParser) -> int:
    parser.print_usage(sys.stderr)
    return 1


def _provenance(exc: BaseException) -> str:
    """Name of the innermost package module in the traceback."""
    module = "pathfid"
    for frame in traceback.extract_tb(exc.__traceback__):
        parts = Path(frame.filename).parts
        if "pathfid" in parts:
            idx = len(parts) - 1 - parts[::-1].index("pathfid")
            module = ".".join(parts[idx:])[: -len(".py")]
    return module


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as e:
        print(f"pathfid {args.command}: {e}", file=sys.stderr)
        sys.stderr.write(getattr(args, "usage", parser.format_usage)())
        return 1
    except InputError as e:
        print(f"pathfid {args.command}: {e}", file=sys.stderr)
        return 2
    except (CorpusError, OSError, ValueError, KeyError) as e:
        print(f"pathfid {args.command}: error in {_provenance(e)}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
