from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from pathfid.pathcodec import PathSchema
from pathfid.cli import RunConfig, UsageError, env_overrides, main, read_predictions, resolve_config

TINY = {
    "mode": "pathfid",
    "synthetic": {"num_instances": 4, "num_distractors": 2},
    "model": {"d_model": 16, "n_layers_enc": 1, "n_layers_dec": 1, "n_heads": 2},
    "hparams": {"lr": 0.5, "steps": 4, "batch_size": 4, "eval_every": 2},
}


@pytest.fixture
def corpus(tmp_path):
    path = tmp_path / "syn.json"
    assert main(["synth", "-o", str(path), "--instances", "5", "--distractors", "3"]) == 0
    return path


def _gold_dump(tmp_path, corpus, capsys) -> Path:
    assert main(["linearize", str(corpus), "-o", str(tmp_path / "t.jsonl")]) == 0
    raw = tmp_path / "raw.jsonl"
    with open(tmp_path / "t.jsonl") as f, open(raw, "w") as out:
        for line in f:
            row = json.loads(line)
            out.write(json.dumps({"instance_id": row["instance_id"], "raw_sequence": row["target"]}) + "\n")
    dump = tmp_path / "dump.jsonl"
    assert main(["parse", str(raw), "--corpus", str(corpus), "-o", str(dump)]) == 0
    capsys.readouterr()
    return dump


def test_blocks_dump(tmp_path, corpus):
    out = tmp_path / "blocks.jsonl"
    assert main(["blocks", "dump", str(corpus), "--kind", "path", "-o", str(out)]) == 0
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(rows) == 5 * 5
    assert set(rows[0]) == {"instance_id", "block_index", "kind", "text"}
    assert rows[0]["text"].startswith("question: ") and "<f1>" in rows[0]["text"]
    assert main(["blocks", "dump", str(corpus), "--kind", "path_plus", "-o", str(out)]) == 0
    assert "<context-2>" in out.read_text()
    assert main(["blocks"]) == 1


def test_score_perfect_dump(tmp_path, corpus, capsys):
    dump = _gold_dump(tmp_path, corpus, capsys)
    assert main(["--format", "json", "score", str(corpus), str(dump), "--out-dir", str(tmp_path / "rep")]) == 0
    report = json.loads(capsys.readouterr().out)
    for key in ("answer_em", "answer_f1", "support_em", "support_f1", "joint_em", "joint_f1"):
        assert report[key] == 1.0
    assert (tmp_path / "rep" / "report.txt").exists() and (tmp_path / "rep" / "buckets.csv").exists()


def test_score_official_format(tmp_path, corpus, capsys):
    records = json.loads(corpus.read_text())
    pred = {
        "answer": {r["_id"]: r["answer"] for r in records},
        "sp": {r["_id"]: r["supporting_facts"] for r in records},
    }
    path = tmp_path / "pred.json"
    path.write_text(json.dumps(pred))
    assert main(["--format", "json", "score", str(corpus), str(path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["joint_em"] == 1.0 and report["joint_f1"] == 1.0
    # answers only: support and joint fields absent
    path.write_text(json.dumps({"answer": pred["answer"]}))
    assert main(["--format", "json", "score", str(corpus), str(path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["support_em"] is None and report["joint_em"] is None


def test_score_unknown_id_exits_2(tmp_path, corpus, capsys):
    path = tmp_path / "pred.json"
    path.write_text(json.dumps({"answer": {"ghost-1": "x"}, "sp": {"ghost-1": []}}))
    assert main(["score", str(corpus), str(path)]) == 2
    assert "ghost-1" in capsys.readouterr().err
    path.write_text("not json at all\n")
    assert main(["score", str(corpus), str(path)]) == 2


def test_read_predictions_schema(tmp_path, corpus, capsys):
    dump = _gold_dump(tmp_path, corpus, capsys)
    preds = read_predictions(dump)
    assert all(p.supports for p in preds)
    assert all(p.supports is None for p in read_predictions(dump, PathSchema.TITLES_ANSWER))


def test_analyze_writes_tables_and_figures(tmp_path, corpus, capsys):
    dump = _gold_dump(tmp_path, corpus, capsys)
    trace = tmp_path / "trace.csv"
    trace.write_text("step,loss,grad_norm,T1,Answer\n100,1.0,0.5,0.5,0.25\n200,0.5,0.4,1.0,1.0\n")
    out = tmp_path / "an"
    assert main(["analyze", str(corpus), str(dump), "--out-dir", str(out), "--trace", str(trace)]) == 0
    for name in ("report.json", "report.txt", "summary.csv", "breakdown.csv", "groundedness.csv", "buckets.csv"):
        assert (out / name).exists(), name
    assert (out / "buckets_all.png").read_bytes()[:4] == b"\x89PNG"
    assert (out / "trace.png").exists()
    rows = list(csv.DictReader(open(out / "buckets.csv")))
    assert sum(int(r["count"]) for r in rows if r["question_type"] == "all") == 5


def test_parse_plain_lines(tmp_path, capsys):
    raw = tmp_path / "raw.txt"
    raw.write_text("<title-1> A <facts-1> <f1> <answer> x\n\ngarbage <f9>\n")
    assert main(["parse", str(raw)]) == 0
    rows = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert rows[0]["parsed"] == {"hops": [{"title": "A", "facts": [1]}], "answer": "x"}
    assert rows[1]["parsed"] == {"hops": [], "answer": None} and rows[1]["diagnostics"]


def test_e2e_missing_config(tmp_path, capsys):
    assert main(["e2e", str(tmp_path / "nope.json")]) == 1
    err = capsys.readouterr().err
    assert "usage:" in err and "not found" in err
    assert main(["e2e"]) == 1


def test_config_precedence(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"mode": "fid", "hparams": {"lr": 0.1, "steps": 7}}))
    env = {"PATHFID_MODE": "pathfid", "PATHFID_HPARAMS_LR": "0.2", "PATHFID_MODEL_D_MODEL": "32", "HOME": "/x"}
    config = resolve_config(path, env, {"hparams": {"lr": 0.3}})
    assert config.mode == "pathfid"
    assert config.hparams == {"lr": 0.3, "steps": 7}
    assert config.model == {"d_model": 32}
    assert resolve_config(None, {}, {}) == RunConfig()
    assert env_overrides({"PATHFID_SYNTHETIC_NUM_INSTANCES": "8"}) == {"synthetic": {"num_instances": 8}}
    with pytest.raises(UsageError):
        resolve_config(None, {}, {"mode": "fid", "schema": "titles_only"})
    with pytest.raises(UsageError):
        resolve_config(None, {}, {"hparams": {"momentum": 0.9}})
    with pytest.raises(UsageError):
        resolve_config(None, {}, {"source": "hotpot"})


def _run_e2e(tmp_path, name, config, capsys, *extra) -> Path:
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(config))
    out = tmp_path / name
    assert main(["--format", "json", "e2e", str(path), "--output-dir", str(out), *extra]) == 0
    capsys.readouterr()
    return out


def test_e2e_artifacts_and_byte_identical_reruns(tmp_path, capsys):
    a = _run_e2e(tmp_path, "a", TINY, capsys)
    b = _run_e2e(tmp_path, "b", TINY, capsys)
    for name in ("checkpoint.json", "predictions.jsonl", "report.json", "report.txt", "trace.csv", "trace.png"):
        assert (a / name).exists(), name
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    trace = list(csv.DictReader(open(a / "trace.csv")))
    assert [int(r["step"]) for r in trace] == [2, 4]
    assert {"T1", "F1", "T2", "F2", "Answer"} <= set(trace[0])
    dump = [json.loads(l) for l in (a / "predictions.jsonl").read_text().splitlines()]
    assert len(dump) == 4


def test_e2e_titles_only_omits_answer_metrics(tmp_path, capsys):
    out = _run_e2e(tmp_path, "t", {**TINY, "schema": "titles_only"}, capsys)
    report = json.loads((out / "report.json").read_text())
    assert report["answer_em"] is None and report["answer_f1"] is None
    assert "Answer" not in report["segments"]


def test_e2e_env_override(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("PATHFID_MODE", "fid")
    out = _run_e2e(tmp_path, "f", TINY, capsys)
    report = json.loads((out / "report.json").read_text())
    assert report["support_em"] is None
    assert json.loads((out / "config.json").read_text())["mode"] == "fid"


def test_train_decode_roundtrip(tmp_path, corpus, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({**TINY, "source": "hotpot", "corpus": str(corpus)}))
    ck = tmp_path / "ck.json"
    assert main(["minifid", "train", "--config", str(cfg), "--checkpoint", str(ck), "--trace", str(tmp_path / "tr.csv")]) == 0
    out = tmp_path / "dec.jsonl"
    assert main(["decode", str(ck), str(corpus), "-o", str(out)]) == 0
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(rows) == 5 and all("raw_sequence" in r for r in rows)
    capsys.readouterr()
    assert main(["score", str(corpus), str(out)]) == 0


def test_gradcheck_command(capsys):
    assert main(["--format", "json", "gradcheck", "--d-model", "8", "--n-heads", "2"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["pass"] and result["worst"] < 1e-4


def test_ingest_hotpot(tmp_path, corpus, capsys):
    records = json.loads(corpus.read_text())
    records.append({"_id": "broken", "question": "q"})
    src = tmp_path / "raw.json"
    src.write_text(json.dumps(records))
    out = tmp_path / "clean.json"
    assert main(["ingest", str(src), "-o", str(out)]) == 0
    assert len(json.loads(out.read_text())) == 5
    assert "broken" in capsys.readouterr().err
