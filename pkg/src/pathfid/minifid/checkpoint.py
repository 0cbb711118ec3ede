from __future__ import annotations

import json
from pathlib import Path

import torch

from .model import DTYPE, ModelConfig, Params
from .tokenizer import Tokenizer

FORMAT = "pathfid-minifid"
VERSION = 1


def save_checkpoint(
    path: str | Path, params: Params, config: ModelConfig, tokenizer: Tokenizer, extra: dict | None = None
) -> None:
    """JSON registry of named float64 tensors plus config and vocabulary."""
    payload = {
        "format": FORMAT,
        "version": VERSION,
        "config": config.to_dict(),
        "vocab": tokenizer.itos,
        "extra": extra or {},
        "tensors": {
            name: {"shape": list(t.shape), "data": t.detach().reshape(-1).tolist()} for name, t in params.items()
        },
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[Params, ModelConfig, Tokenizer, dict]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != FORMAT:
        raise ValueError(f"{path}: not a {FORMAT} checkpoint")
    if payload.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    params = {
        name: torch.tensor(t["data"], dtype=DTYPE).reshape(t["shape"]) for name, t in payload["tensors"].items()
    }
    return params, ModelConfig(**payload["config"]), Tokenizer.from_vocab(payload["vocab"]), payload.get("extra", {})
