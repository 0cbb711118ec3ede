"""Teacher-forced training with clipped gradient descent and periodic segment-EM evaluation."""

from __future__ import annotations

import logging
import math
import random
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import torch

from . import model as M
from .model import ModelConfig, Params
from .tokenizer import Tokenizer

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, loss: float, trace: list[dict]):
        super().__init__(f"loss {loss:.3g} at step {step} exceeds divergence threshold")
        self.trace = trace


@dataclass(frozen=True)
class TrainHparams:
    lr: float = 1e-2
    steps: int = 5000
    batch_size: int = 16
    clip_norm: float = 1.0
    eval_every: int = 100
    seed: int = 0
    stop_when_perfect: bool = True
    divergence_threshold: float = 1e6

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1 or self.eval_every < 1:
            raise ValueError("steps, batch_size and eval_every must be positive")


@dataclass
class Example:
    """One training pair as token-id lists."""

    blocks: list[list[int]]
    target: list[int]


@dataclass
class TrainResult:
    params: Params
    trace: list[dict] = field(default_factory=list)
    best_step: int = 0
    final_loss: float = math.nan
    seconds: float = 0.0


def grad_norm(grads: Params) -> float:
    return math.sqrt(sum(float((g * g).sum()) for g in grads.values()))


def decode_examples(
    params: Params, examples: Sequence[Example], config: ModelConfig, tokenizer: Tokenizer, chunk: int = 32
) -> list[list[int]]:
    out: list[list[int]] = []
    for i in range(0, len(examples), chunk):
        part = examples[i : i + chunk]
        batch = M.make_batch([e.blocks for e in part], None, tokenizer.pad_id)
        out += M.greedy_decode_batch(
            params, batch, config.max_target_len + 1, config.n_heads, tokenizer.bos_id, tokenizer.eos_id
        )
    return out


Scorer = Callable[[list[list[int]]], dict[str, float]]


def train(
    params: Params,
    examples: Sequence[Example],
    hparams: TrainHparams,
    config: ModelConfig,
    tokenizer: Tokenizer,
    scorer: Scorer | None = None,
) -> TrainResult:
    """Train on ``examples``; returns the checkpoint with the best answer EM.

    ``scorer`` maps greedy decodes of ``examples`` to named segment EMs (it
    must include "Answer" to drive model selection, else the mean segment EM
    is used). Without a scorer the last parameters are returned.
    """
    if not examples:
        raise ValueError("empty training corpus")
    for n, ex in enumerate(examples):
        if len(ex.target) > config.max_target_len:
            raise ValueError(f"example {n}: target longer than max_target_len={config.max_target_len}")
    torch.manual_seed(hparams.seed)
    rng = random.Random(hparams.seed)
    params = {k: v.clone() for k, v in params.items()}
    result = TrainResult(params)
    best_key: tuple | None = None
    order: list[int] = []
    t0 = time.perf_counter()
    loss = math.nan
    for step in range(1, hparams.steps + 1):
        if len(order) < min(hparams.batch_size, len(examples)):
            order = list(range(len(examples)))
            rng.shuffle(order)
        idx, order = order[: hparams.batch_size], order[hparams.batch_size :]
        batch = M.make_batch(
            [examples[i].blocks for i in idx],
            [examples[i].target for i in idx],
            tokenizer.pad_id,
            tokenizer.bos_id,
            tokenizer.eos_id,
        )
        loss, grads = M.batch_loss_and_grads(params, batch, config.n_heads)
        if loss > hparams.divergence_threshold:
            raise TrainingDiverged(step, loss, result.trace)
        norm = grad_norm(grads)
        scale = min(1.0, hparams.clip_norm / (norm + 1e-12))
        with torch.no_grad():
            params = {k: v - hparams.lr * scale * grads[k] for k, v in params.items()}

        if step % hparams.eval_every == 0 or step == hparams.steps:
            entry = {"step": step, "loss": loss, "grad_norm": norm}
            if scorer is not None:
                scores = scorer(decode_examples(params, examples, config, tokenizer))
                entry.update(scores)
                key = (scores.get("Answer", 0.0), sum(scores.values()) / max(len(scores), 1))
                if best_key is None or key > best_key:
                    best_key, result.params, result.best_step = key, params, step
                perfect = all(v == 1.0 for v in scores.values())
            else:
                result.params, result.best_step, perfect = params, step, False
            result.trace.append(entry)
            logger.info("step %d loss %.4f %s", step, loss, {k: round(v, 3) for k, v in entry.items() if k not in ("step", "loss")})
            if perfect and hparams.stop_when_perfect:
                break
    if scorer is None:
        result.params, result.best_step = params, step
    result.final_loss = loss
    result.seconds = time.perf_counter() - t0
    return result


def hparams_dict(h: TrainHparams) -> dict:
    return asdict(h)
