"""Fusion-in-decoder encoder-decoder over a flat registry of named tensors.

Each input block is encoded on its own (positions restart at 0 per block),
the block outputs are concatenated, and the decoder cross-attends to the
whole concatenation.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from typing import Sequence

import torch

from ..blocks import InputBlock

DTYPE = torch.float64
LN_EPS = 1e-6

Params = dict[str, torch.Tensor]

_attention_log: list[torch.Tensor] | None = None


@contextmanager
def record_attention():
    """Collect every attention weight tensor computed inside the block."""
    global _attention_log
    saved, _attention_log = _attention_log, []
    try:
        yield _attention_log
    finally:
        _attention_log = saved


class NonFiniteLossError(FloatingPointError):
    def __init__(self, tensor_name: str, loss: float):
        super().__init__(f"non-finite loss {loss} (first offending tensor: {tensor_name})")
        self.tensor_name = tensor_name


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    n_layers_enc: int = 2
    n_layers_dec: int = 2
    n_heads: int = 4
    ff_mult: int = 4
    max_input_block_len: int = 256
    max_pair_block_len: int = 512
    max_target_len: int = 64
    rng_seed: int = 0

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if min(self.d_model, self.n_layers_enc, self.n_layers_dec, self.n_heads) < 1:
            raise ValueError("model sizes must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FusedRepresentation:
    rows: torch.Tensor  # (sum |b_n|, d)
    block_boundaries: list[int]

    def block(self, n: int) -> torch.Tensor:
        ends = self.block_boundaries[1:] + [self.rows.shape[0]]
        return self.rows[self.block_boundaries[n] : ends[n]]


def _attn_names(prefix: str) -> list[str]:
    return [f"{prefix}.{w}" for w in ("q", "k", "v", "o")]


def param_shapes(config: ModelConfig, vocab_size: int) -> dict[str, tuple[int, ...]]:
    d, f = config.d_model, config.d_model * config.ff_mult
    shapes: dict[str, tuple[int, ...]] = {"embed": (vocab_size, d)}

    def ln(name):
        shapes[f"{name}.g"] = (d,)
        shapes[f"{name}.b"] = (d,)

    def ff(name):
        shapes.update({f"{name}.w1": (d, f), f"{name}.b1": (f,), f"{name}.w2": (f, d), f"{name}.b2": (d,)})

    for l in range(config.n_layers_enc):
        p = f"enc.{l}"
        ln(f"{p}.ln1")
        shapes.update({n: (d, d) for n in _attn_names(f"{p}.self")})
        ln(f"{p}.ln2")
        ff(f"{p}.ff")
    ln("enc.ln")
    for l in range(config.n_layers_dec):
        p = f"dec.{l}"
        ln(f"{p}.ln1")
        shapes.update({n: (d, d) for n in _attn_names(f"{p}.self")})
        ln(f"{p}.ln2")
        shapes.update({n: (d, d) for n in _attn_names(f"{p}.cross")})
        ln(f"{p}.ln3")
        ff(f"{p}.ff")
    ln("dec.ln")
    return shapes


def init_params(config: ModelConfig, vocab_size: int) -> Params:
    gen = torch.Generator().manual_seed(config.rng_seed)
    params: Params = {}
    for name, shape in param_shapes(config, vocab_size).items():
        if name.endswith(".g"):
            t = torch.ones(shape, dtype=DTYPE)
        elif name.endswith((".b", ".b1", ".b2")):
            t = torch.zeros(shape, dtype=DTYPE)
        elif name == "embed":
            t = torch.randn(shape, generator=gen, dtype=DTYPE)
        else:
            t = torch.randn(shape, generator=gen, dtype=DTYPE) / math.sqrt(shape[0])
        params[name] = t
    return params


def sinusoid(n: int, d: int) -> torch.Tensor:
    pos = torch.arange(n, dtype=DTYPE)[:, None]
    i = torch.arange(0, d, 2, dtype=DTYPE)[None, :]
    angle = pos / torch.pow(10000.0, i / d)
    pe = torch.zeros(n, d, dtype=DTYPE)
    pe[:, 0::2] = torch.sin(angle)
    pe[:, 1::2] = torch.cos(angle[:, : d // 2])
    return pe


def layer_norm(x: torch.Tensor, g: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    mu = x.mean(-1, keepdim=True)
    var = ((x - mu) ** 2).mean(-1, keepdim=True)
    return (x - mu) / torch.sqrt(var + LN_EPS) * g + b


def attention(
    params: Params,
    prefix: str,
    x: torch.Tensor,
    mem: torch.Tensor,
    mask: torch.Tensor,
    n_heads: int,
    return_weights: bool = False,
):
    """Multi-head attention; ``mask`` is True where (query, key) may attend."""
    B, Lq, d = x.shape
    Lk = mem.shape[1]
    dh = d // n_heads
    q = (x @ params[f"{prefix}.q"]).view(B, Lq, n_heads, dh).transpose(1, 2)
    k = (mem @ params[f"{prefix}.k"]).view(B, Lk, n_heads, dh).transpose(1, 2)
    v = (mem @ params[f"{prefix}.v"]).view(B, Lk, n_heads, dh).transpose(1, 2)
    scores = q @ k.transpose(-1, -2) / math.sqrt(dh)
    scores = scores.masked_fill(~mask[:, None, :, :], float("-inf"))
    weights = torch.softmax(scores, dim=-1)
    if _attention_log is not None:
        _attention_log.append(weights.detach())
    out = (weights @ v).transpose(1, 2).reshape(B, Lq, d) @ params[f"{prefix}.o"]
    return (out, weights) if return_weights else out


def feed_forward(params: Params, prefix: str, x: torch.Tensor) -> torch.Tensor:
    h = torch.nn.functional.gelu(x @ params[f"{prefix}.w1"] + params[f"{prefix}.b1"])
    return h @ params[f"{prefix}.w2"] + params[f"{prefix}.b2"]


def n_layers(params: Params, side: str) -> int:
    return len({k.split(".")[1] for k in params if k.startswith(side + ".") and k.split(".")[1].isdigit()})


def _encoder_stack(params: Params, ids: torch.Tensor, pos: torch.Tensor, mask: torch.Tensor, n_heads: int):
    d = params["embed"].shape[1]
    x = params["embed"][ids] + sinusoid(int(pos.max()) + 1, d)[pos]
    for l in range(n_layers(params, "enc")):
        p = f"enc.{l}"
        h = layer_norm(x, params[f"{p}.ln1.g"], params[f"{p}.ln1.b"])
        x = x + attention(params, f"{p}.self", h, h, mask, n_heads)
        h = layer_norm(x, params[f"{p}.ln2.g"], params[f"{p}.ln2.b"])
        x = x + feed_forward(params, f"{p}.ff", h)
    return layer_norm(x, params["enc.ln.g"], params["enc.ln.b"])


def encode_padded(params: Params, ids: torch.Tensor, lengths: torch.Tensor, n_heads: int) -> torch.Tensor:
    """Encode a batch of independent blocks.

    ids: (M, L) padded token ids, lengths: (M,). Each block attends only to
    its own first ``lengths[m]`` tokens. Zero-length (padding) blocks attend
    to their first slot so the softmax stays defined; their rows are never
    read downstream.
    """
    M, L = ids.shape
    key_ok = torch.arange(L)[None, :] < lengths.clamp(min=1)[:, None]  # (M, L)
    mask = key_ok[:, None, :].expand(M, L, L)
    pos = torch.arange(L)[None, :].expand(M, L)
    return _encoder_stack(params, ids, pos, mask, n_heads)


def encode_fused(params: Params, blocks: Sequence[Sequence[int]], n_heads: int) -> torch.Tensor:
    """Encode the concatenated blocks as one sequence under the block-diagonal mask.

    Numerically equivalent to :func:`encode_blocks`; exists to make the
    attention pattern explicit.
    """
    lengths = [len(b) for b in blocks]
    ids = torch.as_tensor([t for b in blocks for t in b], dtype=torch.long)[None]
    pos = torch.as_tensor([i for n in lengths for i in range(n)], dtype=torch.long)[None]
    mask = encoder_attention_mask(lengths)[None]
    return _encoder_stack(params, ids, pos, mask, n_heads)[0]


def encoder_attention_mask(lengths: Sequence[int]) -> torch.Tensor:
    """Block-diagonal (T, T) mask over the concatenated blocks, T = sum(lengths)."""
    T = sum(lengths)
    mask = torch.zeros(T, T, dtype=torch.bool)
    start = 0
    for n in lengths:
        mask[start : start + n, start : start + n] = True
        start += n
    return mask


def encode_blocks(
    params: Params, blocks: Sequence[Sequence[int]], n_heads: int, max_len: int | None = None
) -> FusedRepresentation:
    """Encode each block separately and concatenate the outputs in block order.

    ``blocks`` holds token-id sequences (see ``Tokenizer.encode``).
    """
    rows, bounds, start = [], [], 0
    for n, b in enumerate(blocks):
        if max_len is not None and len(b) > max_len:
            raise ValueError(f"block {n} has {len(b)} tokens; limit is {max_len}")
        if not len(b):
            raise ValueError(f"block {n} is empty")
        ids = torch.as_tensor(list(b), dtype=torch.long)[None]
        out = encode_padded(params, ids, torch.tensor([len(b)]), n_heads)[0]
        rows.append(out)
        bounds.append(start)
        start += len(b)
    return FusedRepresentation(torch.cat(rows, 0), bounds)


def decode_states(
    params: Params,
    dec_ids: torch.Tensor,
    memory: torch.Tensor,
    memory_mask: torch.Tensor,
    n_heads: int,
) -> torch.Tensor:
    """Decoder hidden states for teacher-forced inputs (B, T) over memory (B, S, d)."""
    B, T = dec_ids.shape
    d = params["embed"].shape[1]
    y = params["embed"][dec_ids] + sinusoid(T, d)[None]
    causal = torch.tril(torch.ones(T, T, dtype=torch.bool))[None].expand(B, T, T)
    cross = memory_mask[:, None, :].expand(B, T, memory.shape[1])
    for l in range(n_layers(params, "dec")):
        p = f"dec.{l}"
        h = layer_norm(y, params[f"{p}.ln1.g"], params[f"{p}.ln1.b"])
        y = y + attention(params, f"{p}.self", h, h, causal, n_heads)
        h = layer_norm(y, params[f"{p}.ln2.g"], params[f"{p}.ln2.b"])
        y = y + attention(params, f"{p}.cross", h, memory, cross, n_heads)
        h = layer_norm(y, params[f"{p}.ln3.g"], params[f"{p}.ln3.b"])
        y = y + feed_forward(params, f"{p}.ff", h)
    return layer_norm(y, params["dec.ln.g"], params["dec.ln.b"])


def logits(params: Params, states: torch.Tensor) -> torch.Tensor:
    """Output projection tied to the input embedding."""
    return states @ params["embed"].T / math.sqrt(params["embed"].shape[1])


# ---------------------------------------------------------------------------
# Batching


@dataclass
class Batch:
    block_ids: torch.Tensor  # (B*N, L)
    block_lengths: torch.Tensor  # (B*N,)
    n_blocks: int
    dec_in: torch.Tensor | None = None  # (B, T)
    dec_out: torch.Tensor | None = None  # (B, T)
    dec_mask: torch.Tensor | None = None  # (B, T)

    @property
    def size(self) -> int:
        return self.block_ids.shape[0] // self.n_blocks


def make_batch(
    examples: Sequence[Sequence[Sequence[int]]],
    targets: Sequence[Sequence[int]] | None = None,
    pad_id: int = 0,
    bos_id: int = 1,
    eos_id: int = 2,
) -> Batch:
    """Pad a list of instances (each a list of block id-lists) into tensors."""
    N = max(len(ex) for ex in examples)
    L = max(len(b) for ex in examples for b in ex)
    ids = torch.full((len(examples) * N, L), pad_id, dtype=torch.long)
    lengths = torch.zeros(len(examples) * N, dtype=torch.long)
    for i, ex in enumerate(examples):
        for n, b in enumerate(ex):
            ids[i * N + n, : len(b)] = torch.as_tensor(list(b), dtype=torch.long)
            lengths[i * N + n] = len(b)
    batch = Batch(ids, lengths, N)
    if targets is not None:
        T = max(len(t) for t in targets) + 1
        dec_in = torch.full((len(targets), T), pad_id, dtype=torch.long)
        dec_out = torch.full((len(targets), T), pad_id, dtype=torch.long)
        dec_mask = torch.zeros(len(targets), T, dtype=torch.bool)
        for i, t in enumerate(targets):
            seq = list(t)
            dec_in[i, : len(seq) + 1] = torch.as_tensor([bos_id] + seq, dtype=torch.long)
            dec_out[i, : len(seq) + 1] = torch.as_tensor(seq + [eos_id], dtype=torch.long)
            dec_mask[i, : len(seq) + 1] = True
        batch.dec_in, batch.dec_out, batch.dec_mask = dec_in, dec_out, dec_mask
    return batch


def encode_batch(params: Params, batch: Batch, n_heads: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Memory (B, N*L, d) and its key mask (B, N*L)."""
    enc = encode_padded(params, batch.block_ids, batch.block_lengths, n_heads)
    B, L = batch.size, batch.block_ids.shape[1]
    memory = enc.reshape(B, batch.n_blocks * L, -1)
    valid = torch.arange(L)[None, :] < batch.block_lengths[:, None]
    return memory, valid.reshape(B, batch.n_blocks * L)


def batch_loss(params: Params, batch: Batch, n_heads: int) -> torch.Tensor:
    """Mean token-level cross-entropy under teacher forcing."""
    memory, mem_mask = encode_batch(params, batch, n_heads)
    states = decode_states(params, batch.dec_in, memory, mem_mask, n_heads)
    logp = torch.log_softmax(logits(params, states), dim=-1)
    nll = -logp.gather(-1, batch.dec_out[..., None])[..., 0]
    return nll[batch.dec_mask].mean()


def first_nonfinite(params: Params, grads: Params | None = None) -> str:
    for name, t in params.items():
        if not torch.isfinite(t).all():
            return name
    for name, g in (grads or {}).items():
        if g is not None and not torch.isfinite(g).all():
            return name
    return "<activations>"


def loss_and_grads(
    params: Params, blocks: Sequence[Sequence[int]], target: Sequence[int], config: ModelConfig, tokenizer
) -> tuple[float, Params]:
    """Teacher-forced loss on one instance plus gradients for every tensor."""
    if len(target) > config.max_target_len:
        raise ValueError(f"target of {len(target)} tokens exceeds max_target_len={config.max_target_len}")
    batch = make_batch([blocks], [target], tokenizer.pad_id, tokenizer.bos_id, tokenizer.eos_id)
    return batch_loss_and_grads(params, batch, config.n_heads)


def batch_loss_and_grads(params: Params, batch: Batch, n_heads: int) -> tuple[float, Params]:
    leaves = {k: v.detach().requires_grad_(True) for k, v in params.items()}
    loss = batch_loss(leaves, batch, n_heads)
    if not torch.isfinite(loss):
        raise NonFiniteLossError(first_nonfinite(params), loss.item())
    grads = torch.autograd.grad(loss, list(leaves.values()), allow_unused=True)
    out = {k: (g if g is not None else torch.zeros_like(params[k])) for k, g in zip(leaves, grads)}
    bad = [k for k, g in out.items() if not torch.isfinite(g).all()]
    if bad:
        raise NonFiniteLossError(bad[0], loss.item())
    return loss.item(), out


@torch.no_grad()
def greedy_decode_batch(
    params: Params, batch: Batch, max_len: int, n_heads: int, bos_id: int, eos_id: int
) -> list[list[int]]:
    memory, mem_mask = encode_batch(params, batch, n_heads)
    return _greedy(params, memory, mem_mask, max_len, n_heads, bos_id, eos_id)


def _greedy(params, memory, mem_mask, max_len, n_heads, bos_id, eos_id) -> list[list[int]]:
    B = memory.shape[0]
    seq = torch.full((B, 1), bos_id, dtype=torch.long)
    done = torch.zeros(B, dtype=torch.bool)
    for _ in range(max_len):
        states = decode_states(params, seq, memory, mem_mask, n_heads)
        nxt = logits(params, states[:, -1]).argmax(-1)
        nxt = torch.where(done, torch.full_like(nxt, eos_id), nxt)
        seq = torch.cat([seq, nxt[:, None]], 1)
        done |= nxt == eos_id
        if done.all():
            break
    out = []
    for row in seq[:, 1:].tolist():
        out.append(row[: row.index(eos_id)] if eos_id in row else row)
    return out


@torch.no_grad()
def decode_greedy(
    params: Params, x: FusedRepresentation, max_len: int, n_heads: int, bos_id: int, eos_id: int
) -> list[int]:
    """Argmax decoding over every row of the fused representation."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    memory = x.rows[None]
    mask = torch.ones(1, x.rows.shape[0], dtype=torch.bool)
    return _greedy(params, memory, mask, max_len, n_heads, bos_id, eos_id)[0]


def encode_ids(tokenizer, blocks: Sequence[InputBlock]) -> list[list[int]]:
    return [tokenizer.encode(b.tokens) for b in blocks]
