"""Central finite-difference check of the analytic gradients."""

from __future__ import annotations

import torch
from torch.func import vmap

from . import model as M
from .model import Params


def numeric_grad(
    params: Params, batch: M.Batch, n_heads: int, name: str, step: float = 1e-4, chunk: int = 512
) -> torch.Tensor:
    """Central differences for every entry of ``params[name]``.

    Perturbations are evaluated in vectorized chunks; each one moves a single
    entry by +/- step.
    """
    base = params[name]
    n = base.numel()

    def loss_at(delta: torch.Tensor) -> torch.Tensor:
        perturbed = dict(params)
        perturbed[name] = base + delta.reshape(base.shape)
        return M.batch_loss(perturbed, batch, n_heads)

    batched = vmap(loss_at)
    out = torch.empty(n, dtype=base.dtype)
    eye_scale = torch.eye(n, dtype=base.dtype) * step if n <= chunk else None
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        if eye_scale is not None:
            deltas = eye_scale[start:stop]
        else:
            deltas = torch.zeros(stop - start, n, dtype=base.dtype)
            deltas[torch.arange(stop - start), torch.arange(start, stop)] = step
        with torch.no_grad():
            plus = batched(deltas)
            minus = batched(-deltas)
        out[start:stop] = (plus - minus) / (2 * step)
    return out.reshape(base.shape)


def relative_error(analytic: torch.Tensor, numeric: torch.Tensor, floor: float = 1e-6) -> torch.Tensor:
    """Entrywise |a - n| / max(|a|, |n|, floor)."""
    denom = torch.maximum(torch.maximum(analytic.abs(), numeric.abs()), torch.full_like(analytic, floor))
    return (analytic - numeric).abs() / denom


def gradcheck(
    params: Params, batch: M.Batch, n_heads: int, step: float = 1e-4, floor: float = 1e-6
) -> dict[str, float]:
    """Max relative error per parameter tensor."""
    _, grads = M.batch_loss_and_grads(params, batch, n_heads)
    return {
        name: float(relative_error(grads[name], numeric_grad(params, batch, n_heads, name, step), floor).max())
        for name in params
    }


def toy_problem(d_model: int = 32, layers: int = 1, heads: int = 4, seed: int = 0):
    """Seed-fixed small model plus a two-instance batch for checking."""
    from ..blocks import build_blocks
    from ..corpus import SyntheticConfig, generate_synthetic
    from .pipeline import build_tokenizer, instance_target
    from ..pathcodec import PathSchema

    config = M.ModelConfig(d_model=d_model, n_layers_enc=layers, n_layers_dec=layers, n_heads=heads, rng_seed=seed)
    corpus = generate_synthetic(
        SyntheticConfig(num_instances=2, num_distractors=1, vocab_size=8, sentences_per_passage=2, rng_seed=seed)
    )
    tok = build_tokenizer(corpus)
    examples = [[tok.encode(b.tokens) for b in build_blocks(i.question, list(i.passages), "path")] for i in corpus]
    targets = [tok.encode(instance_target(i, "pathfid", PathSchema.FULL, config.max_target_len)) for i in corpus]
    params = M.init_params(config, len(tok))
    # non-trivial norms and biases so every tensor has a generic gradient
    gen = torch.Generator().manual_seed(seed + 1)
    for name, t in params.items():
        if name.endswith((".g", ".b", ".b1", ".b2")):
            params[name] = t + 0.1 * torch.randn(t.shape, generator=gen, dtype=t.dtype)
    batch = M.make_batch(examples, targets, tok.pad_id, tok.bos_id, tok.eos_id)
    return params, batch, config
