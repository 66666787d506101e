"""Autoregressive generation with regression feedback."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from patternlm.codec import (
    EDGE_MASKS,
    GARMENT_END,
    TRANSFORM,
    TRANSFORM_MASK,
    GarmentGrammar,
    TokenizedGarment,
    Vocabulary,
)
from patternlm.model import PatternLM, collate, make_example


class SamplingError(RuntimeError):
    """Generation hit ``max_len`` before ``<garment_end>``; ``prefix`` holds the partial output."""

    def __init__(self, message: str, prefix: TokenizedGarment, step_logits: list | None = None):
        super().__init__(message)
        self.prefix = prefix
        self.step_logits = step_logits or []


@dataclass
class SampleResult:
    garment: TokenizedGarment
    step_logits: list[torch.Tensor] = field(default_factory=list)


@torch.no_grad()
def sample(
    model: PatternLM,
    prompt: TokenizedGarment,
    vocab: Vocabulary,
    greedy: bool = True,
    temperature: float = 1.0,
    max_len: int = 1024,
    constrained: bool = True,
    seed: int = 0,
    keep_logits: bool = False,
) -> SampleResult:
    """Generate a garment after ``prompt``.

    After each edge token its payload is the edge head's prediction from the
    preceding hidden state (unused channels zeroed); the ``<R>`` payload comes
    from the transform head. These payloads feed the PE projections on the
    following steps through the same batching path used in training.
    """
    if not greedy and temperature <= 0:
        raise ValueError("temperature must be positive")
    model.eval()
    gen = torch.Generator().manual_seed(seed)
    grammar = GarmentGrammar(vocab, strict=True) if constrained else None
    end_id = vocab[GARMENT_END]
    tr_id = vocab[TRANSFORM]
    dtype = next(model.parameters()).dtype
    out = TokenizedGarment([], [], [])
    result = SampleResult(out)
    for _ in range(max_len):
        if len(prompt) + len(out) > model.cfg.context_len:
            break
        batch = collate([make_example(prompt, out)], vocab, dtype=dtype)
        o = model(batch)
        logits = o.logits[0, -1]
        if keep_logits:
            result.step_logits.append(logits.clone())
        scores = logits.double()
        if grammar is not None:
            allowed = sorted(grammar.allowed())
            keep = torch.full_like(scores, float("-inf"))
            keep[allowed] = 0.0
            scores = scores + keep
        if greedy:
            tok = int(scores.argmax())
        else:
            probs = torch.softmax(scores / temperature, dim=-1)
            tok = int(torch.multinomial(probs, 1, generator=gen))
        payload = mask = None
        if tok in vocab.edge_ids:
            mask = EDGE_MASKS[vocab.edge_ids[tok][0]].copy()
            payload = np.where(mask, o.edge_preds[0, -1].double().numpy(), 0.0)
        elif tok == tr_id:
            mask = TRANSFORM_MASK.copy()
            payload = o.transform_preds[0, -1].double().numpy()
        if grammar is not None:
            grammar.feed(tok)
        out.tokens.append(tok)
        out.payloads.append(payload)
        out.masks.append(mask)
        if tok == end_id:
            return result
    raise SamplingError(f"no {GARMENT_END} after {len(out)} generated tokens", out, result.step_logits)
