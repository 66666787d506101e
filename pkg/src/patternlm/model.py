"""Decoder-only transformer with regression heads and parameter injection.

Two small heads read hidden states: the edge head maps the state *before* an
edge token to that edge's 8 payload channels, the transform head maps the
state before ``<R>`` to the panel placement. Two projections add the
(quantized) edge endpoint or placement back onto the embedding of the edge or
``<R>`` token itself. Final layers of all four start at zero.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from patternlm.codec import (
    BOS,
    EDGE_DIM,
    TRANSFORM,
    TRANSFORM_DIM,
    TokenizedGarment,
    Vocabulary,
    quantize_pe_input,
)


@dataclass
class ModelConfig:
    vocab_size: int
    embed_dim: int = 256
    layers: int = 4
    heads: int = 4
    mlp_ratio: int = 4
    context_len: int = 2048
    reg_lambda: float = 0.1  # weight of the regression terms in the loss
    dropout: float = 0.0

    def __post_init__(self):
        if self.embed_dim % self.heads:
            raise ValueError(f"embed_dim {self.embed_dim} not divisible by heads {self.heads}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


class MLP2(nn.Module):
    """Linear → ReLU → Linear with a zero-initialized output layer."""

    def __init__(self, d_in: int, d_hidden: int, d_out: int):
        super().__init__()
        self.fc1 = nn.Linear(d_in, d_hidden)
        self.fc2 = nn.Linear(d_hidden, d_out)

    def zero_output(self):
        nn.init.zeros_(self.fc2.weight)
        nn.init.zeros_(self.fc2.bias)

    def forward(self, x):
        return self.fc2(F.relu(self.fc1(x)))


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d = cfg.embed_dim
        self.heads = cfg.heads
        self.dropout = cfg.dropout
        self.ln1 = nn.LayerNorm(d)
        self.qkv = nn.Linear(d, 3 * d)
        self.proj = nn.Linear(d, d)
        self.ln2 = nn.LayerNorm(d)
        self.fc = nn.Linear(d, cfg.mlp_ratio * d)
        self.fc_out = nn.Linear(cfg.mlp_ratio * d, d)

    def forward(self, x):
        B, T, D = x.shape
        q, k, v = self.qkv(self.ln1(x)).split(D, dim=-1)
        shape = (B, T, self.heads, D // self.heads)
        q, k, v = (t.view(shape).transpose(1, 2) for t in (q, k, v))
        att = F.scaled_dot_product_attention(
            q, k, v, is_causal=True, dropout_p=self.dropout if self.training else 0.0
        )
        x = x + F.dropout(self.proj(att.transpose(1, 2).reshape(B, T, D)), self.dropout, self.training)
        h = self.fc_out(F.gelu(self.fc(self.ln2(x))))
        return x + F.dropout(h, self.dropout, self.training)


@dataclass
class ModelOutput:
    logits: torch.Tensor  # B x T x V
    edge_preds: torch.Tensor  # B x T x 8, row i predicts the edge token at i + 1
    transform_preds: torch.Tensor  # B x T x 7
    hidden: torch.Tensor


class PatternLM(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.embed_dim
        self.tok_emb = nn.Embedding(cfg.vocab_size, d)
        self.pos_emb = nn.Embedding(cfg.context_len, d)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.layers))
        self.ln_f = nn.LayerNorm(d)
        self.lm_head = nn.Linear(d, cfg.vocab_size, bias=False)
        self.edge_head = MLP2(d, d, EDGE_DIM)
        self.transform_head = MLP2(d, d, TRANSFORM_DIM)
        self.edge_pe = MLP2(2, d, d)
        self.transform_pe = MLP2(TRANSFORM_DIM, d, d)
        self.reset_parameters()

    def reset_parameters(self):
        for m in self.modules():
            if isinstance(m, nn.Linear):
                nn.init.normal_(m.weight, std=0.02)
                if m.bias is not None:
                    nn.init.zeros_(m.bias)
            elif isinstance(m, nn.Embedding):
                nn.init.normal_(m.weight, std=0.02)
        for block in self.blocks:
            nn.init.normal_(block.proj.weight, std=0.02 / math.sqrt(2 * self.cfg.layers))
            nn.init.normal_(block.fc_out.weight, std=0.02 / math.sqrt(2 * self.cfg.layers))
        for mlp in (self.edge_head, self.transform_head, self.edge_pe, self.transform_pe):
            mlp.zero_output()

    def forward(self, batch: "Batch", inject: bool = True) -> ModelOutput:
        tokens = batch.tokens
        T = tokens.shape[1]
        if T > self.cfg.context_len:
            raise ValueError(f"sequence length {T} exceeds context length {self.cfg.context_len}")
        pos = torch.arange(T, device=tokens.device)
        x = self.tok_emb(tokens) + self.pos_emb(pos)[None]
        if inject:
            x = x + torch.where(batch.is_edge[..., None], self.edge_pe(batch.pe_edge), 0.0)
            x = x + torch.where(batch.is_transform[..., None], self.transform_pe(batch.pe_transform), 0.0)
        x = F.dropout(x, self.cfg.dropout, self.training)
        for block in self.blocks:
            x = block(x)
        h = self.ln_f(x)
        return ModelOutput(self.lm_head(h), self.edge_head(h), self.transform_head(h), h)


# ---------------------------------------------------------------------------
# examples and batches


@dataclass
class Example:
    """One training sequence: prompt followed by the target garment."""

    tokens: list[int]
    payloads: list[np.ndarray | None]
    masks: list[np.ndarray | None]
    target_start: int  # index of the target's <garment_start>
    id: int = -1
    modality: str = "text"

    def __len__(self):
        return len(self.tokens)

    def target(self) -> TokenizedGarment:
        s = self.target_start
        return TokenizedGarment(self.tokens[s:], self.payloads[s:], self.masks[s:])

    def prompt(self) -> TokenizedGarment:
        s = self.target_start
        return TokenizedGarment(self.tokens[:s], self.payloads[:s], self.masks[:s])


def _prompt_words(words: Sequence[int]) -> TokenizedGarment:
    return TokenizedGarment(list(words), [None] * len(words), [None] * len(words))


def text_prompt(caption: Sequence[str], vocab: Vocabulary) -> TokenizedGarment:
    return _prompt_words([vocab[BOS]] + vocab.encode_words(caption))


def edit_prompt(before: TokenizedGarment, instruction: Sequence[str], vocab: Vocabulary) -> TokenizedGarment:
    words = vocab.encode_words(instruction)
    return TokenizedGarment(
        [vocab[BOS]] + list(before.tokens) + words,
        [None] + list(before.payloads) + [None] * len(words),
        [None] + list(before.masks) + [None] * len(words),
    )


def make_example(prompt: TokenizedGarment, target: TokenizedGarment, id: int = -1, modality: str = "text") -> Example:
    return Example(
        list(prompt.tokens) + list(target.tokens),
        list(prompt.payloads) + list(target.payloads),
        list(prompt.masks) + list(target.masks),
        len(prompt.tokens),
        id,
        modality,
    )


@dataclass
class Batch:
    tokens: torch.Tensor
    loss_mask: torch.Tensor  # position i is a supervised prediction target
    is_edge: torch.Tensor
    is_transform: torch.Tensor
    pe_edge: torch.Tensor
    pe_transform: torch.Tensor
    edge_target: torch.Tensor
    edge_mask: torch.Tensor
    transform_target: torch.Tensor
    ids: list[int] = field(default_factory=list)

    def to(self, dtype: torch.dtype) -> "Batch":
        def cv(t):
            return t.to(dtype) if t.is_floating_point() else t

        return Batch(**{k: cv(v) if isinstance(v, torch.Tensor) else v for k, v in self.__dict__.items()})


def collate(examples: Sequence[Example], vocab: Vocabulary, dtype=torch.float32) -> Batch:
    """Right-pad examples; PE inputs are the quantized ground-truth payloads."""
    B = len(examples)
    T = max(len(e) for e in examples)
    tokens = np.full((B, T), vocab["<pad>"], dtype=np.int64)
    loss_mask = np.zeros((B, T), dtype=bool)
    is_edge = np.zeros((B, T), dtype=bool)
    is_tr = np.zeros((B, T), dtype=bool)
    e_tgt = np.zeros((B, T, EDGE_DIM))
    e_mask = np.zeros((B, T, EDGE_DIM), dtype=bool)
    t_tgt = np.zeros((B, T, TRANSFORM_DIM))
    tr_id = vocab[TRANSFORM]
    for b, ex in enumerate(examples):
        n = len(ex)
        tokens[b, :n] = ex.tokens
        loss_mask[b, ex.target_start:n] = True
        for i, (tok, pay, m) in enumerate(zip(ex.tokens, ex.payloads, ex.masks)):
            if pay is None:
                continue
            if tok in vocab.edge_ids:
                is_edge[b, i] = True
                e_tgt[b, i] = pay
                e_mask[b, i] = m
            elif tok == tr_id:
                is_tr[b, i] = True
                t_tgt[b, i] = pay
    pe_edge = np.where(is_edge[..., None], quantize_pe_input(e_tgt[..., :2]), 0.0)
    pe_tr = np.where(is_tr[..., None], quantize_pe_input(t_tgt), 0.0)

    def ft(a):
        return torch.as_tensor(a, dtype=dtype)

    return Batch(
        torch.as_tensor(tokens),
        torch.as_tensor(loss_mask),
        torch.as_tensor(is_edge),
        torch.as_tensor(is_tr),
        ft(pe_edge),
        ft(pe_tr),
        ft(e_tgt),
        torch.as_tensor(e_mask),
        ft(t_tgt),
        [e.id for e in examples],
    )


# ---------------------------------------------------------------------------
# loss


@dataclass
class LossTerms:
    total: torch.Tensor
    ce: torch.Tensor
    edge: torch.Tensor  # already multiplied by lambda
    transform: torch.Tensor  # already multiplied by lambda


def mixed_loss(out: ModelOutput, batch: Batch, reg_lambda: float) -> LossTerms:
    """Next-token cross-entropy plus lambda-weighted mean L2 regression errors.

    Only target-region positions are supervised. Regression predictions for
    the token at position i come from hidden state i - 1, and only the channels
    used by each edge's type contribute.
    """
    logits = out.logits[:, :-1]
    targets = batch.tokens[:, 1:]
    sup = batch.loss_mask[:, 1:]
    ce = F.cross_entropy(logits[sup], targets[sup])

    edge_sel = (batch.is_edge & batch.loss_mask)[:, 1:]
    if edge_sel.any():
        diff = torch.where(batch.edge_mask[:, 1:], out.edge_preds[:, :-1] - batch.edge_target[:, 1:], 0.0)
        edge = torch.linalg.vector_norm(diff[edge_sel], dim=-1).mean()
    else:
        edge = out.edge_preds.sum() * 0.0

    tr_sel = (batch.is_transform & batch.loss_mask)[:, 1:]
    if tr_sel.any():
        diff = out.transform_preds[:, :-1] - batch.transform_target[:, 1:]
        transform = torch.linalg.vector_norm(diff[tr_sel], dim=-1).mean()
    else:
        transform = out.transform_preds.sum() * 0.0

    edge = reg_lambda * edge
    transform = reg_lambda * transform
    return LossTerms(ce + edge + transform, ce, edge, transform)


def parameter_groups(model: PatternLM) -> dict[str, list[tuple[str, nn.Parameter]]]:
    """Parameters grouped by role (used by the gradient check)."""
    groups: dict[str, list[tuple[str, nn.Parameter]]] = {
        "embeddings": [], "attention": [], "feedforward": [], "norms": [], "output": [],
        "edge_head": [], "transform_head": [], "edge_pe": [], "transform_pe": [],
    }
    for name, p in model.named_parameters():
        if name.startswith(("tok_emb", "pos_emb")):
            key = "embeddings"
        elif ".qkv." in name or ".proj." in name:
            key = "attention"
        elif ".fc." in name or ".fc_out." in name:
            key = "feedforward"
        elif "ln" in name.split(".")[-2]:
            key = "norms"
        elif name.startswith("lm_head"):
            key = "output"
        else:
            key = name.split(".")[0]
        groups[key].append((name, p))
    return groups
