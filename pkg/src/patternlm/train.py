"""Training loop: AdamW, warmup then cosine decay, modality-weighted batches."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from patternlm.codec import NormStats, TokenizedGarment, Vocabulary, encode, load_vocabulary
from patternlm.datagen import MODALITIES
from patternlm.model import (
    Example,
    ModelConfig,
    PatternLM,
    collate,
    edit_prompt,
    make_example,
    mixed_loss,
    text_prompt,
)
from patternlm.pattern import pattern_from_dict

log = logging.getLogger(__name__)

LARGE_MODEL_LR = 5e-5  # the large-model fine-tuning rate, kept as a preset
DEFAULT_MODALITY_WEIGHTS = {"text": 3.0, "image": 0.0, "text_image": 4.0, "edit": 1.0}


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 16
    lr: float = 3e-4
    betas: tuple[float, float] = (0.9, 0.95)
    weight_decay: float = 0.01
    warmup_steps: int = 100
    grad_clip: float = 1.0  # 0 disables clipping
    seed: int = 0
    modality_weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_MODALITY_WEIGHTS))
    checkpoint_every: int = 0  # 0 disables periodic checkpoints

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        kw = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        if "betas" in kw:
            kw["betas"] = tuple(kw["betas"])
        return cls(**kw)


def lr_at(step: int, cfg: TrainConfig) -> float:
    """Linear ramp from 0 over the warmup steps, then cosine decay towards 0."""
    if cfg.warmup_steps > 0 and step < cfg.warmup_steps:
        return cfg.lr * step / cfg.warmup_steps
    span = max(1, cfg.steps - cfg.warmup_steps)
    progress = min(1.0, (step - cfg.warmup_steps) / span)
    return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * progress))


# ---------------------------------------------------------------------------
# data


def example_from_record(record: dict, vocab: Vocabulary, stats: NormStats) -> Example:
    target = encode(pattern_from_dict(record["pattern"]), vocab, stats)
    modality = record.get("modality", "text")
    if "instruction" in record:
        before = encode(pattern_from_dict(record["before"]), vocab, stats)
        prompt = edit_prompt(before, record["instruction"], vocab)
        modality = "edit"
    else:
        prompt = text_prompt(record["caption"], vocab)
    return make_example(prompt, target, int(record.get("id", -1)), modality)


@dataclass
class TrainingSet:
    by_modality: dict[str, list[Example]]

    def __len__(self):
        return sum(len(v) for v in self.by_modality.values())

    def max_len(self) -> int:
        return max((len(e) for v in self.by_modality.values() for e in v), default=0)

    @classmethod
    def from_examples(cls, examples: Sequence[Example]) -> "TrainingSet":
        out: dict[str, list[Example]] = {}
        for e in examples:
            out.setdefault(e.modality, []).append(e)
        return cls(out)


def load_training_set(manifest_path: str | Path, split: str = "train") -> tuple[Vocabulary, NormStats, TrainingSet]:
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    vocab, stats = load_vocabulary(root / manifest["vocabulary"])
    data: dict[str, list[Example]] = {}
    for modality in MODALITIES:
        name = manifest["shards"][split].get(modality)
        if not name:
            continue
        examples = []
        for line in (root / name).read_text(encoding="utf-8").splitlines():
            if line.strip():
                ex = example_from_record(json.loads(line), vocab, stats)
                ex.modality = modality
                examples.append(ex)
        data[modality] = examples
    return vocab, stats, TrainingSet(data)


def select_batch(data: TrainingSet, cfg: TrainConfig, step: int) -> list[Example]:
    """Draw a batch for ``step``; depends only on (seed, step) so runs can resume."""
    rng = np.random.default_rng([cfg.seed, step])
    names = [m for m in sorted(data.by_modality) if data.by_modality[m] and cfg.modality_weights.get(m, 0.0) > 0]
    if not names:
        raise ValueError("no modality with positive weight has examples")
    w = np.array([cfg.modality_weights[m] for m in names], dtype=np.float64)
    choice = rng.choice(len(names), size=cfg.batch_size, p=w / w.sum())
    batch = []
    for c in choice:
        pool = data.by_modality[names[c]]
        batch.append(pool[int(rng.integers(len(pool)))])
    return batch


# ---------------------------------------------------------------------------
# loop


class TrainingAborted(RuntimeError):
    def __init__(self, step: int, batch_ids: list[int], dump: Path | None):
        self.step, self.batch_ids, self.dump = step, batch_ids, dump
        where = f", dump written to {dump}" if dump else ""
        super().__init__(f"non-finite loss at step {step} on batch ids {batch_ids}{where}")


def make_optimizer(model: PatternLM, cfg: TrainConfig) -> torch.optim.AdamW:
    return torch.optim.AdamW(
        model.parameters(), lr=cfg.lr, betas=cfg.betas, weight_decay=cfg.weight_decay, foreach=False
    )


def build_model(model_cfg: ModelConfig, seed: int) -> PatternLM:
    torch.manual_seed(seed)
    return PatternLM(model_cfg)


@dataclass
class TrainResult:
    model: PatternLM
    optimizer: torch.optim.Optimizer
    step: int
    history: list[dict]
    seconds: float


def train(
    model: PatternLM,
    data: TrainingSet,
    vocab: Vocabulary,
    cfg: TrainConfig,
    optimizer: torch.optim.Optimizer | None = None,
    start_step: int = 0,
    history: list[dict] | None = None,
    out_dir: str | Path | None = None,
    stop_at: int | None = None,
    on_checkpoint: Callable[[int, PatternLM, torch.optim.Optimizer, list[dict]], None] | None = None,
) -> TrainResult:
    """Run steps ``start_step .. stop_at`` (default ``cfg.steps``).

    Every quantity that varies per step is derived from (seed, step), so a run
    resumed from a checkpoint reproduces the uninterrupted loss curve.
    """
    if data.max_len() > model.cfg.context_len:
        raise ValueError(f"training sequence of length {data.max_len()} exceeds context {model.cfg.context_len}")
    optimizer = optimizer or make_optimizer(model, cfg)
    history = list(history or [])
    stop = cfg.steps if stop_at is None else min(stop_at, cfg.steps)
    model.train()
    t0 = time.perf_counter()
    step = start_step
    for step in range(start_step, stop):
        torch.manual_seed(cfg.seed * 1_000_003 + step)
        examples = select_batch(data, cfg, step)
        batch = collate(examples, vocab)
        lr = lr_at(step, cfg)
        for group in optimizer.param_groups:
            group["lr"] = lr
        terms = mixed_loss(model(batch), batch, model.cfg.reg_lambda)
        if not torch.isfinite(terms.total):
            dump = None
            if out_dir is not None:
                dump = Path(out_dir) / f"nan_dump_step{step}.json"
                dump.parent.mkdir(parents=True, exist_ok=True)
                dump.write_text(json.dumps({
                    "step": step,
                    "batch_ids": batch.ids,
                    "lr": lr,
                    "ce": terms.ce.item(),
                    "edge": terms.edge.item(),
                    "transform": terms.transform.item(),
                }, indent=1) + "\n")
            raise TrainingAborted(step, batch.ids, dump)
        optimizer.zero_grad(set_to_none=True)
        terms.total.backward()
        if cfg.grad_clip > 0:
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
        optimizer.step()
        history.append({
            "step": step,
            "lr": lr,
            "total": terms.total.item(),
            "ce": terms.ce.item(),
            "edge": terms.edge.item(),
            "transform": terms.transform.item(),
        })
        if step % 100 == 0 or step == stop - 1:
            log.info("step %d lr %.3g loss %.5f ce %.5f edge %.5f transform %.5f",
                     step, lr, terms.total.item(), terms.ce.item(), terms.edge.item(), terms.transform.item())
        if cfg.checkpoint_every and (step + 1) % cfg.checkpoint_every == 0 and on_checkpoint:
            on_checkpoint(step + 1, model, optimizer, history)
    model.eval()
    return TrainResult(model, optimizer, stop, history, time.perf_counter() - t0)


@torch.no_grad()
def teacher_forced_token_accuracy(model: PatternLM, examples: Sequence[Example], vocab: Vocabulary) -> float:
    model.eval()
    batch = collate(examples, vocab)
    out = model(batch)
    pred = out.logits[:, :-1].argmax(-1)
    sup = batch.loss_mask[:, 1:]
    return float((pred[sup] == batch.tokens[:, 1:][sup]).double().mean())


def garment_of(example: Example) -> TokenizedGarment:
    return example.target()
