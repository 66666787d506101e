"""Memorization run on a small text-to-pattern set and its decoded evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

from patternlm.codec import CodecError, NormStats, Vocabulary, decode, encode, fit_norm_stats
from patternlm.datagen import build_vocabulary, caption_phrases, generate_sample
from patternlm.metrics import MetricReport, evaluate, mean_report
from patternlm.model import Example, ModelConfig, make_example, text_prompt
from patternlm.sampling import SamplingError, sample
from patternlm.train import TrainConfig, TrainingSet, build_model, train

FAILED = MetricReport(math.inf, 0.0, 0.0, math.inf, math.inf, 0.0, 0.0)


def overfit_samples(n: int = 64, seed: int = 0):
    """First ``n`` generated samples whose caption phrase sets are pairwise distinct.

    Distinct phrase sets make each prompt identify a single target garment.
    """
    seen, out = set(), []
    i = 0
    while len(out) < n:
        s = generate_sample(seed, i)
        key = frozenset(caption_phrases(s.params))
        if key not in seen:
            seen.add(key)
            out.append(s)
        i += 1
    return out


@dataclass
class OverfitSet:
    vocab: Vocabulary
    stats: NormStats
    samples: list
    examples: list[Example]


def build_overfit_set(n: int = 64, seed: int = 0) -> OverfitSet:
    vocab = build_vocabulary()
    samples = overfit_samples(n, seed)
    stats = fit_norm_stats([s.pattern for s in samples])
    examples = [
        make_example(text_prompt(s.caption, vocab), encode(s.pattern, vocab, stats), i, "text")
        for i, s in enumerate(samples)
    ]
    return OverfitSet(vocab, stats, samples, examples)


@dataclass
class DecodedEval:
    token_accuracy: float
    exact_sequences: int
    failures: int
    report: MetricReport
    per_sample: list[MetricReport] = field(default_factory=list)


def greedy_evaluate(model, data: OverfitSet, constrained: bool = True) -> DecodedEval:
    """Greedy-decode every training prompt and compare with its target.

    The corpus report averages over the outputs that decode; the rest are
    counted in ``failures`` and marked with FAILED in ``per_sample``.
    """
    correct = total = exact = failures = 0
    reports = []
    for ex, s in zip(data.examples, data.samples):
        target = ex.target()
        try:
            out = sample(model, ex.prompt(), data.vocab, greedy=True, max_len=len(target) + 64,
                         constrained=constrained).garment
        except SamplingError as err:
            out = err.prefix
        hits = sum(a == b for a, b in zip(out.tokens, target.tokens))
        correct += hits
        total += max(len(out), len(target))
        exact += out.tokens == target.tokens
        try:
            pred, _ = decode(out, data.vocab, data.stats)
            reports.append(evaluate(pred, s.pattern))
        except CodecError:
            failures += 1
            reports.append(FAILED)
    decoded = [r for r in reports if r is not FAILED]
    report = mean_report(decoded) if decoded else FAILED
    return DecodedEval(correct / total, exact, failures, report, reports)


@dataclass
class OverfitResult:
    reg_lambda: float
    history: list[dict]
    seconds: float
    evaluation: DecodedEval

    @property
    def final_ce(self) -> float:
        return self.history[-1]["ce"]


def run_overfit(
    reg_lambda: float = 0.1,
    data: OverfitSet | None = None,
    steps: int = 2000,
    batch_size: int = 8,
    seed: int = 0,
    model_cfg: ModelConfig | None = None,
) -> OverfitResult:
    data = data or build_overfit_set()
    cfg = model_cfg or ModelConfig(vocab_size=len(data.vocab), reg_lambda=reg_lambda)
    tcfg = TrainConfig(steps=steps, batch_size=batch_size, seed=seed)
    model = build_model(cfg, seed)
    result = train(model, TrainingSet.from_examples(data.examples), data.vocab, tcfg)
    with torch.no_grad():
        ev = greedy_evaluate(result.model, data)
    return OverfitResult(reg_lambda, result.history, result.seconds, ev)
