"""Central finite-difference check of the mixed loss gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from patternlm.model import Batch, MLP2, PatternLM, mixed_loss, parameter_groups


@dataclass
class GradCheckResult:
    group: str
    checked: int
    skipped_kinks: int
    max_rel_error: float
    worst: str


def rel_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def randomize_zero_layers(model: PatternLM, std: float = 0.1, seed: int = 0) -> None:
    """Give the zero-initialized output layers random weights so their gradients are exercised."""
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for mlp in (model.edge_head, model.transform_head, model.edge_pe, model.transform_pe):
            for t in (mlp.fc2.weight, mlp.fc2.bias):
                t.copy_(torch.randn(t.shape, generator=g, dtype=t.dtype) * std)


def check_gradients(
    model: PatternLM,
    batch: Batch,
    per_group: int = 64,
    h: float = 1e-4,
    seed: int = 0,
    floor: float = 1e-6,
) -> list[GradCheckResult]:
    """Compare autograd against central differences on ``per_group`` random entries per group.

    The model should be in float64. A probe whose +h and -h evaluations land
    on different sides of a ReLU kink in a head or PE projection is replaced by
    another entry, since the finite difference is not a derivative there.
    """
    model.eval()
    lam = model.cfg.reg_lambda

    def loss() -> torch.Tensor:
        return mixed_loss(model(batch), batch, lam).total

    model.zero_grad(set_to_none=True)
    loss().backward()

    pre: list[torch.Tensor] = []
    hooks = [m.fc1.register_forward_hook(lambda _m, _i, o: pre.append(o.detach() > 0))
             for m in model.modules() if isinstance(m, MLP2)]

    def signs_at(p: torch.Tensor, idx: int, value: float) -> tuple[float, list[torch.Tensor]]:
        pre.clear()
        flat = p.data.view(-1)
        old = flat[idx].item()
        flat[idx] = value
        with torch.no_grad():
            val = loss().item()
        flat[idx] = old
        return val, list(pre)

    rng = np.random.default_rng(seed)
    results = []
    try:
        for group, params in parameter_groups(model).items():
            if not params:
                continue
            sizes = np.array([p.numel() for _, p in params], dtype=np.float64)
            checked = skipped = 0
            worst, worst_desc = 0.0, ""
            attempts = 0
            while checked < per_group and attempts < 20 * per_group:
                attempts += 1
                k = int(rng.choice(len(params), p=sizes / sizes.sum()))
                name, p = params[k]
                idx = int(rng.integers(p.numel()))
                x = p.data.view(-1)[idx].item()
                fp, sp = signs_at(p, idx, x + h)
                fm, sm = signs_at(p, idx, x - h)
                if any(not torch.equal(a, b) for a, b in zip(sp, sm)):
                    skipped += 1
                    continue
                numeric = (fp - fm) / (2 * h)
                analytic = p.grad.view(-1)[idx].item() if p.grad is not None else 0.0
                err = rel_error(analytic, numeric, floor)
                if err >= worst:
                    worst, worst_desc = err, f"{name}[{idx}] analytic {analytic:.6e} numeric {numeric:.6e}"
                checked += 1
            results.append(GradCheckResult(group, checked, skipped, worst, worst_desc))
    finally:
        for hk in hooks:
            hk.remove()
    return results
