"""Reconstruction metrics between a predicted and a ground-truth pattern."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable

from patternlm.pattern import Panel, SewingPattern


@dataclass(frozen=True)
class MetricReport:
    panel_l2: float
    num_panel_acc: float
    num_edge_acc: float
    rot_l2: float
    transl_l2: float
    stitch_acc: float
    accuracy: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def perfect(cls) -> "MetricReport":
        return cls(0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class Matching:
    pairs: list[tuple[int, int]]
    unmatched_pred: list[int]
    unmatched_gt: list[int]


def match_panels(pred: SewingPattern, gt: SewingPattern) -> Matching:
    """Pair panels with equal names; repeated names pair up in order of appearance."""
    queues: dict[str, list[int]] = {}
    for j, p in enumerate(gt.panels):
        queues.setdefault(p.name, []).append(j)
    pairs, unmatched_pred = [], []
    for i, p in enumerate(pred.panels):
        q = queues.get(p.name)
        if q:
            pairs.append((i, q.pop(0)))
        else:
            unmatched_pred.append(i)
    matched_gt = {j for _, j in pairs}
    return Matching(pairs, unmatched_pred, [j for j in range(len(gt.panels)) if j not in matched_gt])


def vertex_l2(a: Panel, b: Panel) -> float:
    """Mean per-vertex distance after zero-padding the shorter loop."""
    n = max(len(a.vertices), len(b.vertices))
    pad = (0.0, 0.0)
    va = [tuple(v) for v in a.vertices] + [pad] * (n - len(a.vertices))
    vb = [tuple(v) for v in b.vertices] + [pad] * (n - len(b.vertices))
    return math.fsum(math.dist(p, q) for p, q in zip(va, vb)) / n


def _stitch_keys(pattern: SewingPattern) -> set[frozenset]:
    # (name, k-th panel with that name, edge index); the ordinal only matters for repeated names
    seen: dict[str, int] = {}
    ref = []
    for p in pattern.panels:
        ref.append((p.name, seen.get(p.name, 0)))
        seen[p.name] = seen.get(p.name, 0) + 1
    return {
        frozenset({(*ref[s.first[0]], s.first[1]), (*ref[s.second[0]], s.second[1])})
        for s in pattern.stitches
    }


def stitch_accuracy(pred: SewingPattern, gt: SewingPattern) -> float:
    a, b = _stitch_keys(pred), _stitch_keys(gt)
    if not a and not b:
        return 1.0
    return len(a & b) / max(len(a), len(b))


def evaluate(pred: SewingPattern, gt: SewingPattern) -> MetricReport:
    m = match_panels(pred, gt)
    num_panel_acc = 1.0 if len(pred.panels) == len(gt.panels) else 0.0
    if m.pairs:
        k = len(m.pairs)
        pp = [(pred.panels[i], gt.panels[j]) for i, j in m.pairs]
        num_edge_acc = sum(len(a.edges) == len(b.edges) for a, b in pp) / k
        panel_l2 = math.fsum(vertex_l2(a, b) for a, b in pp) / k
        rot_l2 = math.fsum(math.dist(a.placement.rotation, b.placement.rotation) for a, b in pp) / k
        transl_l2 = math.fsum(math.dist(a.placement.translation, b.placement.translation) for a, b in pp) / k
    else:
        num_edge_acc = panel_l2 = rot_l2 = transl_l2 = 0.0
    return MetricReport(
        panel_l2=panel_l2,
        num_panel_acc=num_panel_acc,
        num_edge_acc=num_edge_acc,
        rot_l2=rot_l2,
        transl_l2=transl_l2,
        stitch_acc=stitch_accuracy(pred, gt),
        accuracy=num_panel_acc * num_edge_acc,
    )


def mean_report(reports: Iterable[MetricReport]) -> MetricReport:
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to average")
    n = len(reports)
    return MetricReport(**{f.name: math.fsum(getattr(r, f.name) for r in reports) / n for f in fields(MetricReport)})
