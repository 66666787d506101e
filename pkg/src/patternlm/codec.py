"""Pattern <-> token-sequence codec.

A garment becomes::

    <garment_start> ( <panel_start> name-words <R> (edge-token tag)+ <panel_end> )* <garment_end>

Edge tokens and ``<R>`` carry continuous payloads in normalized units: an
8-channel edge vector (endpoint, two Bézier controls, arc mid-point) and a
7-channel placement vector (translation, quaternion). The last edge of every
panel uses the closing variant of its token.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from patternlm.pattern import (
    Arc,
    CubicBezier,
    Edge,
    Line,
    Panel,
    PatternError,
    Placement3,
    Point2,
    QuadBezier,
    SewingPattern,
    Stitch,
    arc_is_degenerate,
    control_points,
    COORD_GRID,
    MAX_EDGES,
    MAX_PANELS,
    QUAT_GRID,
)

DEFAULT_NUM_TAGS = 108

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
GARMENT_START, GARMENT_END = "<garment_start>", "<garment_end>"
PANEL_START, PANEL_END = "<panel_start>", "<panel_end>"
TRANSFORM = "<R>"
NULL_TAG = "<tN>"
EDGE_KINDS = ("line", "quad", "cubic", "arc")
EDGE_TOKENS = {kind: (f"<{kind}>", f"<c{kind}>") for kind in EDGE_KINDS}
TOKEN_KIND = {tok: (kind, closing) for kind, pair in EDGE_TOKENS.items() for closing, tok in enumerate(pair)}
TEXT_SPECIALS = (PAD, BOS, EOS, UNK)

EDGE_DIM = 8
TRANSFORM_DIM = 7
# channels: 0-1 endpoint, 2-3 first control, 4-5 second control, 6-7 arc mid-point
EDGE_MASKS = {
    "line": np.array([1, 1, 0, 0, 0, 0, 0, 0], dtype=bool),
    "quad": np.array([1, 1, 1, 1, 0, 0, 0, 0], dtype=bool),
    "cubic": np.array([1, 1, 1, 1, 1, 1, 0, 0], dtype=bool),
    "arc": np.array([1, 1, 0, 0, 0, 0, 1, 1], dtype=bool),
}
TRANSFORM_MASK = np.ones(TRANSFORM_DIM, dtype=bool)

PE_LOW, PE_HIGH, PE_BINS = -4.0, 4.0, 256
PE_BIN_WIDTH = (PE_HIGH - PE_LOW) / PE_BINS

STD_FLOOR = 1e-6
CLOSING_TOL = 1e-6
QUAT_NORM_TOL = 1e-6


class CodecError(ValueError):
    pass


class CapacityError(CodecError):
    pass


class DecodeError(CodecError):
    def __init__(self, position: int, message: str):
        self.position = position
        super().__init__(f"position {position}: {message}")


def tag_token(i: int) -> str:
    return f"<t{i}>"


def pattern_special_tokens(num_tags: int = DEFAULT_NUM_TAGS) -> list[str]:
    edge = [tok for kind in EDGE_KINDS for tok in EDGE_TOKENS[kind]]
    tags = [tag_token(i) for i in range(1, num_tags + 1)] + [NULL_TAG]
    return [GARMENT_START, GARMENT_END, PANEL_START, PANEL_END, TRANSFORM] + edge + tags


# ---------------------------------------------------------------------------
# vocabulary


@dataclass
class Vocabulary:
    tokens: list[str]
    num_tags: int = DEFAULT_NUM_TAGS
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise CodecError("vocabulary has duplicate tokens")
        missing = [t for t in (*TEXT_SPECIALS, *pattern_special_tokens(self.num_tags)) if t not in self.index]
        if missing:
            raise CodecError(f"vocabulary lacks special tokens {missing[:5]}")
        self.edge_ids = {self.index[t]: TOKEN_KIND[t] for t in TOKEN_KIND}
        self.tag_ids = {self.index[tag_token(i)]: i for i in range(1, self.num_tags + 1)}
        self.null_tag_id = self.index[NULL_TAG]
        specials = set(TEXT_SPECIALS) | set(pattern_special_tokens(self.num_tags))
        self.word_ids = frozenset(i for i, t in enumerate(self.tokens) if t not in specials)

    @classmethod
    def build(cls, words: Iterable[str], num_tags: int = DEFAULT_NUM_TAGS) -> "Vocabulary":
        specials = list(TEXT_SPECIALS) + pattern_special_tokens(num_tags)
        reserved = set(specials)
        text = sorted({w for w in words if w and w not in reserved})
        return cls(specials + text, num_tags)

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, token: str) -> int:
        return self.index[token]

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @property
    def pattern_special_count(self) -> int:
        return len(pattern_special_tokens(self.num_tags))

    def encode_words(self, words: Sequence[str], allow_unknown: bool = True) -> list[int]:
        ids = []
        for w in words:
            if w in self.index and self.index[w] in self.word_ids:
                ids.append(self.index[w])
            elif allow_unknown:
                ids.append(self.index[UNK])
            else:
                raise CodecError(f"word {w!r} not in vocabulary")
        return ids

    def render(self, ids: Iterable[int]) -> str:
        return " ".join(self.tokens[i] for i in ids)

    def parse(self, text: str) -> list[int]:
        try:
            return [self.index[t] for t in text.split()]
        except KeyError as exc:
            raise CodecError(f"unknown token {exc.args[0]!r}") from None


# ---------------------------------------------------------------------------
# normalization statistics


@dataclass(frozen=True)
class NormStats:
    coord_mean: tuple[float, float]
    coord_std: tuple[float, float]
    transl_mean: tuple[float, float, float]
    transl_std: tuple[float, float, float]
    quat_mean: tuple[float, float, float, float]
    quat_std: tuple[float, float, float, float]

    def __post_init__(self):
        for name in ("coord_std", "transl_std", "quat_std"):
            object.__setattr__(self, name, tuple(max(float(s), STD_FLOOR) for s in getattr(self, name)))
        for name in ("coord_mean", "transl_mean", "quat_mean"):
            object.__setattr__(self, name, tuple(float(m) for m in getattr(self, name)))

    @classmethod
    def identity(cls) -> "NormStats":
        return cls((0.0, 0.0), (1.0, 1.0), (0.0,) * 3, (1.0,) * 3, (0.0,) * 4, (1.0,) * 4)

    @property
    def edge_mean(self) -> np.ndarray:
        return np.array(self.coord_mean * 4)

    @property
    def edge_std(self) -> np.ndarray:
        return np.array(self.coord_std * 4)

    @property
    def transform_mean(self) -> np.ndarray:
        return np.array(self.transl_mean + self.quat_mean)

    @property
    def transform_std(self) -> np.ndarray:
        return np.array(self.transl_std + self.quat_std)

    def to_dict(self) -> dict:
        return {
            "coord_mean": list(self.coord_mean),
            "coord_std": list(self.coord_std),
            "transl_mean": list(self.transl_mean),
            "transl_std": list(self.transl_std),
            "quat_mean": list(self.quat_mean),
            "quat_std": list(self.quat_std),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(**{k: tuple(d[k]) for k in cls.__dataclass_fields__})


def _pattern_channels(pattern: SewingPattern):
    xs, ys, trans, quats = [], [], [], []
    for p in pattern.panels:
        for v in p.vertices:
            xs.append(v.x)
            ys.append(v.y)
        for e in p.edges:
            for c in control_points(e):
                xs.append(c.x)
                ys.append(c.y)
        trans.append(p.placement.translation)
        quats.append(p.placement.rotation)
    return xs, ys, trans, quats


def _mean_std(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


def fit_norm_stats(patterns: Iterable[SewingPattern]) -> NormStats:
    """Per-channel population mean/std over a corpus (two passes, exactly rounded sums)."""
    xs, ys = [], []
    trans: list[list[float]] = [[], [], []]
    quats: list[list[float]] = [[], [], [], []]
    count = 0
    for pattern in patterns:
        count += 1
        px, py, pt, pq = _pattern_channels(pattern)
        xs += px
        ys += py
        for t in pt:
            for c in range(3):
                trans[c].append(t[c])
        for q in pq:
            for c in range(4):
                quats[c].append(q[c])
    if count == 0 or not xs:
        raise CodecError("cannot fit normalization statistics on an empty corpus")
    cx, cy = _mean_std(xs), _mean_std(ys)
    tm = [_mean_std(c) for c in trans]
    qm = [_mean_std(c) for c in quats]
    return NormStats(
        (cx[0], cy[0]),
        (cx[1], cy[1]),
        tuple(m for m, _ in tm),
        tuple(s for _, s in tm),
        tuple(m for m, _ in qm),
        tuple(s for _, s in qm),
    )


# ---------------------------------------------------------------------------
# positional-embedding input quantization


def pe_bin_index(v):
    """Bin of a normalized value on [-4, 4] split into 256 half-open bins (last bin closed)."""
    arr = np.asarray(v, dtype=np.float64)
    idx = np.floor((np.clip(arr, PE_LOW, PE_HIGH) - PE_LOW) / PE_BIN_WIDTH).astype(np.int64)
    idx = np.clip(idx, 0, PE_BINS - 1)
    return int(idx) if idx.ndim == 0 else idx


def quantize_pe_input(v):
    """Centre of the bin containing ``v`` (input clamped to [-4, 4])."""
    centre = PE_LOW + (np.asarray(pe_bin_index(v), dtype=np.float64) + 0.5) * PE_BIN_WIDTH
    return float(centre) if centre.ndim == 0 else centre


# ---------------------------------------------------------------------------
# tokenized garments


@dataclass
class TokenizedGarment:
    tokens: list[int]
    payloads: list[np.ndarray | None]
    masks: list[np.ndarray | None]

    def __len__(self) -> int:
        return len(self.tokens)

    def to_record(self, vocab: Vocabulary) -> dict:
        return {
            "tokens": [vocab.tokens[t] for t in self.tokens],
            "payloads": [None if p is None else [float(x) for x in p] for p in self.payloads],
        }

    @classmethod
    def from_record(cls, record: dict, vocab: Vocabulary) -> "TokenizedGarment":
        try:
            tokens = [vocab[t] for t in record["tokens"]]
        except KeyError as exc:
            raise CodecError(f"unknown token {exc.args[0]!r}") from None
        payloads_raw = record.get("payloads") or [None] * len(tokens)
        if len(payloads_raw) != len(tokens):
            raise CodecError("payload list length differs from token list length")
        payloads, masks = [], []
        for tok, p in zip(tokens, payloads_raw):
            mask = payload_mask(tok, vocab)
            payloads.append(None if p is None else np.asarray(p, dtype=np.float64))
            masks.append(mask)
        return cls(tokens, payloads, masks)

    def quantized(self) -> "TokenizedGarment":
        """Copy with every payload channel snapped to its positional-embedding bin centre."""
        payloads = [None if p is None else np.where(m, quantize_pe_input(p), 0.0) for p, m in zip(self.payloads, self.masks)]
        return TokenizedGarment(list(self.tokens), payloads, list(self.masks))


def payload_mask(token_id: int, vocab: Vocabulary) -> np.ndarray | None:
    if token_id in vocab.edge_ids:
        return EDGE_MASKS[vocab.edge_ids[token_id][0]].copy()
    if token_id == vocab[TRANSFORM]:
        return TRANSFORM_MASK.copy()
    return None


def assign_stitch_tags(pattern: SewingPattern, max_tags: int = DEFAULT_NUM_TAGS) -> dict[tuple[int, int], int | None]:
    """Tag each edge with its stitch number (1-based, by first appearance in loop order) or None."""
    partner: dict[tuple[int, int], tuple[int, int]] = {}
    for s in pattern.stitches:
        partner[s.first] = s.second
        partner[s.second] = s.first
    tags: dict[tuple[int, int], int | None] = {}
    next_tag = 1
    for pi, panel in enumerate(pattern.panels):
        for ei in range(len(panel.edges)):
            ref = (pi, ei)
            if ref in tags:
                continue
            other = partner.get(ref)
            if other is None:
                tags[ref] = None
                continue
            if next_tag > max_tags:
                raise CapacityError(f"stitch {ref}-{other} needs tag {next_tag} but only {max_tags} tags exist")
            tags[ref] = next_tag
            tags[other] = next_tag
            next_tag += 1
    return tags


def _name_words(name: str) -> list[str]:
    return name.split("_")


def encode_length(pattern: SewingPattern) -> int:
    return 2 + sum(3 + len(_name_words(p.name)) + 2 * len(p.edges) for p in pattern.panels)


def encode(
    pattern: SewingPattern, vocab: Vocabulary, stats: NormStats, allow_unknown: bool = False
) -> TokenizedGarment:
    tags = assign_stitch_tags(pattern, vocab.num_tags)
    e_mean, e_std = stats.edge_mean, stats.edge_std
    t_mean, t_std = stats.transform_mean, stats.transform_std
    tokens: list[int] = [vocab[GARMENT_START]]
    payloads: list[np.ndarray | None] = [None]
    masks: list[np.ndarray | None] = [None]

    def push(tok: int, payload=None, mask=None):
        tokens.append(tok)
        payloads.append(payload)
        masks.append(mask)

    for pi, panel in enumerate(pattern.panels):
        push(vocab[PANEL_START])
        for wid in vocab.encode_words(_name_words(panel.name), allow_unknown=allow_unknown):
            push(wid)
        raw_t = np.array(panel.placement.translation + panel.placement.rotation)
        push(vocab[TRANSFORM], (raw_t - t_mean) / t_std, TRANSFORM_MASK.copy())
        n = len(panel.edges)
        for ei, edge in enumerate(panel.edges):
            closing = ei == n - 1
            kind = edge.kind
            raw = np.zeros(EDGE_DIM)
            end = panel.vertices[(ei + 1) % n] if not closing else Point2(0.0, 0.0)
            raw[0:2] = (end.x, end.y)
            g = edge.geometry
            if isinstance(g, QuadBezier):
                raw[2:4] = tuple(g.c1)
            elif isinstance(g, CubicBezier):
                raw[2:4] = tuple(g.c1)
                raw[4:6] = tuple(g.c2)
            elif isinstance(g, Arc):
                raw[6:8] = tuple(g.mid)
            mask = EDGE_MASKS[kind].copy()
            push(vocab[EDGE_TOKENS[kind][closing]], np.where(mask, (raw - e_mean) / e_std, 0.0), mask)
            tag = tags[(pi, ei)]
            push(vocab[NULL_TAG] if tag is None else vocab[tag_token(tag)])
        push(vocab[PANEL_END])
    push(vocab[GARMENT_END])
    return TokenizedGarment(tokens, payloads, masks)


# ---------------------------------------------------------------------------
# grammar


class GarmentGrammar:
    """Incremental recognizer for the garment token grammar.

    ``strict=True`` is the sampling mode: stitch tags must be introduced in
    order, a tag is never used more than twice, panels need at least three
    edges, capacity limits hold and the garment can only end once every open
    tag is closed. ``strict=False`` accepts any tag usage; tag counts are
    checked after the sequence ends.
    """

    START, PANELS, NAME_FIRST, NAME, EDGE, TAG, PANEL_END, DONE = range(8)
    MAX_NAME_WORDS = 8
    MIN_EDGES = 3

    def __init__(self, vocab: Vocabulary, strict: bool = True):
        self.vocab = vocab
        self.strict = strict
        self.state = self.START
        self.panels = 0
        self.total_edges = 0
        self.panel_edges = 0
        self.name_words = 0
        self.last_closing = False
        self.tag_counts: dict[int, int] = {}
        self.next_tag = 1
        v = vocab
        self._gs, self._ge = v[GARMENT_START], v[GARMENT_END]
        self._ps, self._pe = v[PANEL_START], v[PANEL_END]
        self._r = v[TRANSFORM]
        self._open_edges = frozenset(v[EDGE_TOKENS[k][0]] for k in EDGE_KINDS)
        self._closing_edges = frozenset(v[EDGE_TOKENS[k][1]] for k in EDGE_KINDS)

    @property
    def done(self) -> bool:
        return self.state == self.DONE

    def open_tags(self) -> list[int]:
        return [t for t, c in self.tag_counts.items() if c == 1]

    def allowed(self) -> set[int]:
        s = self.state
        if s == self.START:
            return {self._gs}
        if s == self.PANELS:
            out = set()
            if not (self.strict and self.open_tags()):
                out.add(self._ge)
            if not self.strict or (self.panels < MAX_PANELS and self.total_edges + self.MIN_EDGES <= MAX_EDGES):
                out.add(self._ps)
            return out
        if s == self.NAME_FIRST:
            return set(self.vocab.word_ids)
        if s == self.NAME:
            out = {self._r}
            if not self.strict or self.name_words < self.MAX_NAME_WORDS:
                out |= self.vocab.word_ids
            return out
        if s == self.EDGE:
            if not self.strict:
                return set(self._open_edges | self._closing_edges)
            out = set()
            if self.panel_edges >= self.MIN_EDGES - 1:
                out |= self._closing_edges
            if self.total_edges + 2 <= MAX_EDGES:
                out |= self._open_edges
            return out
        if s == self.TAG:
            if not self.strict:
                return set(self.vocab.tag_ids) | {self.vocab.null_tag_id}
            out = {self.vocab.null_tag_id}
            out |= {self.vocab[tag_token(t)] for t in self.open_tags()}
            if self.next_tag <= self.vocab.num_tags:
                out.add(self.vocab[tag_token(self.next_tag)])
            return out
        if s == self.PANEL_END:
            return {self._pe}
        return set()

    def expected(self) -> str:
        return {
            self.START: "<garment_start>",
            self.PANELS: "<panel_start> or <garment_end>",
            self.NAME_FIRST: "a panel-name word",
            self.NAME: "a panel-name word or <R>",
            self.EDGE: "an edge token",
            self.TAG: "a stitch tag",
            self.PANEL_END: "<panel_end>",
            self.DONE: "end of sequence",
        }[self.state]

    def feed(self, tok: int) -> None:
        if tok not in self.allowed():
            shown = self.vocab.tokens[tok] if 0 <= tok < len(self.vocab) else str(tok)
            raise CodecError(f"unexpected {shown}, expected {self.expected()}")
        s = self.state
        if s == self.START:
            self.state = self.PANELS
        elif s == self.PANELS:
            if tok == self._ge:
                self.state = self.DONE
            else:
                self.panels += 1
                self.panel_edges = 0
                self.name_words = 0
                self.state = self.NAME_FIRST
        elif s in (self.NAME_FIRST, self.NAME):
            if tok == self._r:
                self.state = self.EDGE
            else:
                self.name_words += 1
                self.state = self.NAME
        elif s == self.EDGE:
            self.panel_edges += 1
            self.total_edges += 1
            self.last_closing = tok in self._closing_edges
            self.state = self.TAG
        elif s == self.TAG:
            if tok in self.vocab.tag_ids:
                t = self.vocab.tag_ids[tok]
                self.tag_counts[t] = self.tag_counts.get(t, 0) + 1
                if t >= self.next_tag:
                    self.next_tag = t + 1
            self.state = self.PANEL_END if self.last_closing else self.EDGE
        elif s == self.PANEL_END:
            self.state = self.PANELS


# ---------------------------------------------------------------------------
# decoding


@dataclass
class _PanelDraft:
    start: int
    words: list[str] = field(default_factory=list)
    placement: Placement3 | None = None
    edges: list[tuple[str, np.ndarray, int | None, int]] = field(default_factory=list)


def decode(tg: TokenizedGarment, vocab: Vocabulary, stats: NormStats) -> tuple[SewingPattern, list[str]]:
    """Rebuild a pattern from tokens and payloads.

    Returns the pattern and a repair log listing every forced correction
    (closing endpoints snapped to the origin, quaternions renormalized,
    degenerate arcs turned into lines).
    Values are rounded onto the storage grids, so patterns that started on
    them come back bit for bit.
    """
    grammar = GarmentGrammar(vocab, strict=False)
    e_mean, e_std = stats.edge_mean, stats.edge_std
    t_mean, t_std = stats.transform_mean, stats.transform_std
    repairs: list[str] = []
    panels: list[Panel] = []
    tag_uses: dict[int, list[tuple[int, int, int]]] = {}
    draft: _PanelDraft | None = None

    for pos, tok in enumerate(tg.tokens):
        try:
            grammar.feed(tok)
        except CodecError as exc:
            raise DecodeError(pos, f"grammar violation: {exc}") from None
        name = vocab.tokens[tok]
        if name == PANEL_START:
            draft = _PanelDraft(pos)
        elif tok in vocab.word_ids:
            draft.words.append(name)
        elif name == TRANSFORM:
            payload = tg.payloads[pos] if pos < len(tg.payloads) else None
            if payload is None:
                raise DecodeError(pos, "payload missing at <R>")
            raw = np.asarray(payload, dtype=np.float64) * t_std + t_mean
            raw[:3] = np.round(raw[:3] / COORD_GRID) * COORD_GRID + 0.0  # + 0.0 turns -0.0 into 0.0
            raw[3:] = np.round(raw[3:] / QUAT_GRID) * QUAT_GRID + 0.0
            q = raw[3:7]
            norm = float(np.linalg.norm(q))
            if abs(norm - 1.0) > QUAT_NORM_TOL:
                repairs.append(f"position {pos}: quaternion norm {norm:.6g} renormalized")
            try:
                draft.placement = Placement3(tuple(raw[:3]), tuple(q))
            except PatternError as exc:
                raise DecodeError(pos, str(exc)) from None
        elif tok in vocab.edge_ids:
            payload = tg.payloads[pos] if pos < len(tg.payloads) else None
            if payload is None:
                raise DecodeError(pos, f"payload missing at {name}")
            kind, _ = vocab.edge_ids[tok]
            raw = np.round((np.asarray(payload, dtype=np.float64) * e_std + e_mean) / COORD_GRID) * COORD_GRID + 0.0
            draft.edges.append((kind, raw, None, pos))
        elif tok in vocab.tag_ids or tok == vocab.null_tag_id:
            kind, raw, _, epos = draft.edges[-1]
            tag = vocab.tag_ids.get(tok)
            draft.edges[-1] = (kind, raw, tag, epos)
            if tag is not None:
                tag_uses.setdefault(tag, []).append((len(panels), len(draft.edges) - 1, pos))
        elif name == PANEL_END:
            panels.append(_finish_panel(draft, len(panels), repairs))
            draft = None
    if not grammar.done:
        raise DecodeError(len(tg.tokens), f"grammar violation: sequence ended, expected {grammar.expected()}")

    stitches = []
    for tag in sorted(tag_uses):
        uses = tag_uses[tag]
        if len(uses) != 2:
            raise DecodeError(uses[0][2], f"tag t{tag} matched {len(uses)} edge{'s' if len(uses) != 1 else ''}, expected 2")
        (p1, e1, _), (p2, e2, _) = uses
        stitches.append(Stitch((p1, e1), (p2, e2)))
    return SewingPattern(tuple(panels), tuple(stitches)), repairs


def _finish_panel(draft: _PanelDraft, index: int, repairs: list[str]) -> Panel:
    vertices = [Point2(0.0, 0.0)]
    n = len(draft.edges)
    for k, (_, raw, _, pos) in enumerate(draft.edges):
        if k < n - 1:
            vertices.append(Point2(raw[0], raw[1]))
        elif math.hypot(raw[0], raw[1]) > CLOSING_TOL:
            repairs.append(f"position {pos}: closing endpoint ({raw[0]:.6g}, {raw[1]:.6g}) of panel {index} forced to (0, 0)")
    edges = []
    for kind, raw, _, _ in draft.edges:
        if kind == "line":
            edges.append(Edge(Line()))
        elif kind == "quad":
            edges.append(Edge(QuadBezier(Point2(raw[2], raw[3]))))
        elif kind == "cubic":
            edges.append(Edge(CubicBezier(Point2(raw[2], raw[3]), Point2(raw[4], raw[5]))))
        else:
            mid = Point2(raw[6], raw[7])
            k = len(edges)
            if arc_is_degenerate(vertices[k], mid, vertices[(k + 1) % len(vertices)]):
                repairs.append(f"position {draft.edges[k][3]}: arc of panel {index} has a collinear mid-point, decoded as a line")
                edges.append(Edge(Line()))
            else:
                edges.append(Edge(Arc(mid)))
    try:
        return Panel("_".join(draft.words), tuple(vertices), tuple(edges), draft.placement)
    except PatternError as exc:
        raise DecodeError(draft.start, str(exc)) from None


# ---------------------------------------------------------------------------
# files


def save_vocabulary(vocab: Vocabulary, stats: NormStats, path: str | Path) -> None:
    data = {"tokens": vocab.tokens, "num_tags": vocab.num_tags, "stats": stats.to_dict()}
    Path(path).write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")


def load_vocabulary(path: str | Path) -> tuple[Vocabulary, NormStats]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    vocab = Vocabulary(list(data["tokens"]), int(data.get("num_tags", DEFAULT_NUM_TAGS)))
    return vocab, NormStats.from_dict(data["stats"])
