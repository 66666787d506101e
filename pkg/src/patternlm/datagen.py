"""Procedural garments, rule-based captions and editing pairs.

Six garment families are built in closed form. Between them they use every
edge type (lines, quadratic waists and necklines, cubic armholes, arc hems
and sleeve caps), stitched rings (godet gores) and left/right panel pairs.

Caption thresholds (all lengths in cm):

=============  ==============================================================
parameter      rule
=============  ==============================================================
skirt length   <= 45 "mini length", <= 70 "midi length", else "maxi length"
dress skirt    <= 50 "knee length", <= 80 "midi length", else "maxi length"
top length     <= 50 "cropped length", <= 65 "waist length", else "hip length"
width          <= 40 "fitted", <= 52 "regular fit", else "loose fit"
flare ratio    <= 1.4 "slight flare", else "flared hem"  (flared, godet, dress)
inserts        "<count word> inserts"  (godet only)
waistband      "with waistband" / "no waistband"  (straight and flared skirts)
sleeve         "sleeveless" / "short sleeves" / "long sleeves"  (tee, dress)
neckline       "round neckline" / "v neckline"  (tee, tank, dress)
symmetry       "symmetric design" / "asymmetric design"
=============  ==============================================================
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from patternlm.codec import Vocabulary, fit_norm_stats, save_vocabulary
from patternlm.pattern import (
    Arc,
    CubicBezier,
    Edge,
    Line,
    Panel,
    Placement3,
    Point2,
    QuadBezier,
    SewingPattern,
    Stitch,
    pattern_from_dict,
    pattern_to_dict,
    snap_panel,
)

FAMILIES = ("straight_skirt", "flared_skirt", "godet_skirt", "tee", "tank", "dress")
SLEEVES = ("none", "short", "long")
NECKLINES = ("round", "v")
SKIRTS = ("straight_skirt", "flared_skirt", "godet_skirt")
TOPS = ("tee", "tank")

# (length range, width range) used when sampling
LENGTH_RANGE = {
    "straight_skirt": (35.0, 110.0),
    "flared_skirt": (35.0, 110.0),
    "godet_skirt": (35.0, 110.0),
    "tee": (50.0, 80.0),
    "tank": (45.0, 75.0),
    "dress": (40.0, 110.0),
}
WIDTH_RANGE = {
    "straight_skirt": (30.0, 60.0),
    "flared_skirt": (30.0, 60.0),
    "godet_skirt": (30.0, 60.0),
    "tee": (36.0, 60.0),
    "tank": (34.0, 56.0),
    "dress": (36.0, 56.0),
}
# length limits enforced by edits; tops keep room for the armhole above a slanted hem
LENGTH_LIMITS = {f: (10.0, 150.0) for f in FAMILIES} | {"tee": (40.0, 120.0), "tank": (40.0, 120.0)}

NUMBER_WORDS = {
    2: "two", 4: "four", 5: "five", 6: "six", 7: "seven", 8: "eight",
    9: "nine", 10: "ten", 11: "eleven", 12: "twelve",
}
GARMENT_NOUN = {
    "straight_skirt": "skirt", "flared_skirt": "skirt", "godet_skirt": "skirt",
    "tee": "shirt", "tank": "top", "dress": "dress",
}
FAMILY_PHRASE = {
    "straight_skirt": "straight skirt",
    "flared_skirt": "flared skirt",
    "godet_skirt": "godet skirt",
    "tee": "tee shirt",
    "tank": "tank top",
    "dress": "dress",
}

WAISTBAND_H = 5.0
DRESS_BODICE_H = 38.0
SHORT_SLEEVE, LONG_SLEEVE = 18.0, 55.0


@dataclass(frozen=True)
class DesignParams:
    """Garment parameters. Inactive parameters hold fixed defaults:
    flare_ratio 1.0, num_inserts 0, waistband False, sleeve "none", neckline "round".
    """

    family: str
    length_cm: float
    width_cm: float
    flare_ratio: float = 1.0
    num_inserts: int = 0
    waistband: bool = False
    sleeve: str = "none"
    neckline: str = "round"
    symmetric: bool = True

    def active(self) -> set[str]:
        f = self.family
        act = {"length_cm", "width_cm", "symmetric"}
        if f in ("flared_skirt", "godet_skirt", "dress"):
            act.add("flare_ratio")
        if f == "godet_skirt":
            act.add("num_inserts")
        if f in ("straight_skirt", "flared_skirt"):
            act.add("waistband")
        if f in ("tee", "dress"):
            act.add("sleeve")
        if f in ("tee", "tank", "dress"):
            act.add("neckline")
        return act

    def check(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        for name in ("length_cm", "width_cm"):
            if not 10.0 <= getattr(self, name) <= 150.0:
                raise ValueError(f"{name}={getattr(self, name)} outside [10, 150]")
        act = self.active()
        if "num_inserts" in act and not 4 <= self.num_inserts <= 12:
            raise ValueError("godet skirts need 4..12 inserts")
        defaults = DesignParams(self.family, self.length_cm, self.width_cm)
        for name in ("flare_ratio", "num_inserts", "waistband", "sleeve", "neckline"):
            if name not in act and getattr(self, name) != getattr(defaults, name):
                raise ValueError(f"{name} is inactive for {self.family} and must keep its default")
        if "flare_ratio" in act and self.flare_ratio < 1.0:
            raise ValueError("flare_ratio must be >= 1")


@dataclass(frozen=True)
class Sample:
    pattern: SewingPattern
    caption: tuple[str, ...]
    params: DesignParams
    seed: int


@dataclass(frozen=True)
class EditSample:
    before: SewingPattern
    after: SewingPattern
    instruction: tuple[str, ...]
    rule_id: str
    params_before: DesignParams
    params_after: DesignParams


def derive_seed(global_seed: int, index: int, stream: int = 0) -> int:
    """64-bit seed for sample ``index`` of a run seeded with ``global_seed``."""
    ss = np.random.SeedSequence([global_seed & 0xFFFFFFFFFFFFFFFF, index, stream])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, stream]))


def sample_params(seed: int) -> DesignParams:
    rng = _rng(seed)
    family = FAMILIES[int(rng.integers(len(FAMILIES)))]
    lo, hi = LENGTH_RANGE[family]
    length = round(float(rng.uniform(lo, hi)), 1)
    lo, hi = WIDTH_RANGE[family]
    width = round(float(rng.uniform(lo, hi)), 1)
    flare = round(float(rng.uniform(1.15, 2.0)), 2)
    inserts = int(rng.integers(4, 13))
    waistband = bool(rng.random() < 0.5)
    sleeve = SLEEVES[int(rng.integers(3))]
    neckline = NECKLINES[int(rng.integers(2))]
    symmetric = bool(rng.random() < 0.7)
    p = DesignParams(family, length, width, symmetric=symmetric)
    act = p.active()
    return replace(
        p,
        flare_ratio=flare if "flare_ratio" in act else 1.0,
        num_inserts=inserts if "num_inserts" in act else 0,
        waistband=waistband if "waistband" in act else False,
        sleeve=sleeve if "sleeve" in act else "none",
        neckline=neckline if "neckline" in act else "round",
    )


# ---------------------------------------------------------------------------
# panel construction


def _quat_y(angle: float) -> tuple[float, float, float, float]:
    return (math.cos(angle / 2), 0.0, math.sin(angle / 2), 0.0)


def _quat_z(angle: float) -> tuple[float, float, float, float]:
    return (math.cos(angle / 2), 0.0, 0.0, math.sin(angle / 2))


FRONT = (1.0, 0.0, 0.0, 0.0)
BACK = (0.0, 0.0, 1.0, 0.0)


def _sag_point(a: tuple[float, float], b: tuple[float, float], sag: float) -> Point2:
    """Point offset ``sag`` to the right of the chord a→b, at its middle."""
    mx, my = (a[0] + b[0]) / 2, (a[1] + b[1]) / 2
    dx, dy = b[0] - a[0], b[1] - a[1]
    n = math.hypot(dx, dy)
    return Point2(mx + sag * dy / n, my - sag * dx / n)


def _panel(name, verts, edges, translation, rotation) -> Panel:
    return snap_panel(Panel(name, tuple(Point2(*v) for v in verts), tuple(edges), Placement3(translation, rotation)))


class _Builder:
    """Collects panels and stitches, referring to edges by (panel name, edge index)."""

    def __init__(self):
        self.panels: list[Panel] = []
        self.seams: list[tuple[tuple[str, int], tuple[str, int]]] = []

    def add(self, panel: Panel) -> None:
        self.panels.append(panel)

    def stitch(self, a: tuple[str, int], b: tuple[str, int]) -> None:
        self.seams.append((a, b))

    def build(self) -> SewingPattern:
        idx = {p.name: i for i, p in enumerate(self.panels)}
        stitches = [Stitch((idx[a[0]], a[1]), (idx[b[0]], b[1])) for a, b in self.seams]
        return SewingPattern(tuple(self.panels), tuple(stitches))


def _skirt_panel(name, waist, hem, length, asym, curved_hem, translation, rotation) -> Panel:
    """Trapezoid hem→waist; edges: hem, right seam, waist (quad), left seam (closing)."""
    raise_r = 0.15 * length if asym else 0.0
    v = [(0.0, 0.0), (hem, raise_r), ((hem + waist) / 2, length), ((hem - waist) / 2, length)]
    hem_edge = Edge(Arc(_sag_point(v[0], v[1], 0.08 * hem))) if curved_hem else Edge(Line())
    waist_ctrl = Point2(hem / 2, length - 3.0)
    edges = [hem_edge, Edge(Line()), Edge(QuadBezier(waist_ctrl)), Edge(Line())]
    return _panel(name, v, edges, translation, rotation)


def _build_skirt(p: DesignParams, b: _Builder, prefix: str = "skirt", top_y: float = 100.0, bodice: bool = False):
    waist = p.width_cm
    hem = p.width_cm * p.flare_ratio
    curved = p.family != "straight_skirt"
    y = top_y - p.length_cm
    front, back = f"{prefix}_front", f"{prefix}_back"
    b.add(_skirt_panel(front, waist, hem, p.length_cm, not p.symmetric, curved, (-hem / 2, y, 15.0), FRONT))
    b.add(_skirt_panel(back, waist, hem, p.length_cm, not p.symmetric, curved, (hem / 2, y, -15.0), BACK))
    b.stitch((front, 1), (back, 3))
    b.stitch((front, 3), (back, 1))
    if p.waistband and not bodice:
        for side, z, rot in (("front", 15.0, FRONT), ("back", -15.0, BACK)):
            v = [(0.0, 0.0), (waist, 0.0), (waist, WAISTBAND_H), (0.0, WAISTBAND_H)]
            x = -waist / 2 if side == "front" else waist / 2
            b.add(_panel(f"waistband_{side}", v, [Edge(Line())] * 4, (x, top_y, z), rot))
        b.stitch(("waistband_front", 0), (front, 2))
        b.stitch(("waistband_back", 0), (back, 2))
        b.stitch(("waistband_front", 1), ("waistband_back", 3))
        b.stitch(("waistband_front", 3), ("waistband_back", 1))


def _build_godet(p: DesignParams, b: _Builder, top_y: float = 100.0):
    n = p.num_inserts
    g = 2.0 * p.width_cm * p.flare_ratio / n
    apex = g / 2 if p.symmetric else 0.35 * g
    radius = 2.0 * p.width_cm * p.flare_ratio / (2 * math.pi)
    names = [f"gore_{i + 1}" for i in range(n)]
    for i, name in enumerate(names):
        v = [(0.0, 0.0), (g, 0.0), (apex, p.length_cm)]
        edges = [Edge(Arc(_sag_point(v[0], v[1], 0.15 * g))), Edge(Line()), Edge(Line())]
        ang = 2 * math.pi * i / n
        t = (radius * math.sin(ang), top_y - p.length_cm, radius * math.cos(ang))
        b.add(_panel(name, v, edges, t, _quat_y(ang)))
    for i in range(n):
        b.stitch((names[i], 1), (names[(i + 1) % n], 2))


def _bodice_panel(name, W, L, ad, si, nw, nd, v_neck, armhole_arc, raise_r, translation, rotation):
    """Bodice loop from the bottom-left corner; returns (panel, edge-index map)."""
    verts = [
        (0.0, 0.0),
        (W, raise_r),
        (W, L - ad),
        (W - si, L),
        ((W + nw) / 2, L),
    ]
    edges = [Edge(Line()), Edge(Line())]
    idx = {"hem": 0, "side_r": 1}

    def armhole(a, b, right: bool):
        if armhole_arc:
            return Edge(Arc(_sag_point(a, b, -0.12 * math.dist(a, b))))
        if right:
            return Edge(CubicBezier(Point2(W - 0.6 * si, L - 0.6 * ad), Point2(W - 0.9 * si, L - 0.2 * ad)))
        return Edge(CubicBezier(Point2(0.9 * si, L - 0.2 * ad), Point2(0.6 * si, L - 0.6 * ad)))

    idx["arm_r"] = len(edges)
    edges.append(armhole(verts[2], verts[3], True))
    idx["shoulder_r"] = len(edges)
    edges.append(Edge(Line()))
    if v_neck:
        verts.append((W / 2, L - nd))
        edges += [Edge(Line()), Edge(Line())]
    else:
        edges.append(Edge(QuadBezier(Point2(W / 2, L - 2 * nd))))
    verts += [((W - nw) / 2, L), (si, L), (0.0, L - ad)]
    idx["shoulder_l"] = len(edges)
    edges.append(Edge(Line()))
    idx["arm_l"] = len(edges)
    edges.append(armhole(verts[-2], verts[-1], False))
    idx["side_l"] = len(edges)
    edges.append(Edge(Line()))
    return _panel(name, verts, edges, translation, rotation), idx


def _sleeve_panel(name, top_w, cuff_w, length, ad, translation, rotation) -> Panel:
    d = (top_w - cuff_w) / 2
    cap = 0.35 * ad
    v = [(0.0, 0.0), (cuff_w, 0.0), (cuff_w + d, length), (cuff_w / 2, length + cap), (-d, length)]
    edges = [
        Edge(Line()),
        Edge(Line()),
        Edge(Arc(_sag_point(v[2], v[3], 0.1 * math.dist(v[2], v[3])))),
        Edge(Arc(_sag_point(v[3], v[4], 0.1 * math.dist(v[3], v[4])))),
        Edge(Line()),
    ]
    return _panel(name, v, edges, translation, rotation)


def _build_top(p: DesignParams, b: _Builder, shoulder_y: float = 150.0, prefix: str = "", hem_asym: bool | None = None):
    W = p.width_cm
    L = DRESS_BODICE_H if p.family == "dress" else p.length_cm
    tank = p.family == "tank"
    ad = 0.4 * W if not tank else 0.45 * W
    si = 0.12 * W if not tank else 0.3 * W
    nw = 0.3 * W if not tank else 0.36 * W
    nd_front = 0.12 * L if p.neckline == "round" else 0.22 * L
    nd_back = 0.04 * L
    asym = (not p.symmetric) if hem_asym is None else hem_asym
    raise_r = 0.1 * L if asym else 0.0
    front, back = f"{prefix}front", f"{prefix}back"
    y = shoulder_y - L
    fp, fi = _bodice_panel(front, W, L, ad, si, nw, nd_front, p.neckline == "v", tank, raise_r, (-W / 2, y, 12.0), FRONT)
    bp, bi = _bodice_panel(back, W, L, ad, si, nw, nd_back, False, tank, raise_r, (W / 2, y, -12.0), BACK)
    b.add(fp)
    b.add(bp)
    b.stitch((front, fi["side_r"]), (back, bi["side_l"]))
    b.stitch((front, fi["side_l"]), (back, bi["side_r"]))
    b.stitch((front, fi["shoulder_r"]), (back, bi["shoulder_l"]))
    b.stitch((front, fi["shoulder_l"]), (back, bi["shoulder_r"]))
    if p.sleeve != "none":
        sl = SHORT_SLEEVE if p.sleeve == "short" else LONG_SLEEVE
        top_w = 1.8 * ad
        cuff_w = (0.7 if p.sleeve == "short" else 0.5) * top_w
        right_len = sl if p.symmetric else 0.8 * sl
        sy = shoulder_y - ad
        b.add(_sleeve_panel("sleeve_right", top_w, cuff_w, right_len, ad, (W / 2 + 10.0, sy, 0.0), _quat_z(math.pi / 2)))
        b.add(_sleeve_panel("sleeve_left", top_w, cuff_w, sl, ad, (-W / 2 - 10.0, sy, 0.0), _quat_z(-math.pi / 2)))
        for s in ("sleeve_right", "sleeve_left"):
            b.stitch((s, 1), (s, 4))
        b.stitch(("sleeve_right", 2), (front, fi["arm_r"]))
        b.stitch(("sleeve_right", 3), (back, bi["arm_l"]))
        b.stitch(("sleeve_left", 2), (back, bi["arm_r"]))
        b.stitch(("sleeve_left", 3), (front, fi["arm_l"]))
    return front, back


def build_pattern(params: DesignParams) -> SewingPattern:
    params.check()
    b = _Builder()
    f = params.family
    if f in ("straight_skirt", "flared_skirt"):
        _build_skirt(params, b)
    elif f == "godet_skirt":
        _build_godet(params, b)
    elif f in TOPS:
        _build_top(params, b)
    else:
        front, back = _build_top(params, b, prefix="bodice_", hem_asym=False)
        waist_y = 150.0 - DRESS_BODICE_H
        _build_skirt(params, b, top_y=waist_y, bodice=True)
        b.stitch((front, 0), ("skirt_front", 2))
        b.stitch((back, 0), ("skirt_back", 2))
    return b.build()


# panels each edit rule may touch
def affected_panels(rule_id: str, params: DesignParams) -> set[str] | None:
    """Panel names an edit rule is allowed to change; None means every panel."""
    f = params.family
    if rule_id.startswith("length"):
        if f == "godet_skirt":
            return None
        if f in TOPS:
            return {"front", "back"}
        return {"skirt_front", "skirt_back"}
    if rule_id == "neckline_swap":
        return {"bodice_front"} if f == "dress" else {"front"}
    if rule_id == "waistband_toggle":
        return {"waistband_front", "waistband_back"}
    if rule_id.startswith("sleeve"):
        return {"sleeve_left", "sleeve_right"}
    return None


# ---------------------------------------------------------------------------
# captions


def _length_phrase(p: DesignParams) -> str:
    L = p.length_cm
    if p.family in SKIRTS:
        return "mini length" if L <= 45 else "midi length" if L <= 70 else "maxi length"
    if p.family == "dress":
        return "knee length" if L <= 50 else "midi length" if L <= 80 else "maxi length"
    return "cropped length" if L <= 50 else "waist length" if L <= 65 else "hip length"


def caption_phrases(params: DesignParams) -> list[str]:
    """Rule-table phrases for ``params`` in a fixed order."""
    p = params
    act = p.active()
    out = [FAMILY_PHRASE[p.family], _length_phrase(p)]
    out.append("fitted" if p.width_cm <= 40 else "regular fit" if p.width_cm <= 52 else "loose fit")
    if "flare_ratio" in act:
        out.append("slight flare" if p.flare_ratio <= 1.4 else "flared hem")
    if "num_inserts" in act:
        out.append(f"{NUMBER_WORDS[p.num_inserts]} inserts")
    if "waistband" in act:
        out.append("with waistband" if p.waistband else "no waistband")
    if "sleeve" in act:
        out.append({"none": "sleeveless", "short": "short sleeves", "long": "long sleeves"}[p.sleeve])
    if "neckline" in act:
        out.append(f"{p.neckline} neckline")
    out.append("symmetric design" if p.symmetric else "asymmetric design")
    return out


def caption(params: DesignParams, seed: int) -> tuple[str, ...]:
    phrases = caption_phrases(params)
    order = _rng(seed, 1).permutation(len(phrases))
    return tuple(w for i in order for w in phrases[i].split())


# ---------------------------------------------------------------------------
# edits


@dataclass(frozen=True)
class EditRule:
    rule_id: str
    applies: Callable[[DesignParams], bool]
    apply: Callable[[DesignParams], DesignParams]
    instruction: Callable[[DesignParams], str]


def _longer(p):
    return replace(p, length_cm=min(round(p.length_cm * 1.5, 6), LENGTH_LIMITS[p.family][1]))


def _shorter(p):
    return replace(p, length_cm=max(round(p.length_cm * 0.5, 6), LENGTH_LIMITS[p.family][0]))


def _toggle_sleeve(target: str):
    return lambda p: replace(p, sleeve=target)


EDIT_RULES: tuple[EditRule, ...] = (
    EditRule(
        "length_longer",
        lambda p: p.length_cm < LENGTH_LIMITS[p.family][1],
        _longer,
        lambda p: f"make the {GARMENT_NOUN[p.family]} longer",
    ),
    EditRule(
        "length_shorter",
        lambda p: p.length_cm > LENGTH_LIMITS[p.family][0],
        _shorter,
        lambda p: f"make the {GARMENT_NOUN[p.family]} shorter",
    ),
    EditRule(
        "neckline_swap",
        lambda p: "neckline" in p.active(),
        lambda p: replace(p, neckline="v" if p.neckline == "round" else "round"),
        lambda p: f"switch the neckline from {p.neckline} to {'v' if p.neckline == 'round' else 'round'}",
    ),
    EditRule(
        "waistband_toggle",
        lambda p: "waistband" in p.active(),
        lambda p: replace(p, waistband=not p.waistband),
        lambda p: "remove the waistband" if p.waistband else "add a waistband",
    ),
    EditRule("sleeve_add", lambda p: "sleeve" in p.active() and p.sleeve == "none", _toggle_sleeve("short"), lambda p: "add short sleeves"),
    EditRule("sleeve_remove", lambda p: "sleeve" in p.active() and p.sleeve != "none", _toggle_sleeve("none"), lambda p: "remove the sleeves"),
    EditRule("sleeve_longer", lambda p: "sleeve" in p.active() and p.sleeve == "short", _toggle_sleeve("long"), lambda p: "make the sleeves longer"),
    EditRule("sleeve_shorter", lambda p: "sleeve" in p.active() and p.sleeve == "long", _toggle_sleeve("short"), lambda p: "make the sleeves shorter"),
    EditRule(
        "inserts_increase",
        lambda p: "num_inserts" in p.active() and p.num_inserts <= 10,
        lambda p: replace(p, num_inserts=p.num_inserts + 2),
        lambda p: "increase the number of inserts in the skirt by 2",
    ),
    EditRule(
        "inserts_decrease",
        lambda p: "num_inserts" in p.active() and p.num_inserts >= 6,
        lambda p: replace(p, num_inserts=p.num_inserts - 2),
        lambda p: "decrease the number of inserts in the skirt by 2",
    ),
    EditRule(
        "symmetry_toggle",
        lambda p: True,
        lambda p: replace(p, symmetric=not p.symmetric),
        lambda p: "make the design asymmetric" if p.symmetric else "make the design symmetric",
    ),
)
RULES_BY_ID = {r.rule_id: r for r in EDIT_RULES}


def applicable_rules(params: DesignParams) -> list[EditRule]:
    return [r for r in EDIT_RULES if r.applies(params)]


def apply_rule(params: DesignParams, rule: EditRule) -> EditSample:
    after_params = rule.apply(params)
    return EditSample(
        before=build_pattern(params),
        after=build_pattern(after_params),
        instruction=tuple(rule.instruction(params).split()),
        rule_id=rule.rule_id,
        params_before=params,
        params_after=after_params,
    )


def make_edit(params: DesignParams, seed: int) -> EditSample:
    rules = applicable_rules(params)
    rule = rules[int(_rng(seed, 2).integers(len(rules)))]
    return apply_rule(params, rule)


# ---------------------------------------------------------------------------
# vocabulary and dataset files


def _param_grid():
    for fam in FAMILIES:
        for length in (10.0, 40.0, 60.0, 75.0, 100.0, 150.0):
            for width in (30.0, 45.0, 60.0):
                for flare in (1.2, 1.6):
                    for inserts in range(4, 13):
                        for sleeve in SLEEVES:
                            for neck in NECKLINES:
                                for wb in (False, True):
                                    for sym in (False, True):
                                        p = DesignParams(fam, length, width, symmetric=sym)
                                        act = p.active()
                                        yield replace(
                                            p,
                                            flare_ratio=flare if "flare_ratio" in act else 1.0,
                                            num_inserts=inserts if "num_inserts" in act else 0,
                                            waistband=wb and "waistband" in act,
                                            sleeve=sleeve if "sleeve" in act else "none",
                                            neckline=neck if "neckline" in act else "round",
                                        )


def corpus_words() -> set[str]:
    """Every word the generator can emit in panel names, captions or instructions."""
    words: set[str] = set()
    for p in set(_param_grid()):
        for panel in build_pattern(p).panels:
            words.update(panel.name.split("_"))
        for phrase in caption_phrases(p):
            words.update(phrase.split())
        for r in applicable_rules(p):
            words.update(r.instruction(p).split())
    return words


def build_vocabulary(num_tags: int = 108) -> Vocabulary:
    return Vocabulary.build(corpus_words(), num_tags=num_tags)


def generate_sample(global_seed: int, index: int) -> Sample:
    seed = derive_seed(global_seed, index)
    params = sample_params(seed)
    return Sample(build_pattern(params), caption(params, seed), params, seed)


def split_of(global_seed: int, n: int) -> dict[str, list[int]]:
    """90/5/5 train/val/test split by a stable hash of the sample index."""
    def key(i):
        return hashlib.sha256(f"{global_seed}:{i}".encode()).hexdigest()

    order = sorted(range(n), key=key)
    n_eval = max(1, n * 5 // 100)
    n_train = n - 2 * n_eval
    return {
        "train": sorted(order[:n_train]),
        "val": sorted(order[n_train:n_train + n_eval]),
        "test": sorted(order[n_train + n_eval:]),
    }


MODALITIES = ("text", "image", "text_image", "edit")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def text_record(i: int, sample: Sample) -> dict:
    return {
        "id": i,
        "modality": "text",
        "family": sample.params.family,
        "caption": list(sample.caption),
        "pattern": pattern_to_dict(sample.pattern),
    }


def edit_record(i: int, edit: EditSample) -> dict:
    return {
        "id": i,
        "modality": "edit",
        "family": edit.params_after.family,
        "instruction": list(edit.instruction),
        "rule_id": edit.rule_id,
        "before": pattern_to_dict(edit.before),
        "pattern": pattern_to_dict(edit.after),
    }


def record_patterns(record: dict) -> list[SewingPattern]:
    out = [pattern_from_dict(record["pattern"])]
    if record.get("before") is not None:
        out.append(pattern_from_dict(record["before"]))
    return out


def emit_dataset(n: int, seed: int, out_dir: str | Path) -> dict:
    """Write shards ``<split>_<modality>.jsonl``, ``vocab.json`` and ``manifest.json``.

    Text and text+image shards hold the same garments (the image slot stays
    empty); edit shards pair each garment with one applicable edit. The
    normalization statistics are fitted on train-split patterns only (text
    patterns plus edited patterns).
    """
    if n < 20:
        raise ValueError("emit_dataset needs n >= 20")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    splits = split_of(seed, n)
    vocab = build_vocabulary()
    records: dict[int, tuple[dict, dict]] = {}
    for i in range(n):
        sample = generate_sample(seed, i)
        edit = make_edit(sample.params, sample.seed)
        records[i] = (text_record(i, sample), edit_record(i, edit))

    counts: dict[str, dict[str, int]] = {}
    shards: dict[str, dict[str, str]] = {}
    for split, ids in splits.items():
        counts[split] = {}
        shards[split] = {}
        for modality in MODALITIES:
            lines = []
            for i in ids:
                text_rec, edit_rec = records[i]
                if modality == "text":
                    lines.append(_dumps(text_rec))
                elif modality == "text_image":
                    lines.append(_dumps(text_rec | {"image": None}))
                elif modality == "edit":
                    lines.append(_dumps(edit_rec))
            name = f"{split}_{modality}.jsonl"
            (out / name).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
            counts[split][modality] = len(lines)
            shards[split][modality] = name

    train_patterns = []
    for i in splits["train"]:
        text_rec, edit_rec = records[i]
        train_patterns.append(pattern_from_dict(text_rec["pattern"]))
        train_patterns.append(pattern_from_dict(edit_rec["pattern"]))
    stats = fit_norm_stats(train_patterns)
    save_vocabulary(vocab, stats, out / "vocab.json")
    manifest = {
        "seed": seed,
        "n": n,
        "counts": counts,
        "splits": splits,
        "shards": shards,
        "vocabulary": "vocab.json",
        "norm_stats": stats.to_dict(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def params_to_dict(p: DesignParams) -> dict:
    return asdict(p)
