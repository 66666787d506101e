"""Sewing pattern domain types, curve evaluation, validation and file I/O.

A pattern is a list of planar panels, each a closed loop of edges placed in
3D by a rigid transform, plus a set of stitches pairing panel edges. All
coordinates are centimetres in the panel's own frame; the first vertex of a
valid panel sits at the origin.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

NAME_RE = re.compile(r"[a-z][a-z0-9_]*")
MAX_NAME_LEN = 32
MAX_PANELS = 64
MAX_EDGES = 512
ARC_TOL = 1e-6
# Quaternion components below this magnitude are treated as zero when picking a sign.
QUAT_SIGN_EPS = 1e-9
# Quaternions whose norm is this close to 1 are kept as given instead of divided.
QUAT_UNIT_TOL = 1e-9
# Resolution of stored values. Generated patterns lie on these dyadic grids and
# the decoder snaps onto them, which makes tokenize/detokenize exact.
COORD_GRID = 2.0**-30  # cm, about 1e-9
QUAT_GRID = 2.0**-40


class PatternError(ValueError):
    """Base error for malformed patterns."""


class PatternParseError(PatternError):
    """A pattern file could not be parsed; ``where`` names the line or field."""

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


class PatternValidationError(PatternError):
    def __init__(self, report: list["Violation"]):
        self.report = report
        lines = "; ".join(v.message for v in report)
        super().__init__(f"pattern violates {len(report)} invariant(s): {lines}")


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        x, y = float(self.x), float(self.y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise PatternError(f"non-finite point ({self.x}, {self.y})")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __iter__(self):
        yield self.x
        yield self.y

    def dist(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def canonical_quaternion(q: Iterable[float]) -> tuple[float, float, float, float]:
    """Normalize ``q`` = (w, x, y, z) and flip it so the leading significant component is positive."""
    q = tuple(float(c) for c in q)
    if len(q) != 4 or not all(math.isfinite(c) for c in q):
        raise PatternError(f"rotation must be 4 finite numbers, got {q!r}")
    norm = math.sqrt(math.fsum(c * c for c in q))
    if norm == 0.0:
        raise PatternError("rotation quaternion has zero norm")
    if abs(norm - 1.0) > QUAT_UNIT_TOL:
        q = tuple(c / norm for c in q)
    for c in q:
        if abs(c) > QUAT_SIGN_EPS:
            if c < 0:
                q = tuple(-c for c in q)
            break
    return q  # type: ignore[return-value]


@dataclass(frozen=True)
class Placement3:
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        t = tuple(float(c) for c in self.translation)
        if len(t) != 3 or not all(math.isfinite(c) for c in t):
            raise PatternError(f"translation must be 3 finite numbers, got {self.translation!r}")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", canonical_quaternion(self.rotation))


@dataclass(frozen=True)
class Line:
    kind = "line"


@dataclass(frozen=True)
class QuadBezier:
    c1: Point2
    kind = "quad"


@dataclass(frozen=True)
class CubicBezier:
    c1: Point2
    c2: Point2
    kind = "cubic"


@dataclass(frozen=True)
class Arc:
    """Circular arc through the edge endpoints and the on-curve point ``mid``."""

    mid: Point2
    kind = "arc"


EdgeGeometry = Union[Line, QuadBezier, CubicBezier, Arc]


@dataclass(frozen=True)
class Edge:
    geometry: EdgeGeometry = field(default_factory=Line)

    @property
    def kind(self) -> str:
        return self.geometry.kind


def arc_is_degenerate(a: Point2, m: Point2, b: Point2) -> bool:
    cross = (m.x - a.x) * (b.y - a.y) - (m.y - a.y) * (b.x - a.x)
    longest = max(a.dist(m), m.dist(b), a.dist(b))
    if longest == 0.0:
        return True
    # cross / longest is the triangle height over its longest side
    return abs(cross) / longest < ARC_TOL


@dataclass(frozen=True)
class Panel:
    name: str
    vertices: tuple[Point2, ...]
    edges: tuple[Edge, ...]
    placement: Placement3 = field(default_factory=Placement3)

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))
        if len(self.vertices) == len(self.edges):
            for k, edge in enumerate(self.edges):
                if isinstance(edge.geometry, Arc):
                    a, b = self.edge_endpoints(k)
                    if arc_is_degenerate(a, edge.geometry.mid, b):
                        raise PatternError(
                            f"panel {self.name!r} edge {k}: arc mid-point is collinear with its endpoints"
                        )

    @property
    def n(self) -> int:
        return len(self.vertices)

    def edge_endpoints(self, k: int) -> tuple[Point2, Point2]:
        return self.vertices[k], self.vertices[(k + 1) % len(self.vertices)]


@dataclass(frozen=True, order=True)
class Stitch:
    first: tuple[int, int]
    second: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "first", (int(self.first[0]), int(self.first[1])))
        object.__setattr__(self, "second", (int(self.second[0]), int(self.second[1])))

    def canonical(self) -> "Stitch":
        if self.second < self.first:
            return Stitch(self.second, self.first)
        return self


@dataclass(frozen=True)
class SewingPattern:
    """Panels plus stitches.

    Stitches are kept in a canonical order (each pair sorted, then the list
    sorted), so two patterns with the same stitch set compare equal.
    """

    panels: tuple[Panel, ...]
    stitches: tuple[Stitch, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "panels", tuple(self.panels))
        object.__setattr__(self, "stitches", tuple(sorted(s.canonical() for s in self.stitches)))

    @property
    def edge_count(self) -> int:
        return sum(len(p.edges) for p in self.panels)

    def panel_by_name(self, name: str) -> Panel:
        for p in self.panels:
            if p.name == name:
                return p
        raise KeyError(name)


def snap(v: float, grid: float = COORD_GRID) -> float:
    """Nearest multiple of ``grid`` (a power of two, so the arithmetic is exact)."""
    return round(v / grid) * grid


def snap_point(p: Point2) -> Point2:
    return Point2(snap(p.x), snap(p.y))


def snap_placement(pl: Placement3) -> Placement3:
    return Placement3(tuple(snap(c) for c in pl.translation), tuple(snap(c, QUAT_GRID) for c in pl.rotation))


def snap_panel(panel: Panel) -> Panel:
    edges = []
    for e in panel.edges:
        g = e.geometry
        fields_ = {k: snap_point(v) for k, v in vars(g).items()}
        edges.append(Edge(type(g)(**fields_)))
    return Panel(panel.name, tuple(snap_point(v) for v in panel.vertices), tuple(edges), snap_placement(panel.placement))


# ---------------------------------------------------------------------------
# geometry


def circumcenter(a: Point2, b: Point2, c: Point2) -> tuple[float, float]:
    bx, by = b.x - a.x, b.y - a.y
    cx, cy = c.x - a.x, c.y - a.y
    d = 2.0 * (bx * cy - by * cx)
    if d == 0.0:
        raise PatternError("collinear points have no circumcircle")
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    return a.x + ux, a.y + uy


def arc_parameters(start: Point2, mid: Point2, end: Point2) -> tuple[float, float, float, float, float]:
    """Return (cx, cy, radius, start_angle, signed_sweep) of the arc start→mid→end."""
    cx, cy = circumcenter(start, mid, end)
    r = math.hypot(start.x - cx, start.y - cy)
    a0 = math.atan2(start.y - cy, start.x - cx)
    am = math.atan2(mid.y - cy, mid.x - cx)
    a1 = math.atan2(end.y - cy, end.x - cx)
    tau = 2.0 * math.pi
    to_mid = (am - a0) % tau
    to_end = (a1 - a0) % tau
    if to_mid <= to_end:
        sweep = to_end
    else:
        sweep = to_end - tau
    return cx, cy, r, a0, sweep


def evaluate_edge(panel: Panel, edge_index: int, t: float) -> Point2:
    """Point at parameter ``t`` in [0, 1] along edge ``edge_index`` of ``panel``."""
    if not 0 <= edge_index < len(panel.edges):
        raise IndexError(f"edge index {edge_index} out of range for panel {panel.name!r} with {len(panel.edges)} edges")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    p0, p1 = panel.edge_endpoints(edge_index)
    geom = panel.edges[edge_index].geometry
    s = 1.0 - t
    if isinstance(geom, Line):
        return Point2(s * p0.x + t * p1.x, s * p0.y + t * p1.y)
    if isinstance(geom, QuadBezier):
        c = geom.c1
        w0, w1, w2 = s * s, 2.0 * s * t, t * t
        return Point2(w0 * p0.x + w1 * c.x + w2 * p1.x, w0 * p0.y + w1 * c.y + w2 * p1.y)
    if isinstance(geom, CubicBezier):
        c1, c2 = geom.c1, geom.c2
        w0, w1, w2, w3 = s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t
        return Point2(
            w0 * p0.x + w1 * c1.x + w2 * c2.x + w3 * p1.x,
            w0 * p0.y + w1 * c1.y + w2 * c2.y + w3 * p1.y,
        )
    if isinstance(geom, Arc):
        if t == 0.0:
            return p0
        if t == 1.0:
            return p1
        cx, cy, r, a0, sweep = arc_parameters(p0, geom.mid, p1)
        ang = a0 + t * sweep
        return Point2(cx + r * math.cos(ang), cy + r * math.sin(ang))
    raise TypeError(f"unknown edge geometry {geom!r}")


def sample_panel_outline(panel: Panel, per_edge: int = 32) -> list[Point2]:
    """Boundary polyline: ``per_edge`` samples per edge, closing vertex omitted."""
    pts = []
    for k in range(len(panel.edges)):
        for i in range(per_edge):
            pts.append(evaluate_edge(panel, k, i / per_edge))
    return pts


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    panel: int | None = None
    edge: int | None = None
    stitches: tuple[int, ...] = ()


def validate(pattern: SewingPattern) -> list[Violation]:
    """Return every violated invariant of ``pattern``; empty means valid."""
    report: list[Violation] = []
    n_panels = len(pattern.panels)
    if n_panels < 1:
        report.append(Violation("panel_count", "at least one panel required"))
    elif n_panels > MAX_PANELS:
        report.append(Violation("panel_count", f"{n_panels} panels exceeds the limit of {MAX_PANELS}"))
    if pattern.edge_count > MAX_EDGES:
        report.append(Violation("edge_count", f"{pattern.edge_count} edges exceeds the limit of {MAX_EDGES}"))

    for i, p in enumerate(pattern.panels):
        where = f"panel {i} ({p.name!r})"
        if not (NAME_RE.fullmatch(p.name) and len(p.name) <= MAX_NAME_LEN):
            report.append(Violation("panel_name", f"{where}: invalid name", panel=i))
        elif "__" in p.name or p.name.endswith("_"):
            report.append(Violation("panel_name", f"{where}: name has an empty word", panel=i))
        if len(p.vertices) < 3:
            report.append(Violation("vertex_count", f"{where}: needs at least 3 vertices, has {len(p.vertices)}", panel=i))
        if len(p.edges) != len(p.vertices):
            report.append(
                Violation("edge_count", f"{where}: {len(p.edges)} edges for {len(p.vertices)} vertices", panel=i)
            )
        if p.vertices and (p.vertices[0].x != 0.0 or p.vertices[0].y != 0.0):
            report.append(Violation("origin", f"{where}: first vertex is {tuple(p.vertices[0])}, expected (0, 0)", panel=i))
        if len(p.edges) == len(p.vertices):
            for k, e in enumerate(p.edges):
                if isinstance(e.geometry, Arc):
                    a, b = p.edge_endpoints(k)
                    if arc_is_degenerate(a, e.geometry.mid, b):
                        report.append(Violation("degenerate_arc", f"{where} edge {k}: degenerate arc", panel=i, edge=k))

    seen: dict[tuple[int, int], int] = {}
    for j, s in enumerate(pattern.stitches):
        if s.first == s.second:
            report.append(Violation("stitch_self", f"stitch {j} joins edge {s.first} to itself", stitches=(j,)))
        for ref in (s.first, s.second):
            pi, ei = ref
            if not (0 <= pi < n_panels and 0 <= ei < len(pattern.panels[pi].edges)):
                report.append(Violation("stitch_ref", f"stitch {j} references missing edge {ref}", stitches=(j,)))
                continue
            if ref in seen and seen[ref] != j:
                report.append(
                    Violation(
                        "stitch_reuse",
                        f"edge {ref} is used by stitches {seen[ref]} and {j}",
                        panel=pi,
                        edge=ei,
                        stitches=(seen[ref], j),
                    )
                )
            seen.setdefault(ref, j)
    return report


# ---------------------------------------------------------------------------
# serialization


def _fmt(v: float) -> str:
    s = f"{v:.17g}"
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _pt(p: Point2) -> str:
    return f"[{_fmt(p.x)},{_fmt(p.y)}]"


def _edge_json(e: Edge) -> str:
    g = e.geometry
    if isinstance(g, Line):
        return '{"type":"line"}'
    if isinstance(g, QuadBezier):
        return f'{{"type":"quad","c1":{_pt(g.c1)}}}'
    if isinstance(g, CubicBezier):
        return f'{{"type":"cubic","c1":{_pt(g.c1)},"c2":{_pt(g.c2)}}}'
    return f'{{"type":"arc","mid":{_pt(g.mid)}}}'


def _panel_json(p: Panel) -> str:
    verts = ",".join(_pt(v) for v in p.vertices)
    edges = ",".join(_edge_json(e) for e in p.edges)
    tr = ",".join(_fmt(c) for c in p.placement.translation)
    rot = ",".join(_fmt(c) for c in p.placement.rotation)
    return (
        f'{{"name":{json.dumps(p.name)},"vertices":[{verts}],"edges":[{edges}],'
        f'"translation":[{tr}],"rotation":[{rot}]}}'
    )


def dumps_pattern(pattern: SewingPattern) -> str:
    """Deterministic text form: one panel per line, floats with 17 significant digits."""
    panels = ",\n  ".join(_panel_json(p) for p in pattern.panels)
    stitches = ",".join(
        f"[[{s.first[0]},{s.first[1]}],[{s.second[0]},{s.second[1]}]]" for s in pattern.stitches
    )
    return f'{{"panels":[\n  {panels}\n],\n"stitches":[{stitches}]}}\n'


def pattern_to_dict(pattern: SewingPattern) -> dict:
    return json.loads(dumps_pattern(pattern))


def _point(value, where: str) -> Point2:
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(c, (int, float)) for c in value)):
        raise PatternParseError("expected [x, y]", where)
    try:
        return Point2(*value)
    except PatternError as exc:
        raise PatternParseError(str(exc), where) from None


def _floats(value, n: int, where: str) -> list[float]:
    if not (isinstance(value, list) and len(value) == n and all(isinstance(c, (int, float)) for c in value)):
        raise PatternParseError(f"expected {n} numbers", where)
    return [float(c) for c in value]


def _edge_from(obj, where: str) -> Edge:
    if not isinstance(obj, dict) or "type" not in obj:
        raise PatternParseError("edge must be an object with a type", where)
    kind = obj["type"]
    if kind == "line":
        return Edge(Line())
    if kind == "quad":
        return Edge(QuadBezier(_point(obj.get("c1"), f"{where}.c1")))
    if kind == "cubic":
        return Edge(CubicBezier(_point(obj.get("c1"), f"{where}.c1"), _point(obj.get("c2"), f"{where}.c2")))
    if kind == "arc":
        return Edge(Arc(_point(obj.get("mid"), f"{where}.mid")))
    raise PatternParseError(f"unknown edge type {kind!r}", f"{where}.type")


def pattern_from_dict(data) -> SewingPattern:
    if not isinstance(data, dict):
        raise PatternParseError("top level must be an object")
    panels_raw = data.get("panels")
    if not isinstance(panels_raw, list):
        raise PatternParseError("missing panels list", "panels")
    if not panels_raw:
        raise PatternParseError("at least one panel required", "panels")
    panels = []
    for i, pd in enumerate(panels_raw):
        where = f"panels[{i}]"
        if not isinstance(pd, dict):
            raise PatternParseError("panel must be an object", where)
        name = pd.get("name")
        if not isinstance(name, str):
            raise PatternParseError("name must be a string", f"{where}.name")
        verts_raw = pd.get("vertices")
        edges_raw = pd.get("edges")
        if not isinstance(verts_raw, list):
            raise PatternParseError("vertices must be a list", f"{where}.vertices")
        if not isinstance(edges_raw, list):
            raise PatternParseError("edges must be a list", f"{where}.edges")
        verts = [_point(v, f"{where}.vertices[{k}]") for k, v in enumerate(verts_raw)]
        edges = [_edge_from(e, f"{where}.edges[{k}]") for k, e in enumerate(edges_raw)]
        tr = _floats(pd.get("translation"), 3, f"{where}.translation")
        rot = _floats(pd.get("rotation"), 4, f"{where}.rotation")
        try:
            panels.append(Panel(name, verts, edges, Placement3(tuple(tr), tuple(rot))))
        except PatternError as exc:
            raise PatternParseError(str(exc), where) from None
    stitches = []
    for j, sd in enumerate(data.get("stitches", [])):
        where = f"stitches[{j}]"
        ok = (
            isinstance(sd, list)
            and len(sd) == 2
            and all(isinstance(r, list) and len(r) == 2 and all(isinstance(c, int) for c in r) for r in sd)
        )
        if not ok:
            raise PatternParseError("stitch must be [[panel, edge], [panel, edge]]", where)
        stitches.append(Stitch(tuple(sd[0]), tuple(sd[1])))
    return SewingPattern(tuple(panels), tuple(stitches))


def loads_pattern(text: str, check: bool = True) -> SewingPattern:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PatternParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    pattern = pattern_from_dict(data)
    if check:
        report = validate(pattern)
        if report:
            raise PatternValidationError(report)
    return pattern


def read_pattern(path: str | Path, check: bool = True) -> SewingPattern:
    return loads_pattern(Path(path).read_text(encoding="utf-8"), check=check)


def write_pattern(pattern: SewingPattern, path: str | Path) -> None:
    Path(path).write_text(dumps_pattern(pattern), encoding="utf-8")


# ---------------------------------------------------------------------------
# comparison helpers


def max_abs_difference(a: SewingPattern, b: SewingPattern) -> float:
    """Largest coordinate difference between structurally identical patterns; inf if structure differs."""
    if len(a.panels) != len(b.panels) or a.stitches != b.stitches:
        return math.inf
    worst = 0.0
    for pa, pb in zip(a.panels, b.panels):
        if pa.name != pb.name or len(pa.vertices) != len(pb.vertices) or len(pa.edges) != len(pb.edges):
            return math.inf
        for va, vb in zip(pa.vertices, pb.vertices):
            worst = max(worst, abs(va.x - vb.x), abs(va.y - vb.y))
        for ea, eb in zip(pa.edges, pb.edges):
            if type(ea.geometry) is not type(eb.geometry):
                return math.inf
            for fa, fb in zip(control_points(ea), control_points(eb)):
                worst = max(worst, abs(fa.x - fb.x), abs(fa.y - fb.y))
        for ca, cb in zip(pa.placement.translation + pa.placement.rotation, pb.placement.translation + pb.placement.rotation):
            worst = max(worst, abs(ca - cb))
    return worst


def control_points(e: Edge) -> tuple[Point2, ...]:
    g = e.geometry
    if isinstance(g, QuadBezier):
        return (g.c1,)
    if isinstance(g, CubicBezier):
        return (g.c1, g.c2)
    if isinstance(g, Arc):
        return (g.mid,)
    return ()
