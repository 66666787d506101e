import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patternlm.pattern import (
    Arc,
    CubicBezier,
    Edge,
    Line,
    Panel,
    PatternError,
    PatternParseError,
    Placement3,
    Point2,
    QuadBezier,
    SewingPattern,
    Stitch,
    arc_parameters,
    dumps_pattern,
    evaluate_edge,
    loads_pattern,
    max_abs_difference,
    read_pattern,
    validate,
    write_pattern,
)

P = Point2


def seg(kind_geom, a=P(0, 0), b=P(10, 0)):
    return Panel("p", (a, b, P(5, -8)), (Edge(kind_geom), Edge(Line()), Edge(Line())))


def test_line_midpoint():
    assert evaluate_edge(seg(Line()), 0, 0.5) == P(5, 0)


def test_quad_midpoint():
    assert evaluate_edge(seg(QuadBezier(P(5, 10))), 0, 0.5) == P(5, 5)


def test_arc_midpoint():
    pt = evaluate_edge(seg(Arc(P(5, 5))), 0, 0.5)
    assert pt.dist(P(5, 5)) < 1e-12


def test_cubic_endpoints_exact():
    panel = seg(CubicBezier(P(2, 4), P(8, -3)))
    assert evaluate_edge(panel, 0, 0.0) == P(0, 0)
    assert evaluate_edge(panel, 0, 1.0) == P(10, 0)


def test_evaluate_edge_rejects_bad_input():
    panel = seg(Line())
    with pytest.raises(IndexError):
        evaluate_edge(panel, 3, 0.5)
    with pytest.raises(ValueError):
        evaluate_edge(panel, 0, 1.5)


def test_non_finite_point_rejected():
    with pytest.raises(PatternError):
        P(float("nan"), 0)


def test_degenerate_arc_rejected():
    with pytest.raises(PatternError, match="collinear"):
        seg(Arc(P(5, 0)))


def test_quaternion_normalized_and_sign_canonical():
    pl = Placement3((0, 0, 0), (1, 1, 0, 0))
    h = math.sqrt(0.5)
    assert pl.rotation == pytest.approx((h, h, 0, 0), abs=1e-15)
    assert Placement3(rotation=(-1, 0, 0, 0)).rotation == (1.0, 0.0, 0.0, 0.0)
    assert Placement3(rotation=(0, -1, 0, 0)).rotation == (0.0, 1.0, 0.0, 0.0)


def test_snap_is_exact_and_idempotent():
    from patternlm.pattern import COORD_GRID, snap

    for v in (0.1, -3.7, 1 / 3, 123.456789, -0.0):
        s = snap(v)
        assert abs(s - v) <= COORD_GRID / 2
        assert snap(s) == s and (s / COORD_GRID).is_integer()
    assert math.copysign(1.0, snap(-1e-12)) == 1.0


def test_near_unit_quaternion_kept_as_given():
    q = (0.6, 0.8 + 1e-12, 0.0, 0.0)
    assert Placement3(rotation=q).rotation == q


def test_generated_patterns_on_grid(samples):
    from patternlm.pattern import COORD_GRID, QUAT_GRID, control_points

    for s in samples[:50]:
        for p in s.pattern.panels:
            pts = list(p.vertices) + [c for e in p.edges for c in control_points(e)]
            assert all((c / COORD_GRID).is_integer() for q in pts for c in q)
            assert all((c / QUAT_GRID).is_integer() for c in p.placement.rotation)


def test_generated_patterns_are_valid(samples):
    for s in samples:
        assert validate(s.pattern) == []


def test_origin_violation_names_panel(samples):
    pat = samples[0].pattern
    p0 = pat.panels[0]
    moved = Panel(p0.name, (P(1, 0),) + p0.vertices[1:], p0.edges, p0.placement)
    report = validate(SewingPattern((moved,) + pat.panels[1:], pat.stitches))
    assert len(report) == 1 and report[0].panel == 0


def test_edge_in_two_stitches_names_both():
    sq = Panel("sq", (P(0, 0), P(1, 0), P(1, 1), P(0, 1)), tuple(Edge() for _ in range(4)))
    pat = SewingPattern((sq,), (Stitch((0, 0), (0, 2)), Stitch((0, 0), (0, 1))))
    report = validate(pat)
    assert len(report) == 1
    assert len(report[0].stitches) == 2


def test_empty_panel_list_is_a_parse_error():
    with pytest.raises(PatternParseError, match="at least one panel required"):
        loads_pattern(json.dumps({"panels": [], "stitches": []}))


def test_non_unit_quaternion_in_file_is_normalized(samples):
    data = json.loads(dumps_pattern(samples[0].pattern))
    data["panels"][0]["rotation"] = [1, 1, 0, 0]
    pat = loads_pattern(json.dumps(data))
    assert pat.panels[0].placement.rotation[:2] == pytest.approx((math.sqrt(0.5),) * 2)


def test_write_read_roundtrip_and_determinism(samples, tmp_path):
    for i, s in enumerate(samples[:50]):
        path = tmp_path / f"{i}.json"
        write_pattern(s.pattern, path)
        first = path.read_bytes()
        assert read_pattern(path) == s.pattern
        write_pattern(read_pattern(path), path)
        assert path.read_bytes() == first


def test_loop_closure(samples):
    for s in samples[:50]:
        for panel in s.pattern.panels:
            n = len(panel.edges)
            for k in range(n):
                a, b = panel.edge_endpoints(k)
                start, end = evaluate_edge(panel, k, 0.0), evaluate_edge(panel, k, 1.0)
                tol = 1e-9 if isinstance(panel.edges[k].geometry, Arc) else 0.0
                assert start.dist(a) <= tol and end.dist(b) <= tol


def test_arc_samples_equidistant(samples):
    for s in samples[:100]:
        for panel in s.pattern.panels:
            for k, e in enumerate(panel.edges):
                if not isinstance(e.geometry, Arc):
                    continue
                a, b = panel.edge_endpoints(k)
                cx, cy, r, _, _ = arc_parameters(a, e.geometry.mid, b)
                for i in range(33):
                    p = evaluate_edge(panel, k, i / 32)
                    assert abs(math.hypot(p.x - cx, p.y - cy) - r) < 1e-9


coords = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(coords, coords, coords, coords, st.floats(0.05, 0.95))
def test_arc_through_mid_property(mx, my, ex, ey, t):
    a, m, b = P(0, 0), P(mx, my), P(ex, ey)
    cross = mx * ey - my * ex
    longest = max(a.dist(m), m.dist(b), a.dist(b))
    if longest < 1.0 or abs(cross) / longest < 1.0:
        return
    panel = Panel("q", (a, b), (Edge(Arc(m)), Edge(Line())))
    cx, cy, r, _, _ = arc_parameters(a, m, b)
    p = evaluate_edge(panel, 0, t)
    assert abs(math.hypot(p.x - cx, p.y - cy) - r) < 1e-9 * max(1.0, r)


def test_max_abs_difference_structure_mismatch(samples):
    a, b = samples[0].pattern, samples[1].pattern
    assert max_abs_difference(a, a) == 0.0
    if len(a.panels) != len(b.panels):
        assert max_abs_difference(a, b) == math.inf
