"""SVG drawings of pattern panels."""

from __future__ import annotations

import colorsys
from xml.sax.saxutils import escape

from patternlm.codec import assign_stitch_tags
from patternlm.pattern import Point2, SewingPattern, evaluate_edge, sample_panel_outline

SAMPLES_PER_EDGE = 32
MARGIN = 10.0  # cm between grid cells


def stitch_colour(k: int) -> str:
    r, g, b = colorsys.hsv_to_rgb((k * 0.618033988749895) % 1.0, 0.85, 0.8)
    return f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}"


def _bbox(points: list[Point2]) -> tuple[float, float, float, float]:
    xs = [p.x for p in points]
    ys = [p.y for p in points]
    return min(xs), min(ys), max(xs), max(ys)


def render_svg(pattern: SewingPattern, per_edge: int = SAMPLES_PER_EDGE) -> str:
    """One grid cell per panel; stitched edges share a stroke colour and a tag label."""
    outlines = [sample_panel_outline(p, per_edge) for p in pattern.panels]
    boxes = [_bbox(o) for o in outlines]
    cell_w = max(b[2] - b[0] for b in boxes) + MARGIN
    cell_h = max(b[3] - b[1] for b in boxes) + MARGIN
    cols = max(1, int(len(outlines) ** 0.5 + 0.999))
    rows = (len(outlines) + cols - 1) // cols

    offsets = []
    for i, (x0, y0, _, y1) in enumerate(boxes):
        r, c = divmod(i, cols)
        # SVG y grows downwards; flip each panel inside its cell
        offsets.append((MARGIN / 2 + c * cell_w - x0, MARGIN / 2 + r * cell_h + y1))

    def xy(i: int, p: Point2) -> str:
        ox, oy = offsets[i]
        return f"{p.x + ox:.3f},{oy - p.y:.3f}"

    width, height = cols * cell_w, rows * cell_h
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1f}cm" height="{height:.1f}cm" '
        f'viewBox="0 0 {width:.3f} {height:.3f}">',
        '<g fill="none" stroke-linejoin="round">',
    ]
    for i, (panel, outline) in enumerate(zip(pattern.panels, outlines)):
        d = "M " + " L ".join(xy(i, p) for p in outline) + " Z"
        out.append(f'<path class="panel" data-name="{escape(panel.name)}" stroke="#333333" stroke-width="0.4" d="{d}"/>')
        ox, oy = offsets[i]
        out.append(f'<text x="{ox:.3f}" y="{oy + 3:.3f}" font-size="3" fill="#333333" stroke="none">{escape(panel.name)}</text>')

    tags = assign_stitch_tags(pattern, max_tags=max(1, len(pattern.stitches)))
    for k, s in enumerate(pattern.stitches):
        colour = stitch_colour(k)
        label = f"t{tags[s.first]}"
        for pi, ei in (s.first, s.second):
            panel = pattern.panels[pi]
            pts = [evaluate_edge(panel, ei, j / per_edge) for j in range(per_edge + 1)]
            d = "M " + " L ".join(xy(pi, p) for p in pts)
            out.append(f'<path class="stitch" data-tag="{label}" stroke="{colour}" stroke-width="1.2" d="{d}"/>')
            mid = pts[per_edge // 2]
            x, y = xy(pi, mid).split(",")
            out.append(f'<text class="tag" x="{x}" y="{y}" font-size="3" fill="{colour}" stroke="none">{label}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
