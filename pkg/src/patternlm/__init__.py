"""Sewing-pattern tokenization, mixed-objective training and evaluation workbench."""

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
    evaluate_edge,
    read_pattern,
    validate,
    write_pattern,
)

__all__ = [
    "Arc",
    "CubicBezier",
    "Edge",
    "Line",
    "Panel",
    "Placement3",
    "Point2",
    "QuadBezier",
    "SewingPattern",
    "Stitch",
    "evaluate_edge",
    "read_pattern",
    "validate",
    "write_pattern",
]
