"""Deterministic graph drawings: DOT text and standalone SVG.

Vertices and edges are emitted in sorted order and all numbers use
fixed precision, so rendering the same graph twice is byte-identical.
Edge pen widths scale with the rank of the edge strength among the
distinct strengths of the graph; vertex radii scale with weight rank.
"""

import math
from xml.sax.saxutils import escape

from .graphs import ConceptGraph


def _rank_scale(values, low: float, high: float) -> dict:
    """Map each distinct value to a size on [low, high] by rank."""
    distinct = sorted(set(values))
    if not distinct:
        return {}
    if len(distinct) == 1:
        return {distinct[0]: (low + high) / 2.0}
    step = (high - low) / (len(distinct) - 1)
    return {v: low + i * step for i, v in enumerate(distinct)}


def _dot_quote(label: str) -> str:
    return '"%s"' % label.replace("\\", "\\\\").replace('"', '\\"')


def render_graph_dot(graph: ConceptGraph) -> str:
    """Undirected DOT drawing with penwidth scaled by strength rank."""
    widths = _rank_scale(graph.edges.values(), 1.0, 3.0)
    lines = [
        "graph concept_map {",
        "  graph [overlap=false, splines=true];",
        '  node [shape=ellipse, style=filled, fillcolor="#e8eef7", fontname="Helvetica"];',
    ]
    for label in sorted(graph.vertices):
        lines.append("  %s;" % _dot_quote(label))
    for (a, b), strength in sorted(graph.edges.items()):
        lines.append(
            "  %s -- %s [penwidth=%.2f];"
            % (_dot_quote(a), _dot_quote(b), widths[strength])
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


SVG_SIZE = 560


def render_graph_svg(graph: ConceptGraph, size: int = SVG_SIZE) -> str:
    """Standalone SVG: vertices on a circle in label order, straight edges."""
    labels = sorted(graph.vertices)
    center = size / 2.0
    ring = size / 2.0 - 80.0
    positions = {}
    for i, label in enumerate(labels):
        if len(labels) == 1:
            positions[label] = (center, center)
            break
        angle = 2.0 * math.pi * i / len(labels) - math.pi / 2.0
        positions[label] = (
            center + ring * math.cos(angle),
            center + ring * math.sin(angle),
        )
    radii = _rank_scale(graph.vertices.values(), 10.0, 22.0)
    widths = _rank_scale(graph.edges.values(), 1.0, 4.0)

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 %d %d" '
        'width="%d" height="%d" role="img">' % (size, size, size, size)
    ]
    for (a, b), strength in sorted(graph.edges.items()):
        xa, ya = positions[a]
        xb, yb = positions[b]
        parts.append(
            '<line x1="%.1f" y1="%.1f" x2="%.1f" y2="%.1f" '
            'stroke="#7a8ba6" stroke-width="%.1f"/>'
            % (xa, ya, xb, yb, widths[strength])
        )
    for label in labels:
        x, y = positions[label]
        parts.append(
            '<circle cx="%.1f" cy="%.1f" r="%.1f" fill="#e8eef7" stroke="#3b5577"/>'
            % (x, y, radii[graph.vertices[label]])
        )
        parts.append(
            '<text x="%.1f" y="%.1f" text-anchor="middle" dominant-baseline="middle" '
            'font-family="Helvetica, Arial, sans-serif" font-size="12" fill="#1c2b3a">%s</text>'
            % (x, y, escape(label))
        )
    parts.append("</svg>")
    return "".join(parts)
