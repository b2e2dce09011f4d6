"""Deterministic SVG overlays: domain outline, measure support, curves.

Output bytes depend only on the drawn geometry (floats are formatted with a
fixed precision), so committed fixtures can be compared byte for byte.
"""

from __future__ import annotations

import numpy as np

from .geometry import ConvexPolygon, Disk, ImplicitDomain, Rectangle

_PIECE_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2")


def _fmt(v):
    return f"{v:.6f}"


def _path(points, closed=True):
    cmds = [f"M {_fmt(points[0][0])} {_fmt(points[0][1])}"]
    cmds += [f"L {_fmt(p[0])} {_fmt(p[1])}" for p in points[1:]]
    if closed:
        cmds.append("Z")
    return " ".join(cmds)


def domain_outline(domain, samples=256):
    """Closed polyline outlining the domain (marching squares for implicit)."""
    if isinstance(domain, Rectangle):
        w, h = domain.width / 2, domain.height / 2
        return [np.array([[-w, -h], [w, -h], [w, h], [-w, h]])]
    if isinstance(domain, Disk):
        t = 2 * np.pi * np.arange(samples) / samples
        return [domain.radius * np.column_stack([np.cos(t), np.sin(t)])]
    if isinstance(domain, ConvexPolygon):
        return [domain.vertices]
    if isinstance(domain, ImplicitDomain):
        return _implicit_outline(domain, samples)
    raise TypeError(f"cannot outline {type(domain)!r}")


def _implicit_outline(domain, n):
    """Open segment soup from midpoint marching squares on a membership grid."""
    (x0, x1), (y0, y1) = domain.bounding_box()
    xs = np.linspace(x0, x1, n)
    ys = np.linspace(y0, y1, n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    inside = np.asarray(domain.contains(X.ravel(), Y.ravel())).reshape(n, n)
    segments = []
    hx, hy = xs[1] - xs[0], ys[1] - ys[0]
    for i in range(n - 1):
        for j in range(n - 1):
            corners = (inside[i, j], inside[i + 1, j], inside[i + 1, j + 1], inside[i, j + 1])
            if all(corners) or not any(corners):
                continue
            # midpoint of the mixed cell marks the boundary
            cx, cy = xs[i] + hx / 2, ys[j] + hy / 2
            segments.append(np.array([[cx - hx / 2, cy], [cx + hx / 2, cy]]))
    return segments


def emit_svg(
    domain,
    measure=None,
    curve=None,
    oracle_boundary=None,
    schedule=None,
    margin=0.05,
    width_px=640,
):
    """Build the SVG document text (deterministic for fixed inputs)."""
    (x0, x1), (y0, y1) = domain.bounding_box()
    mx, my = margin * (x1 - x0), margin * (y1 - y0)
    vx, vy = x0 - mx, y0 - my
    vw, vh = (x1 - x0) + 2 * mx, (y1 - y0) + 2 * my
    height_px = int(round(width_px * vh / vw))
    stroke = max(vw, vh) / 400.0

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" height="{height_px}" '
        f'viewBox="{_fmt(vx)} {_fmt(vy)} {_fmt(vw)} {_fmt(vh)}">',
        # flip y so the plane is drawn with y upward
        f'<g transform="translate(0 {_fmt(2 * vy + vh)}) scale(1 -1)">',
    ]

    if measure is not None:
        grid = measure.system.grid
        hx, hy = grid.cell_size
        masses = measure.cell_masses()
        occupied = np.nonzero(masses > measure.support_threshold)[0]
        top = masses[occupied].max() if len(occupied) else 1.0
        parts.append('<g fill="#ff7f0e" stroke="none">')
        for i in occupied:
            cx, cy = grid.centers[i]
            opacity = masses[i] / top
            parts.append(
                f'<rect x="{_fmt(cx - hx / 2)}" y="{_fmt(cy - hy / 2)}" '
                f'width="{_fmt(hx)}" height="{_fmt(hy)}" opacity="{_fmt(opacity)}"/>'
            )
        parts.append("</g>")

    for outline in domain_outline(domain):
        closed = len(outline) > 2
        parts.append(
            f'<path d="{_path(outline, closed=closed)}" fill="none" '
            f'stroke="#000000" stroke-width="{_fmt(stroke)}"/>'
        )

    if oracle_boundary is not None:
        parts.append(
            f'<path d="{_path(oracle_boundary)}" fill="none" stroke="#d62728" '
            f'stroke-width="{_fmt(stroke)}" stroke-dasharray="{_fmt(4 * stroke)} {_fmt(4 * stroke)}"/>'
        )

    if curve is not None and hasattr(curve, "samples"):
        parts.append(
            f'<path d="{_path(curve.samples)}" fill="none" stroke="#1f77b4" '
            f'stroke-width="{_fmt(1.5 * stroke)}"/>'
        )
    elif curve is not None and hasattr(curve, "point"):
        parts.append(
            f'<circle cx="{_fmt(curve.point[0])}" cy="{_fmt(curve.point[1])}" '
            f'r="{_fmt(3 * stroke)}" fill="#1f77b4"/>'
        )

    if schedule is not None:
        for j, piece in enumerate(schedule.pieces):
            color = _PIECE_COLORS[j % len(_PIECE_COLORS)]
            if hasattr(piece, "samples"):
                parts.append(
                    f'<path d="{_path(piece.samples)}" fill="none" stroke="{color}" '
                    f'stroke-width="{_fmt(1.5 * stroke)}"/>'
                )
            else:
                parts.append(
                    f'<circle cx="{_fmt(piece.point[0])}" cy="{_fmt(piece.point[1])}" '
                    f'r="{_fmt(3 * stroke)}" fill="{color}"/>'
                )
        starts = [np.asarray(p.start, dtype=float) for p in schedule.pieces]
        for j in range(len(starts)):
            a, b = starts[j], starts[(j + 1) % len(starts)]
            if np.hypot(*(b - a)) < 1e-12:
                continue
            parts.append(
                f'<path d="{_path([a, b], closed=False)}" fill="none" stroke="#7f7f7f" '
                f'stroke-width="{_fmt(stroke)}" '
                f'stroke-dasharray="{_fmt(2 * stroke)} {_fmt(2 * stroke)}"/>'
            )

    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
