"""Image-plane rendering of derived correspondence sets.

SVG output is plain deterministic text (fixed decimal formatting, fixed
element order) so two identical runs produce identical bytes; PNG uses
Pillow and is meant for eyeballing, not diffing.
"""

from __future__ import annotations

import io

import numpy as np

from .conics import Conic, geom_from_conic
from .correspond import CorrespondenceSet
from .errors import NotAnEllipse, PointAtInfinity
from .projective import HomLine2

POINT_COLORS = (
    ("g_", "#1f9d2f"),
    ("s", "#d02828"),
    ("a", "#e07818"),
    ("b", "#e07818"),
    ("d", "#7a3bc8"),
    ("e", "#7a3bc8"),
)

LINE_COLORS = (
    ("diag_", "#1f9d2f", "4 3"),
    ("t_", "#9a9a9a", "4 3"),
    ("l1", "#d02828", None),
    ("l2", "#e07818", None),
    ("l3", "#7a3bc8", None),
)

VANISHING_COLOR = "#2255cc"


def _point_color(name: str) -> str:
    for prefix, color in POINT_COLORS:
        if name == prefix or name.startswith(prefix):
            return color
    return "#444444"


def _line_style(name: str) -> tuple[str, str | None]:
    for prefix, color, dash in LINE_COLORS:
        if name == prefix or name.startswith(prefix):
            return color, dash
    return "#444444", None


def clip_line_to_rect(line: HomLine2, width: float, height: float):
    """Segment of an infinite line inside [0,w]x[0,h], or None."""
    a, b, c = line.coeffs
    hits = []
    if abs(b) > 1e-12:
        for x in (0.0, width):
            y = -(c + a * x) / b
            if -1e-9 <= y <= height + 1e-9:
                hits.append((x, min(max(y, 0.0), height)))
    if abs(a) > 1e-12:
        for y in (0.0, height):
            x = -(c + b * y) / a
            if -1e-9 <= x <= width + 1e-9:
                hits.append((min(max(x, 0.0), width), y))
    uniq: list[tuple[float, float]] = []
    for p in hits:
        if all(abs(p[0] - q[0]) > 1e-6 or abs(p[1] - q[1]) > 1e-6 for q in uniq):
            uniq.append(p)
    if len(uniq) < 2:
        return None
    d = np.array([b, -a])
    ts = [float(np.array(p) @ d) for p in uniq]
    lo, hi = int(np.argmin(ts)), int(np.argmax(ts))
    return uniq[lo], uniq[hi]


def _ellipse_polyline(conic: Conic, n: int = 128) -> np.ndarray | None:
    try:
        return geom_from_conic(conic).boundary_points(n)
    except NotAnEllipse:
        return None


def render_svg(
    corr: CorrespondenceSet,
    ellipse: Conic | None = None,
    image_size: tuple[int, int] = (1920, 1080),
    path: str | None = None,
) -> str:
    w, h = image_size
    out = io.StringIO()
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" '
        f'width="{w}" height="{h}">\n'
    )
    out.write(f'  <rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>\n')

    if ellipse is not None:
        pts = _ellipse_polyline(ellipse)
        if pts is not None:
            coords = " ".join(f"{x:.3f},{y:.3f}" for x, y in np.vstack([pts, pts[:1]]))
            out.write(f'  <polyline points="{coords}" fill="none" stroke="#222222" stroke-width="2"/>\n')

    seg = clip_line_to_rect(corr.vanishing_line, w, h)
    if seg is not None:
        (x0, y0), (x1, y1) = seg
        out.write(
            f'  <line x1="{x0:.3f}" y1="{y0:.3f}" x2="{x1:.3f}" y2="{y1:.3f}" '
            f'stroke="{VANISHING_COLOR}" stroke-width="1.5" stroke-dasharray="8 5"/>\n'
        )

    for pair in corr.line_pairs:
        seg = clip_line_to_rect(pair.image, w, h)
        if seg is None:
            continue
        color, dash = _line_style(pair.name)
        (x0, y0), (x1, y1) = seg
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.write(
            f'  <line x1="{x0:.3f}" y1="{y0:.3f}" x2="{x1:.3f}" y2="{y1:.3f}" '
            f'stroke="{color}" stroke-width="1.5"{dash_attr}/>\n'
        )

    for pair in corr.point_pairs:
        try:
            x, y = pair.image.dehomogenized()
        except PointAtInfinity:
            continue
        color = _point_color(pair.name)
        out.write(f'  <circle cx="{x:.3f}" cy="{y:.3f}" r="5" fill="{color}"/>\n')
        out.write(
            f'  <text x="{x + 8:.3f}" y="{y - 8:.3f}" font-size="20" '
            f'font-family="monospace" fill="{color}">{pair.name}</text>\n'
        )

    out.write("</svg>\n")
    text = out.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def render_png(
    corr: CorrespondenceSet,
    ellipse: Conic | None = None,
    image_size: tuple[int, int] = (1920, 1080),
    path: str | None = None,
):
    from PIL import Image, ImageDraw

    w, h = image_size
    img = Image.new("RGB", (w, h), "#ffffff")
    draw = ImageDraw.Draw(img)

    if ellipse is not None:
        pts = _ellipse_polyline(ellipse)
        if pts is not None:
            closed = [tuple(p) for p in np.vstack([pts, pts[:1]])]
            draw.line(closed, fill="#222222", width=2)

    seg = clip_line_to_rect(corr.vanishing_line, w, h)
    if seg is not None:
        draw.line([seg[0], seg[1]], fill=VANISHING_COLOR, width=2)

    for pair in corr.line_pairs:
        seg = clip_line_to_rect(pair.image, w, h)
        if seg is None:
            continue
        color, _ = _line_style(pair.name)
        draw.line([seg[0], seg[1]], fill=color, width=2)

    for pair in corr.point_pairs:
        try:
            x, y = pair.image.dehomogenized()
        except PointAtInfinity:
            continue
        color = _point_color(pair.name)
        draw.ellipse([x - 5, y - 5, x + 5, y + 5], fill=color)
        draw.text((x + 8, y - 16), pair.name, fill=color)

    if path is not None:
        img.save(path)
    return img
