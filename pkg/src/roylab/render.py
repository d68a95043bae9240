"""CSV and SVG emission for portraits and basin maps.

SVG output is deterministic: fixed float formatting, no timestamps, and
element order follows the data. Stable equilibria render as red circles and
every other rest point as black, with the two nullcline families in blue.
"""

from __future__ import annotations

import io

import numpy as np

from .dynamics import BasinMap, PhasePortrait

__all__ = ["portrait_csv", "portrait_svg", "basins_csv", "basins_svg"]

_SIZE = 640
_MARGIN = 50

_STABLE_LABELS = ("stable", "boundary-stable")

# color cycle for basin cells; index modulo length
_BASIN_COLORS = (
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5",
    "#c49c94", "#f7b6d2", "#dbdb8d", "#9edae5", "#d9d9d9",
)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _px(v: float) -> float:
    return _MARGIN + v * (_SIZE - 2 * _MARGIN)


def _py(v: float) -> float:
    # math orientation: larger second coordinate is higher on the page
    return _SIZE - _MARGIN - v * (_SIZE - 2 * _MARGIN)


def portrait_csv(portrait: PhasePortrait) -> str:
    out = io.StringIO()
    out.write("r_w,r_m,v_w,v_m\n")
    n = portrait.axis.size
    for i in range(n):
        for j in range(n):
            out.write(
                f"{_fmt(portrait.axis[i])},{_fmt(portrait.axis[j])},"
                f"{_fmt(portrait.velocity[i, j, 0])},{_fmt(portrait.velocity[i, j, 1])}\n"
            )
    return out.getvalue()


def _svg_header(out):
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{_SIZE}" '
        f'viewBox="0 0 {_SIZE} {_SIZE}">\n'
    )
    out.write(f'<rect x="0" y="0" width="{_SIZE}" height="{_SIZE}" fill="white"/>\n')
    out.write(
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_SIZE - 2 * _MARGIN}" '
        f'height="{_SIZE - 2 * _MARGIN}" fill="none" stroke="#333" stroke-width="1"/>\n'
    )


def _svg_equilibria(out, equilibria):
    for eq in equilibria:
        color = "#d62728" if eq.stability in _STABLE_LABELS else "#000000"
        out.write(
            f'<circle cx="{_px(eq.comp.r_w):.3f}" cy="{_py(eq.comp.r_m):.3f}" r="6" '
            f'fill="{color}" stroke="white" stroke-width="1"/>\n'
        )


def portrait_svg(portrait: PhasePortrait) -> str:
    """Vector-field arrows, both nullclines, and color-coded equilibria."""
    out = io.StringIO()
    _svg_header(out)

    # arrows: direction-normalized, one per grid node
    n = portrait.axis.size
    step_px = (_SIZE - 2 * _MARGIN) / max(n - 1, 1)
    arrow = 0.38 * step_px
    for i in range(n):
        for j in range(n):
            vx, vy = portrait.velocity[i, j]
            speed = float(np.hypot(vx, vy))
            if not np.isfinite(speed) or speed < 1e-14:
                continue
            ux, uy = vx / speed, vy / speed
            x0, y0 = _px(portrait.axis[i]), _py(portrait.axis[j])
            x1, y1 = x0 + ux * arrow, y0 - uy * arrow
            # small two-stroke head
            hx, hy = -ux * 0.35 * arrow, uy * 0.35 * arrow
            px, py = -uy * 0.2 * arrow, -ux * 0.2 * arrow
            out.write(
                f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" '
                f'stroke="#777" stroke-width="0.8"/>\n'
            )
            out.write(
                f'<path d="M {x1 + hx + px:.2f} {y1 + hy + py:.2f} L {x1:.2f} {y1:.2f} '
                f'L {x1 + hx - px:.2f} {y1 + hy - py:.2f}" fill="none" '
                f'stroke="#777" stroke-width="0.8"/>\n'
            )

    for polys, color in ((portrait.nullcline_w, "#1f77b4"), (portrait.nullcline_m, "#17becf")):
        for poly in polys:
            pts = " ".join(f"{_px(p[0]):.2f},{_py(p[1]):.2f}" for p in poly)
            out.write(
                f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>\n'
            )

    _svg_equilibria(out, portrait.equilibria)
    out.write("</svg>\n")
    return out.getvalue()


def basins_csv(basin_map: BasinMap) -> str:
    out = io.StringIO()
    out.write("r_w,r_m,basin_id\n")
    centers = basin_map.cell_centers()
    n = basin_map.resolution
    for i in range(n):
        for j in range(n):
            out.write(
                f"{_fmt(centers[i])},{_fmt(centers[j])},{int(basin_map.labels[i, j])}\n"
            )
    return out.getvalue()


def basins_svg(basin_map: BasinMap) -> str:
    """Basin cells colored by attractor index, with the equilibria overlaid."""
    out = io.StringIO()
    _svg_header(out)
    n = basin_map.resolution
    cell = (_SIZE - 2 * _MARGIN) / n
    for i in range(n):
        for j in range(n):
            lab = int(basin_map.labels[i, j])
            color = "#ffffff" if lab < 0 else _BASIN_COLORS[lab % len(_BASIN_COLORS)]
            x = _MARGIN + i * cell
            y = _SIZE - _MARGIN - (j + 1) * cell
            out.write(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{cell:.2f}" height="{cell:.2f}" '
                f'fill="{color}"/>\n'
            )
    out.write(
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_SIZE - 2 * _MARGIN}" '
        f'height="{_SIZE - 2 * _MARGIN}" fill="none" stroke="#333" stroke-width="1"/>\n'
    )
    _svg_equilibria(out, basin_map.equilibria)
    out.write("</svg>\n")
    return out.getvalue()
