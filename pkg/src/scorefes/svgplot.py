"""Static SVG plots written directly, with no plotting dependency.

Covers what the CLI reports need: 1-D curves with an optional minimum
marker, 2-D heatmaps with marching-squares contour lines, and nothing else.
Numbers come from the CSVs; these files are only for looking at.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .errors import InvalidInput

__all__ = ["svg_line_plot", "svg_heatmap"]

_WIDTH = 640
_HEIGHT = 440
_MARGIN = {"left": 64, "right": 24, "top": 34, "bottom": 48}
_HEAT_RIGHT = 92  # extra right margin that fits the colorbar

_PALETTE = ("#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377")

# Piecewise-linear approximation of a perceptually ordered dark-to-light map.
_COLORMAP = (
    (0.0, (68, 1, 84)),
    (0.25, (59, 82, 139)),
    (0.5, (33, 145, 140)),
    (0.75, (94, 201, 98)),
    (1.0, (253, 231, 37)),
)


def _lerp_color(u: float) -> str:
    u = min(max(u, 0.0), 1.0)
    for (u0, c0), (u1, c1) in zip(_COLORMAP[:-1], _COLORMAP[1:]):
        if u <= u1:
            w = 0.0 if u1 == u0 else (u - u0) / (u1 - u0)
            r, g, b = (round(a + w * (b_ - a)) for a, b_ in zip(c0, c1))
            return f"#{r:02x}{g:02x}{b:02x}"
    return "#fde725"


def _nice_ticks(lo: float, hi: float, target: int = 5) -> np.ndarray:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise InvalidInput("axis limits must be finite")
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if step >= raw:
            break
    first = math.ceil(lo / step) * step
    ticks = np.arange(first, hi + 0.5 * step, step)
    return ticks[(ticks >= lo - 1e-9 * step) & (ticks <= hi + 1e-9 * step)]


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    text = f"{v:.3f}".rstrip("0").rstrip(".")
    return text if text not in ("-0", "") else "0"


class _Frame:
    """Maps data coordinates onto the pixel plot box and renders the axes."""

    def __init__(self, xlim, ylim, right_margin=None):
        self.x0, self.x1 = float(xlim[0]), float(xlim[1])
        self.y0, self.y1 = float(ylim[0]), float(ylim[1])
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        right = _MARGIN["right"] if right_margin is None else right_margin
        self.px0 = _MARGIN["left"]
        self.px1 = _WIDTH - right
        self.py0 = _MARGIN["top"]
        self.py1 = _HEIGHT - _MARGIN["bottom"]

    def xpix(self, x):
        return self.px0 + (np.asarray(x, dtype=float) - self.x0) / (self.x1 - self.x0) * (
            self.px1 - self.px0
        )

    def ypix(self, y):
        return self.py1 - (np.asarray(y, dtype=float) - self.y0) / (self.y1 - self.y0) * (
            self.py1 - self.py0
        )

    def axes_svg(self, title: str, xlabel: str, ylabel: str) -> list:
        parts = [
            f'<rect x="{self.px0}" y="{self.py0}" width="{self.px1 - self.px0}" '
            f'height="{self.py1 - self.py0}" fill="none" stroke="#333333"/>'
        ]
        for tx in _nice_ticks(self.x0, self.x1):
            px = float(self.xpix(tx))
            parts.append(
                f'<line x1="{px:.1f}" y1="{self.py1}" x2="{px:.1f}" y2="{self.py1 + 5}" '
                'stroke="#333333"/>'
            )
            parts.append(
                f'<text x="{px:.1f}" y="{self.py1 + 18}" text-anchor="middle" '
                f'class="tick">{_fmt(tx)}</text>'
            )
        for ty in _nice_ticks(self.y0, self.y1):
            py = float(self.ypix(ty))
            parts.append(
                f'<line x1="{self.px0 - 5}" y1="{py:.1f}" x2="{self.px0}" y2="{py:.1f}" '
                'stroke="#333333"/>'
            )
            parts.append(
                f'<text x="{self.px0 - 8}" y="{py + 4:.1f}" text-anchor="end" '
                f'class="tick">{_fmt(ty)}</text>'
            )
        cx = 0.5 * (self.px0 + self.px1)
        parts.append(
            f'<text x="{cx}" y="{_HEIGHT - 12}" text-anchor="middle" class="label">'
            f"{escape(xlabel)}</text>"
        )
        parts.append(
            f'<text x="16" y="{0.5 * (self.py0 + self.py1)}" text-anchor="middle" '
            f'class="label" transform="rotate(-90 16 {0.5 * (self.py0 + self.py1)})">'
            f"{escape(ylabel)}</text>"
        )
        parts.append(
            f'<text x="{cx}" y="22" text-anchor="middle" class="title">{escape(title)}</text>'
        )
        return parts


def _document(parts: list) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">'
        "<style>text{font-family:sans-serif;fill:#222222}"
        ".tick{font-size:11px}.label{font-size:13px}.title{font-size:15px}"
        ".legend{font-size:12px}</style>"
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="#ffffff"/>'
    )
    return head + "".join(parts) + "</svg>"


def _polyline_paths(px: np.ndarray, py: np.ndarray, ok: np.ndarray) -> str:
    """Path data with breaks wherever ok is False (NaN bins stay blank)."""
    cmds = []
    pen_up = True
    for i in range(px.size):
        if not ok[i]:
            pen_up = True
            continue
        cmds.append(f"{'M' if pen_up else 'L'}{px[i]:.2f} {py[i]:.2f}")
        pen_up = False
    return "".join(cmds)


def svg_line_plot(x, curves, title="", xlabel="", ylabel="", mark_min=False) -> str:
    """1-D curves over a shared x grid.

    curves is a sequence of (label, y) or (label, y, style) with style in
    {"solid", "dashed"}.  NaN samples break the line.  With mark_min the
    first curve's global minimum is flagged with a marker at its bin center.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InvalidInput("svg_line_plot: x must be 1-D with at least 2 points")
    if not curves:
        raise InvalidInput("svg_line_plot: need at least one curve")
    normalized = []
    for entry in curves:
        label, y = entry[0], np.asarray(entry[1], dtype=float)
        style = entry[2] if len(entry) > 2 else "solid"
        if y.shape != x.shape:
            raise InvalidInput(f"svg_line_plot: curve {label!r} does not match x")
        if style not in ("solid", "dashed"):
            raise InvalidInput(f"svg_line_plot: unknown style {style!r}")
        normalized.append((str(label), y, style))

    finite = np.concatenate([y[np.isfinite(y)] for _, y, _ in normalized])
    if finite.size == 0:
        raise InvalidInput("svg_line_plot: all curve values are NaN")
    ylo, yhi = float(finite.min()), float(finite.max())
    pad = 0.05 * (yhi - ylo or 1.0)
    frame = _Frame((x[0], x[-1]), (ylo - pad, yhi + pad))
    parts = frame.axes_svg(title, xlabel, ylabel)

    for k, (label, y, style) in enumerate(normalized):
        color = _PALETTE[k % len(_PALETTE)]
        ok = np.isfinite(y)
        dash = ' stroke-dasharray="7 4"' if style == "dashed" else ""
        path = _polyline_paths(frame.xpix(x), frame.ypix(np.where(ok, y, 0.0)), ok)
        if path:
            parts.append(
                f'<path d="{path}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>'
            )
        ly = frame.py0 + 16 + 15 * k
        parts.append(
            f'<line x1="{frame.px1 - 150}" y1="{ly - 4}" x2="{frame.px1 - 122}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="1.8"{dash}/>'
        )
        parts.append(
            f'<text x="{frame.px1 - 116}" y="{ly}" class="legend">{escape(label)}</text>'
        )

    if mark_min:
        _, y0, _ = normalized[0]
        if np.any(np.isfinite(y0)):
            i = int(np.nanargmin(y0))
            mx, my = float(frame.xpix(x[i])), float(frame.ypix(y0[i]))
            parts.append(
                f'<circle cx="{mx:.2f}" cy="{my:.2f}" r="4.5" fill="none" '
                'stroke="#000000" stroke-width="1.5"/>'
            )
            parts.append(
                f'<text x="{mx:.2f}" y="{my - 9:.2f}" text-anchor="middle" class="tick">'
                f"min @ {_fmt(float(x[i]))}</text>"
            )
    return _document(parts)


def _marching_squares(cx: np.ndarray, cy: np.ndarray, values: np.ndarray,
                      level: float) -> list:
    """Line segments of the level set on the cell-center grid.

    Standard 16-case lookup on each 2x2 block of centers, linear
    interpolation along edges; blocks touching NaN are skipped.
    """
    segs = []
    nx, ny = values.shape

    def interp(pa, pb, va, vb):
        w = 0.5 if vb == va else (level - va) / (vb - va)
        return (pa[0] + w * (pb[0] - pa[0]), pa[1] + w * (pb[1] - pa[1]))

    for i in range(nx - 1):
        for j in range(ny - 1):
            v = (values[i, j], values[i + 1, j], values[i + 1, j + 1], values[i, j + 1])
            if not all(map(math.isfinite, v)):
                continue
            corners = (
                (cx[i], cy[j]),
                (cx[i + 1], cy[j]),
                (cx[i + 1], cy[j + 1]),
                (cx[i], cy[j + 1]),
            )
            case = sum(1 << k for k in range(4) if v[k] > level)
            if case in (0, 15):
                continue
            # Edge order: bottom (0-1), right (1-2), top (2-3), left (3-0).
            pts = {}
            for e, (a, b) in enumerate(((0, 1), (1, 2), (2, 3), (3, 0))):
                if (v[a] > level) != (v[b] > level):
                    pts[e] = interp(corners[a], corners[b], v[a], v[b])
            edge_pairs = {
                1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)],
                5: [(3, 2), (0, 1)], 6: [(0, 2)], 7: [(3, 2)], 8: [(2, 3)],
                9: [(0, 2)], 10: [(0, 1), (2, 3)], 11: [(1, 2)],
                12: [(1, 3)], 13: [(0, 1)], 14: [(3, 0)],
            }[case]
            for ea, eb in edge_pairs:
                if ea in pts and eb in pts:
                    segs.append((pts[ea], pts[eb]))
    return segs


def svg_heatmap(x_edges, y_edges, values, title="", xlabel="", ylabel="",
                contour_levels=None, value_label="") -> str:
    """2-D binned field as colored cells; values[i, j] sits at x bin i, y bin j.

    NaN cells are left blank.  contour_levels draws marching-squares level
    lines through the cell centers; a colorbar maps the fill scale.
    """
    x_edges = np.asarray(x_edges, dtype=float)
    y_edges = np.asarray(y_edges, dtype=float)
    values = np.asarray(values, dtype=float)
    if x_edges.ndim != 1 or y_edges.ndim != 1 or x_edges.size < 2 or y_edges.size < 2:
        raise InvalidInput("svg_heatmap: edges must be 1-D with at least 2 entries")
    if values.shape != (x_edges.size - 1, y_edges.size - 1):
        raise InvalidInput(
            f"svg_heatmap: values shape {values.shape} does not match edges "
            f"({x_edges.size - 1}, {y_edges.size - 1})"
        )

    finite = values[np.isfinite(values)]
    vlo = float(finite.min()) if finite.size else 0.0
    vhi = float(finite.max()) if finite.size else 1.0
    if vhi == vlo:
        vhi = vlo + 1.0

    frame = _Frame((x_edges[0], x_edges[-1]), (y_edges[0], y_edges[-1]),
                   right_margin=_HEAT_RIGHT)
    parts = frame.axes_svg(title, xlabel, ylabel)

    px = frame.xpix(x_edges)
    py = frame.ypix(y_edges)
    cells = []
    for i in range(values.shape[0]):
        for j in range(values.shape[1]):
            v = values[i, j]
            if not math.isfinite(v):
                continue
            x0, x1 = px[i], px[i + 1]
            y1, y0 = py[j], py[j + 1]
            color = _lerp_color((v - vlo) / (vhi - vlo))
            cells.append(
                f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{x1 - x0 + 0.4:.2f}" '
                f'height="{y1 - y0 + 0.4:.2f}" fill="{color}"/>'
            )
    parts.extend(cells)

    if contour_levels is not None:
        cx = 0.5 * (x_edges[:-1] + x_edges[1:])
        cy = 0.5 * (y_edges[:-1] + y_edges[1:])
        for level in np.atleast_1d(np.asarray(contour_levels, dtype=float)):
            cmds = []
            for (ax, ay), (bx, by) in _marching_squares(cx, cy, values, float(level)):
                cmds.append(
                    f"M{float(frame.xpix(ax)):.2f} {float(frame.ypix(ay)):.2f}"
                    f"L{float(frame.xpix(bx)):.2f} {float(frame.ypix(by)):.2f}"
                )
            if cmds:
                parts.append(
                    f'<path d="{"".join(cmds)}" fill="none" stroke="#ffffff" '
                    'stroke-width="0.9" opacity="0.85"/>'
                )

    # Colorbar on the right margin.
    bar_x = frame.px1 + 14
    bar_w = 14
    n_band = 32
    band_h = (frame.py1 - frame.py0) / n_band
    for k in range(n_band):
        u = (k + 0.5) / n_band
        yb = frame.py1 - (k + 1) * band_h
        parts.append(
            f'<rect x="{bar_x}" y="{yb:.2f}" width="{bar_w}" height="{band_h + 0.4:.2f}" '
            f'fill="{_lerp_color(u)}"/>'
        )
    parts.append(
        f'<rect x="{bar_x}" y="{frame.py0}" width="{bar_w}" '
        f'height="{frame.py1 - frame.py0}" fill="none" stroke="#333333"/>'
    )
    parts.append(
        f'<text x="{bar_x + bar_w + 4}" y="{frame.py1 + 4}" class="tick">{_fmt(vlo)}</text>'
    )
    parts.append(
        f'<text x="{bar_x + bar_w + 4}" y="{frame.py0 + 4}" class="tick">{_fmt(vhi)}</text>'
    )
    if value_label:
        parts.append(
            f'<text x="{bar_x + bar_w / 2}" y="{frame.py0 - 8}" text-anchor="middle" '
            f'class="tick">{escape(value_label)}</text>'
        )
    return _document(parts)
