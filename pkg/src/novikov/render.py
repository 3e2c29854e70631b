"""Static zone maps of a scan: SVG 1.1 with a legend, and binary PPM (P6).

The chart triangle 0 <= m <= n <= N is drawn with n/N to the right and m/N
upwards, so (0,0,1) sits at the bottom-left corner and (1,1,1) top-right.
Colours depend only on the canonical label (and a palette seed), never on
area rank, so maps at different N are directly comparable.
"""

from __future__ import annotations

import colorsys
import hashlib
from xml.sax.saxutils import escape

import numpy as np

from .areas import cell_polygon, zone_areas
from .homology import ZoneLabel
from .scanner import ScanResult

NULL_COLOR = (255, 255, 255)
UNRESOLVED_COLOR = (0, 0, 0)
BACKGROUND = (224, 224, 224)


def label_color(label: ZoneLabel, seed: int = 0) -> tuple[int, int, int]:
    if label.is_null:
        return NULL_COLOR
    if label.is_unresolved:
        return UNRESOLVED_COLOR
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    hue = int.from_bytes(digest[:4], "big") / 2 ** 32
    # keep zones away from both white (Null) and black (Unresolved)
    sat = 0.45 + 0.5 * digest[4] / 255
    val = 0.55 + 0.4 * digest[5] / 255
    r, g, b = colorsys.hsv_to_rgb(hue, sat, val)
    return round(r * 255), round(g * 255), round(b * 255)


def _hex(c) -> str:
    return "#%02x%02x%02x" % c


def render_svg(s: ScanResult, seed: int = 0, size: float = 800.0, legend: int = 20) -> str:
    pad = 20.0
    legend_w = 220.0 if legend else 0.0
    width, height = size + 2 * pad + legend_w, size + 2 * pad

    def xy(px, py):
        # px = m/N, py = n/N in chart coordinates
        return pad + py * size, pad + (1.0 - px) * size

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:g}" height="{height:g}" '
        f'viewBox="0 0 {width:g} {height:g}">',
        f'<rect x="0" y="0" width="{width:g}" height="{height:g}" fill="{_hex(BACKGROUND)}"/>',
        '<g id="cells" stroke="none">',
    ]
    labels = s.labels()
    for (m, n), lab in labels.items():
        poly = cell_polygon(m, n, s.N)
        if len(poly) < 3:
            continue
        pts = " ".join("%.3f,%.3f" % xy(px, py) for px, py in poly)
        out.append(f'<polygon class="cell" points="{pts}" fill="{_hex(label_color(lab, seed))}">'
                   f'<title>{m},{n}: {escape(str(lab))}</title></polygon>')
    out.append("</g>")
    corners = " ".join("%.3f,%.3f" % xy(px, py) for px, py in ((0, 0), (0, 1), (1, 1)))
    out.append(f'<polygon points="{corners}" fill="none" stroke="#000000" stroke-width="1"/>')

    if legend:
        table = zone_areas(s)
        rows = [r for r in table.rows if r.label.is_zone][:legend]
        x0 = size + 2 * pad
        out.append(f'<g id="legend" font-family="sans-serif" font-size="12">')
        out.append(f'<text x="{x0:g}" y="{pad + 10:g}">zone  area (N={s.N})</text>')
        for i, r in enumerate(rows):
            y = pad + 24 + 18 * i
            out.append(f'<rect class="legend-entry" x="{x0:g}" y="{y:g}" width="12" height="12" '
                       f'fill="{_hex(label_color(r.label, seed))}" stroke="#000000" stroke-width="0.5"/>')
            out.append(f'<text x="{x0 + 18:g}" y="{y + 10:g}">({escape(str(r.label))})  {r.area:.4f}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_ppm(s: ScanResult, seed: int = 0, size: int = 512) -> bytes:
    """P6 image; each pixel takes the colour of the nearest grid direction."""
    labels = s.labels()
    palette = {lab: label_color(lab, seed) for lab in set(labels.values())}
    grid = np.empty((s.N + 1, s.N + 1, 3), dtype=np.uint8)
    grid[:] = BACKGROUND
    for (m, n), lab in labels.items():
        grid[m, n] = palette[lab]
    c = (np.arange(size) + 0.5) / size
    n_idx = np.clip(np.floor(c * (s.N + 1)).astype(int), 0, s.N)
    m_idx = n_idx[::-1]  # image rows run top to bottom, m grows upwards
    img = grid[m_idx[:, None], n_idx[None, :]]
    img[m_idx[:, None] > n_idx[None, :]] = BACKGROUND
    return f"P6\n{size} {size}\n255\n".encode() + img.tobytes()
