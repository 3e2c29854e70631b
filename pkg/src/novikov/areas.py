"""Stability-zone areas on the sphere from a labelled direction grid.

Grid point (m, n) stands for the direction (m/N, n/N, 1).  Its cell is the
square of side 1/N around it in the plane z = 1, clipped to the fundamental
triangle 0 <= x <= y <= 1; cells on the triangle edges are therefore cut in
half (or smaller at corners), matching the 48-fold symmetry decomposition.
The default ("sphere") normalization divides solid angles by that of the
whole triangle, which is 1/48 of the sphere, so areas are also fractions of
the full sphere.  The "chart" normalization uses the flat area of the cells
in the (m/N, n/N) plane instead, i.e. it weights grid cells uniformly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .homology import ZoneLabel
from .scanner import ScanResult

TRIANGLE = ((0.0, 0.0), (0.0, 1.0), (1.0, 1.0))
TRIANGLE_SOLID_ANGLE = 4.0 * math.pi / 48.0
NORMALIZATIONS = ("sphere", "chart")


def _clip(poly, a, b):
    """Sutherland-Hodgman: keep the part of ``poly`` left of the directed line a -> b."""
    def side(p):
        return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])

    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        sp, sq = side(p), side(q)
        if sp >= 0:
            out.append(p)
        if (sp >= 0) != (sq >= 0):
            t = sp / (sp - sq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def clip_to_triangle(poly):
    tri = TRIANGLE
    if _signed_area(tri) < 0:
        tri = tri[::-1]
    for i in range(3):
        poly = _clip(poly, tri[i], tri[(i + 1) % 3])
        if not poly:
            return []
    return poly


def _signed_area(poly):
    return 0.5 * sum(poly[i][0] * poly[(i + 1) % len(poly)][1] - poly[(i + 1) % len(poly)][0] * poly[i][1]
                     for i in range(len(poly)))


def triangle_solid_angle(a, b, c) -> float:
    """Solid angle of the cone over a spherical triangle (Van Oosterom and Strackee)."""
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    la, lb, lc = np.linalg.norm(a), np.linalg.norm(b), np.linalg.norm(c)
    num = abs(a @ np.cross(b, c))
    den = la * lb * lc + (a @ b) * lc + (a @ c) * lb + (b @ c) * la
    return 2.0 * math.atan2(num, den)


def polygon_solid_angle(poly) -> float:
    """Solid angle subtended at the origin by a convex polygon in the plane z = 1."""
    if len(poly) < 3:
        return 0.0
    pts = [(x, y, 1.0) for x, y in poly]
    return sum(triangle_solid_angle(pts[0], pts[i], pts[i + 1]) for i in range(1, len(pts) - 1))


@lru_cache(maxsize=None)
def cell_polygon(m: int, n: int, N: int):
    h = 0.5 / N
    x, y = m / N, n / N
    square = [(x - h, y - h), (x + h, y - h), (x + h, y + h), (x - h, y + h)]
    return tuple(clip_to_triangle(square))


def cell_solid_angle(m: int, n: int, N: int) -> float:
    return polygon_solid_angle(cell_polygon(m, n, N))


def cell_solid_angles(N: int) -> dict[tuple[int, int], float]:
    return {(m, n): cell_solid_angle(m, n, N) for m in range(N + 1) for n in range(m, N + 1)}


def cell_weights(N: int, normalization: str = "sphere") -> dict[tuple[int, int], float]:
    """Each cell's share of the fundamental triangle under the chosen normalization."""
    if normalization == "sphere":
        return {k: v / TRIANGLE_SOLID_ANGLE for k, v in cell_solid_angles(N).items()}
    if normalization == "chart":
        return {(m, n): abs(_signed_area(cell_polygon(m, n, N))) / 0.5
                for m in range(N + 1) for n in range(m, N + 1)}
    raise ValueError(f"unknown normalization {normalization!r}; expected one of {NORMALIZATIONS}")


@dataclass(frozen=True)
class AreaRow:
    label: ZoneLabel
    area: float
    error: float


@dataclass
class AreaTable:
    rows: list[AreaRow]
    residual_area: float
    normalization: str = "sphere"

    def area(self, label) -> float:
        label = _as_label(label)
        return next((r.area for r in self.rows if r.label == label), 0.0)

    def error(self, label) -> float:
        label = _as_label(label)
        return next((r.error for r in self.rows if r.label == label), 0.0)

    def total(self) -> float:
        return math.fsum([r.area for r in self.rows] + [self.residual_area])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "area", "error"])
        for r in self.rows:
            w.writerow([str(r.label), repr(r.area), repr(r.error)])
        return buf.getvalue()


def _as_label(label) -> ZoneLabel:
    if isinstance(label, ZoneLabel):
        return label
    if label in ("null", None):
        return ZoneLabel.null()
    return ZoneLabel.zone(label)


def zone_areas(s: ScanResult, normalization: str = "sphere") -> AreaTable:
    """Area of every label as a fraction of the triangle (sphere), with boundary-cell error bars.

    The error of a label is the total weight of its cells that touch a cell
    with a different label, Unresolved included.
    """
    labels = s.labels()
    weight = cell_weights(s.N, normalization)
    area: dict[ZoneLabel, list[float]] = {}
    err: dict[ZoneLabel, list[float]] = {}
    residual = []
    for (m, n), lab in labels.items():
        w = weight[(m, n)]
        if lab.is_unresolved:
            residual.append(w)
            continue
        area.setdefault(lab, []).append(w)
        boundary = False
        for dm, dn in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            other = labels.get((m + dm, n + dn))
            if other is not None and other != lab:
                boundary = True
                break
        if boundary:
            err.setdefault(lab, []).append(w)
    rows = [AreaRow(lab, math.fsum(ws), math.fsum(err.get(lab, []))) for lab, ws in area.items()]
    rows.sort(key=lambda r: (-r.area, str(r.label)))
    return AreaTable(rows, math.fsum(residual), normalization)
