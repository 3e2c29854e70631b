"""Minkowski-dimension estimates for the set of unlabelled directions.

Two estimators are provided: plain box counting on a fixed dyadic-style grid,
and the "sausage" method, which measures the area of the union of r-disks
around the points and reads the dimension off 2 - d log A / d log r.
Points live in the (m/N, n/N) chart, i.e. inside the unit square.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .errors import DegenerateInput
from .scanner import ScanResult

BOX = "BoxCount"
SAUSAGE = "Sausage"


@dataclass
class BoxCountReport:
    method: str
    scales: list[float]
    counts_or_measures: list[float]
    dimension: float
    fit_stderr: float
    fit_range: tuple[int, int]  # inclusive indices into scales

    def to_text(self) -> str:
        i, j = self.fit_range
        lines = [
            f"method: {self.method}",
            f"scales: {len(self.scales)} ({self.scales[0]:.6g} .. {self.scales[-1]:.6g})",
            f"fit range: [{i}, {j}] ({self.scales[i]:.6g} .. {self.scales[j]:.6g})",
            f"dimension: {self.dimension:.4f}",
            f"fit stderr: {self.fit_stderr:.4f}",
        ]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scale", "count_or_measure"])
        for s, c in zip(self.scales, self.counts_or_measures):
            w.writerow([repr(float(s)), repr(float(c))])
        return buf.getvalue()


def extract_ergodic_set(s: ScanResult, null_boundary: bool = False) -> np.ndarray:
    """Chart coordinates (m/N, n/N) of the Unresolved records.

    With ``null_boundary`` the Null cells that touch a non-Null cell are
    added as well.
    """
    labels = s.labels()
    pts = []
    for (m, n), lab in labels.items():
        keep = lab.is_unresolved
        if not keep and null_boundary and lab.is_null:
            keep = any(
                (o := labels.get((m + dm, n + dn))) is not None and not o.is_null
                for dm, dn in ((1, 0), (-1, 0), (0, 1), (0, -1))
            )
        if keep:
            pts.append((m / s.N, n / s.N))
    return np.asarray(pts, dtype=float).reshape(-1, 2)


def _prepare(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise DegenerateInput(f"expected an (k, 2) point array, got shape {p.shape}")
    p = np.unique(p, axis=0)
    if len(p) < 2:
        raise DegenerateInput(f"need at least 2 distinct points, got {len(p)}")
    return p


def point_spacing(points) -> float:
    """Median nearest-neighbour distance, a proxy for the sampling resolution."""
    p = _prepare(points)
    d, _ = cKDTree(p).query(p, k=2)
    return float(np.median(d[:, 1]))


def default_scales(spacing: float, domain: float = 1.0, per_octave: int = 2) -> list[float]:
    """Geometric scales from domain/2 down to the sampling spacing."""
    if not spacing > 0:
        raise DegenerateInput("spacing must be positive")
    k = max(2, int(math.floor(per_octave * math.log2(domain / 2 / spacing))) + 1)
    return [domain / 2 * 2.0 ** (-i / per_octave) for i in range(k)]


def _check_scales(scales) -> np.ndarray:
    s = np.asarray(scales, dtype=float)
    if s.ndim != 1 or len(s) < 2:
        raise DegenerateInput("need at least 2 scales")
    if np.any(s <= 0) or np.any(np.diff(s) >= 0):
        raise DegenerateInput("scales must be positive and strictly decreasing")
    return s


def _fit_range(scales: np.ndarray, valid: np.ndarray, spacing: float, domain: float) -> tuple[int, int]:
    # between 4x the sampling spacing and a quarter of the domain, else every valid scale
    idx = np.flatnonzero(valid & (scales >= 4 * spacing * (1 - 1e-12)) & (scales <= domain / 4 * (1 + 1e-12)))
    if len(idx) < 2:
        idx = np.flatnonzero(valid)
    if len(idx) < 2:
        raise DegenerateInput("fewer than 2 scales admit nonzero counts")
    return int(idx[0]), int(idx[-1])


def _fit(x, y):
    res = stats.linregress(x, y)
    return float(res.slope), float(res.stderr)


def box_counts(points, scales) -> np.ndarray:
    """Occupied boxes of the fixed grid anchored at the origin, one count per scale."""
    p = _prepare(points)
    out = []
    for eps in _check_scales(scales):
        nbox = max(1, int(math.ceil(1.0 / eps - 1e-9)))
        # points on the far edge x = 1 belong to the last box
        ij = np.clip(np.floor(p / eps).astype(np.int64), 0, nbox - 1)
        out.append(len(np.unique(ij, axis=0)))
    return np.asarray(out, dtype=float)


def box_count_dimension(points, scales=None, spacing: float | None = None, domain: float = 1.0,
                        fit_range: tuple[int, int] | None = None) -> BoxCountReport:
    """Box-counting dimension: slope of log N(eps) against log(1/eps)."""
    p = _prepare(points)
    if spacing is None:
        spacing = point_spacing(p)
    scales = _check_scales(default_scales(spacing, domain) if scales is None else scales)
    counts = box_counts(p, scales)
    if fit_range is None:
        fit_range = _fit_range(scales, counts > 0, spacing, domain)
    i, j = fit_range
    slope, err = _fit(np.log(1.0 / scales[i:j + 1]), np.log(counts[i:j + 1]))
    return BoxCountReport(BOX, scales.tolist(), counts.tolist(), float(np.clip(slope, 0.0, 2.0)), err, (i, j))


def _in_window(x, y, window):
    if window is None or window == "square":
        return np.ones_like(x, dtype=bool)
    if window == "triangle":
        return x <= y
    raise ValueError(f"unknown window {window!r}")


def sausage_areas(points, radii, window: str | None = None, oversample: int = 4,
                  max_pixels: int = 2048) -> np.ndarray:
    """Area of the union of r-disks around the points, one value per radius.

    ``window`` None measures the whole plane; "square" and "triangle" keep
    only the part inside the unit square or the chart triangle x <= y.  The
    raster pitch is at most min(radii)/oversample (capped at ``max_pixels``
    per side) and distances from pixel centres to the points are exact.
    """
    p = _prepare(points)
    r = _check_scales(radii)
    if window is None:
        lo, hi = p.min(axis=0) - r[0], p.max(axis=0) + r[0]
    else:
        lo, hi = np.zeros(2), np.ones(2)
    extent = float(np.max(hi - lo))
    res = min(max_pixels, max(256, int(math.ceil(oversample * extent / r[-1]))))
    pitch = extent / res
    tree = cKDTree(p)
    counts = np.zeros(len(r), dtype=np.int64)
    cy = lo[1] + (np.arange(res) + 0.5) * pitch
    for row in range(0, res, 128):
        cx = lo[0] + (np.arange(row, min(res, row + 128)) + 0.5) * pitch
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        inside = _in_window(gx, gy, window) & (gx <= hi[0]) & (gy <= hi[1])
        d, _ = tree.query(np.column_stack([gx[inside], gy[inside]]), k=1,
                          distance_upper_bound=float(r[0]) * (1 + 1e-12))
        d = np.sort(d)
        counts += np.searchsorted(d, r, side="right")
    return counts * pitch ** 2


def sausage_dimension(points, radii=None, spacing: float | None = None, domain: float = 1.0,
                      window: str | None = None, fit_range: tuple[int, int] | None = None) -> BoxCountReport:
    """Minkowski-sausage dimension: 2 minus the slope of log A(r) against log r.

    A disk of radius r plays the part of a box of side 2r, so the default fit
    keeps radii between twice the sampling spacing and an eighth of the domain.
    """
    p = _prepare(points)
    if spacing is None:
        spacing = point_spacing(p)
    radii = _check_scales(default_scales(spacing / 2, domain / 2) if radii is None else radii)
    areas = sausage_areas(p, radii, window)
    if fit_range is None:
        fit_range = _fit_range(2 * radii, areas > 0, spacing, domain)
    i, j = fit_range
    slope, err = _fit(np.log(radii[i:j + 1]), np.log(areas[i:j + 1]))
    return BoxCountReport(SAUSAGE, radii.tolist(), areas.tolist(), float(np.clip(2.0 - slope, 0.0, 2.0)), err, (i, j))


def scan_dimension(s: ScanResult, method: str = "box", null_boundary: bool = False) -> BoxCountReport:
    """Dimension of the ergodic set of a scan, sampled at spacing 1/N."""
    pts = extract_ergodic_set(s, null_boundary)
    if method == "box":
        return box_count_dimension(pts, spacing=1.0 / s.N)
    if method == "sausage":
        # triangle edges are mirror lines of the direction set
        return sausage_dimension(pts, spacing=1.0 / s.N, window="triangle")
    raise ValueError(f"unknown method {method!r}; expected box or sausage")


def square_fixture(k: int = 512) -> np.ndarray:
    c = (np.arange(k) + 0.5) / k
    gx, gy = np.meshgrid(c, c, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def segment_fixture(k: int = 512) -> np.ndarray:
    c = (np.arange(k) + 0.5) / k
    return np.column_stack([c, np.full(k, 0.5)])


def cantor_dust_fixture(depth: int = 6) -> np.ndarray:
    """Product of two middle-thirds Cantor sets, one point per surviving cell centre."""
    x = np.zeros(1)
    for level in range(1, depth + 1):
        x = np.concatenate([x, x + 2.0 * 3.0 ** -level])
    x = x + 0.5 * 3.0 ** -depth
    gx, gy = np.meshgrid(x, x, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])
