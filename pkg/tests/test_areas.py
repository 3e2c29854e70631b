import csv
import io
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from novikov.areas import (
    TRIANGLE_SOLID_ANGLE,
    cell_polygon,
    cell_solid_angles,
    cell_weights,
    polygon_solid_angle,
    zone_areas,
)
from novikov.homology import ZoneLabel
from novikov.scanner import Diagnostics, DirectionRecord, ScanResult, enumerate_grid

Z001 = ZoneLabel.zone((0, 0, 1))
Z122 = ZoneLabel.zone((1, 2, 2))
LABELS = [Z001, Z122, ZoneLabel.zone((1, 1, 1)), ZoneLabel.null(), ZoneLabel.unresolved("RankOne")]


def synthetic(N, labeler):
    recs = [DirectionRecord(d.m, d.n, N, d.h, labeler(d.m, d.n), Diagnostics()) for d in enumerate_grid(N)]
    return ScanResult(N, 0.0, "synthetic", {}, recs)


def _omega(m, n, N):
    # solid angle of the clipped cell: integral of (1 + x^2 + y^2)^(-3/2) over it
    h = 0.5 / N
    x0, x1 = max(0.0, m / N - h), min(1.0, m / N + h)
    y0, y1 = max(0.0, n / N - h), min(1.0, n / N + h)
    val, _ = integrate.dblquad(lambda y, x: (1 + x * x + y * y) ** -1.5, x0, x1,
                               lambda x: max(y0, x), lambda x: y1, epsabs=1e-13, epsrel=1e-12)
    return val


def test_triangle_solid_angle():
    assert TRIANGLE_SOLID_ANGLE == pytest.approx(4 * math.pi / 48)
    tri = [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
    # the triangle (0,0,1), (0,1,1), (1,1,1) is 1/48 of the sphere
    assert polygon_solid_angle(tri) == pytest.approx(math.pi / 12, rel=1e-14)


@pytest.mark.parametrize("N", [1, 2, 5])
def test_cell_solid_angles_match_quadrature(N):
    omega = cell_solid_angles(N)
    assert math.fsum(omega.values()) == pytest.approx(math.pi / 12, rel=1e-12)
    for (m, n), w in omega.items():
        assert w == pytest.approx(_omega(m, n, N), rel=1e-9, abs=1e-14)


def test_edge_cells_are_clipped():
    # corner cell of N=2 is a quarter-square cut by the diagonal: area 1/32
    from novikov.areas import _signed_area
    assert abs(_signed_area(cell_polygon(0, 0, 2))) == pytest.approx(1 / 32)
    assert abs(_signed_area(cell_polygon(0, 1, 2))) == pytest.approx(1 / 8)
    assert abs(_signed_area(cell_polygon(1, 1, 2))) == pytest.approx(1 / 8)
    assert abs(_signed_area(cell_polygon(2, 2, 2))) == pytest.approx(1 / 32)


def test_single_zone_scan():
    t = zone_areas(synthetic(6, lambda m, n: Z001))
    assert len(t.rows) == 1
    assert t.rows[0].area == pytest.approx(1.0, abs=1e-12)
    assert t.rows[0].error == 0.0 and t.residual_area == 0.0


def test_n2_one_cell_differs():
    s = synthetic(2, lambda m, n: Z122 if (m, n) == (1, 2) else Z001)
    t = zone_areas(s)
    tri = math.pi / 12
    assert t.area(Z122) == pytest.approx(_omega(1, 2, 2) / tri, rel=1e-9)
    assert t.error(Z122) == pytest.approx(_omega(1, 2, 2) / tri, rel=1e-9)
    others = [(m, n) for m in range(3) for n in range(m, 3) if (m, n) != (1, 2)]
    assert t.area(Z001) == pytest.approx(sum(_omega(m, n, 2) for m, n in others) / tri, rel=1e-9)
    boundary = [(0, 2), (1, 1), (2, 2)]
    assert t.error(Z001) == pytest.approx(sum(_omega(m, n, 2) for m, n in boundary) / tri, rel=1e-9)
    assert [r.label for r in t.rows] == [Z001, Z122]


def test_chart_normalization_counts_flat_area():
    s = synthetic(2, lambda m, n: Z122 if (m, n) == (1, 2) else Z001)
    t = zone_areas(s, "chart")
    # cell (1,2) is half a square of side 1/2, i.e. 1/8 of the plane, 1/4 of the triangle
    assert t.area(Z122) == pytest.approx(0.25)
    assert t.total() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        cell_weights(2, "bogus")


def test_unresolved_goes_to_residual():
    s = synthetic(4, lambda m, n: ZoneLabel.unresolved("SolverFailure") if m == n else Z001)
    t = zone_areas(s)
    assert t.residual_area > 0
    assert all(not r.label.is_unresolved for r in t.rows)
    assert t.total() == pytest.approx(1.0, abs=1e-9)


def test_csv_layout():
    s = synthetic(3, lambda m, n: ZoneLabel.null() if n == 3 else Z001)
    out = list(csv.reader(io.StringIO(zone_areas(s).to_csv())))
    assert out[0] == ["label", "area", "error"]
    assert {row[0] for row in out[1:]} == {"0,0,1", "null"}
    assert float(out[1][1]) >= float(out[2][1])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2 ** 32 - 1), st.sampled_from(["sphere", "chart"]))
def test_area_closure(N, seed, norm):
    import random
    r = random.Random(seed)
    labels = {(d.m, d.n): r.choice(LABELS) for d in enumerate_grid(N)}
    t = zone_areas(synthetic(N, lambda m, n: labels[(m, n)]), norm)
    assert abs(t.total() - 1.0) < 1e-9
    assert all(row.area >= 0 and 0 <= row.error <= row.area + 1e-15 for row in t.rows)
    areas = [row.area for row in t.rows]
    assert areas == sorted(areas, reverse=True)
